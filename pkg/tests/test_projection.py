from fluxq.flux import parse_flux
from fluxq.projection import (
    JOIN, OUTPUT, STRUCTURAL, BufferPath, buffer_paths, build_buffer_tree, buffered_vars,
    project,
)
from fluxq.xquery import parse_xquery

import corpus


def _body(text, *scope):
    # wrap so the parser knows the free variables
    q = text
    for v in reversed(scope):
        q = f"{{ for ${v} in $ROOT/{v} return {q} }}"
    e = parse_xquery(q)
    for _ in scope:
        e = e.body
    return e


def test_paths_of_nested_loop_with_join():
    alpha = _body("""{ for $x in $r/a/b where $x/c = $s/d return {$x/e} }
                     { for $y in $r/f return <w/> }""", "r", "s")
    assert buffer_paths("r", alpha) == {
        BufferPath("r", ("a", "b", "c"), JOIN),
        BufferPath("r", ("a", "b", "e"), OUTPUT),
        BufferPath("r", ("f",), STRUCTURAL),
    }
    assert buffer_paths("s", alpha) == {BufferPath("s", ("d",), JOIN)}


def test_tree_marks_and_prunes():
    paths = {
        BufferPath("r", ("a",), OUTPUT),
        BufferPath("r", ("a", "b"), JOIN),
        BufferPath("r", ("c", "d"), STRUCTURAL),
    }
    t = build_buffer_tree("r", paths)
    assert t.root.children["a"].marked
    assert t.root.children["a"].children == {}
    c = t.root.children["c"]
    assert not c.marked and not c.children["d"].marked


def test_q3_weak_buffers_authors_only():
    p = project(parse_flux(corpus.Q3_WEAK_FLUX))
    assert set(p.trees) == {"book"}
    assert p.tree("book").dump() == "$book\n  author *"


def test_q3_ordered_buffers_nothing():
    q = parse_flux(corpus.Q3_ORDERED_FLUX)
    assert project(q).trees == {}
    # the streamed handlers still count as free variables, but hold nothing
    assert buffered_vars(q) == {"t", "a"}


def test_streamed_title_keeps_its_own_buffer_in_f2_prime():
    p = project(parse_flux(corpus.F2_PRIME))
    assert set(p.trees) == {"b", "t"}
    assert p.tree("t").root.marked
    assert p.tree("b").dump() == "$b\n  author *"


def test_constant_comparisons_become_probes():
    p = project(parse_flux(corpus.F1))
    root = p.tree("b").root
    assert ("cmp", ("publisher",), "=", "Addison-Wesley") in root.probes
    pub = root.children["publisher"]
    assert not pub.stored and not pub.marked
    # year is buffered anyway, so its comparison needs no probe
    assert root.children["year"].marked
    assert not any(k[1] == ("year",) for k in root.probes)


def test_join_operands_are_buffered_on_both_sides():
    p = project(parse_flux(corpus.F3))
    assert p.tree("bib").dump() == "$bib\n  article\n    author *\n  book\n    editor *"
    p2 = project(parse_flux(corpus.F3_PRIME))
    assert set(p2.trees) == {"article", "bib"}
    assert p2.tree("article").dump() == "$article\n  author *"
    assert "article" not in p2.tree("bib").root.children
