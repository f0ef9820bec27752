import random

import pytest

from fluxq.errors import QuerySyntaxError, UnknownElement
from fluxq.flux import (
    On, OnFirstPast, Ps, SimpleX, check_safety, fold_prefix_suffix, hsymb,
    maximal_xquery_subexprs, parse_flux, serialize_flux,
)
from fluxq.normalize import normalize
from fluxq.rewrite import rewrite
from fluxq.xquery import For, Str, VarOut, parse_xquery

import corpus
from support import random_dtd, random_query


def test_hsymb():
    body = Str("x")
    assert hsymb(()) == ()
    assert set(hsymb((On("a", "x", SimpleX(VarOut("x"))), OnFirstPast(("b", "c"), body)))) == \
        {"a", "b", "c"}
    assert hsymb((OnFirstPast((), body),)) == ()


def test_parse_long_and_short_forms():
    long = parse_flux(corpus.Q3_ORDERED_FLUX)
    short = parse_flux(corpus.Q3_ORDERED_FLUX.replace("process-stream", "ps"))
    assert long == short
    assert long.prefix == "<results>" and long.suffix == "</results>"


def test_round_trip():
    for text in (corpus.F1, corpus.F2, corpus.F2_PRIME, corpus.F3, corpus.F3_PRIME,
                 corpus.Q3_WEAK_FLUX):
        q = parse_flux(text)
        assert parse_flux(serialize_flux(q)) == q


def test_parse_errors():
    with pytest.raises(QuerySyntaxError):
        parse_flux("{ps $ROOT: on bib as $b }")
    with pytest.raises(QuerySyntaxError):
        parse_flux("{ps $ROOT: on-first past(a return x }")


def test_maximal_subexpressions():
    q = parse_flux(corpus.Q3_WEAK_FLUX)
    found = [alpha for _, alpha in maximal_xquery_subexprs(q)]
    assert found == [VarOut("t"), For("a", "book", ("author",), VarOut("a"))]


def test_reference_plans_are_safe():
    assert check_safety(parse_flux(corpus.Q3_WEAK_FLUX), corpus.WEAK) == []
    assert check_safety(parse_flux(corpus.Q3_ORDERED_FLUX), corpus.ORDERED) == []


def test_price_variant_is_unsafe():
    v = check_safety(parse_flux(corpus.PRICE_VARIANT_FLUX), corpus.PRICE)
    assert [x.kind for x in v] == ["dependency-not-past"]
    assert v[0].detail == "price"


def test_streaming_authors_under_weak_dtd_is_unsafe():
    # a title loop inside an author handler needs every title to come first
    q = parse_flux("""{ps $ROOT: on bib as $bib return
      {ps $bib: on book as $book return
        {ps $book: on author as $a return
          {ps $a: on-first past() return { for $t in $book/title return {$t} } } } } }""")
    assert check_safety(q, corpus.WEAK)
    assert check_safety(q, corpus.AUTHORS_FIRST)
    titles_first = corpus.dtd("<!ELEMENT bib (book)*>", "<!ELEMENT book (title*,author*)>")
    assert check_safety(q, titles_first) == []


def test_on_handler_order_violation():
    q = parse_flux("""{ps $ROOT: on bib as $bib return
      {ps $bib: on book as $book return
        {ps $book: on author as $a return
          { if exists($book/title) then {$a} } } } }""")
    kinds = [x.kind for x in check_safety(q, corpus.WEAK)]
    assert kinds == ["on-handler-order"]
    assert check_safety(q, corpus.ORDERED) == []


def test_foreign_output_violation():
    q = parse_flux("""{ps $ROOT: on bib as $bib return
      {ps $bib: on book as $book return
        {ps $book: on author as $a return {$book} } } }""")
    kinds = {x.kind for x in check_safety(q, corpus.ORDERED)}
    assert "on-handler-foreign-var" in kinds


def test_subtree_output_needs_everything_past():
    q = parse_flux("{ps $ROOT: on bib as $bib return {ps $bib: on-first past() return {$bib} } }")
    assert [x.kind for x in check_safety(q, corpus.WEAK)] == ["subtree-output-unsafe"]
    ok = parse_flux("{ps $ROOT: on bib as $bib return {ps $bib: on-first past(*) return {$bib} } }")
    assert check_safety(ok, corpus.WEAK) == []


def test_unknown_handler_symbol():
    q = parse_flux("{ps $ROOT: on magazine as $m return {$m} }")
    with pytest.raises(UnknownElement):
        check_safety(q, corpus.WEAK)


def test_fold_prefix_suffix():
    q = parse_flux(corpus.F2)
    folded = fold_prefix_suffix(q)
    assert folded.prefix == "<results>" and folded.suffix == "</results>"
    assert len(folded.handlers) == 1


def test_rewriter_output_is_safe_on_random_inputs():
    rng = random.Random(99)
    for _ in range(200):
        dtd = random_dtd(rng)
        nf, _ = normalize(parse_xquery(random_query(dtd, rng)))
        f = rewrite(nf, dtd)
        assert check_safety(f, dtd) == [], serialize_flux(f)


def test_ps_requires_handlers():
    with pytest.raises(ValueError):
        Ps("", "ROOT", ())
