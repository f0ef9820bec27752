import random

from fluxq.normalize import is_normal_form, normalize
from fluxq.flux import equivalent_modulo_renaming
from fluxq.xquery import For, ROOT, VarOut, parse_xquery, to_text

import corpus
from support import random_dtd, random_query


def _same(a, b):
    return equivalent_modulo_renaming(a, b)


def test_q1_normal_form():
    nf, report = normalize(parse_xquery(corpus.XMP_Q1))
    assert _same(nf, parse_xquery(corpus.Q1_NORMAL)), to_text(nf)
    assert is_normal_form(nf)
    assert report.rule_applications > 0
    assert len(report.fresh_vars) == 3


def test_idempotent_and_strategy_independent():
    for text in (corpus.XMP_Q1, corpus.XMP_Q2, corpus.XMP_Q3, corpus.JOIN_Q):
        q = parse_xquery(text)
        nf, _ = normalize(q)
        again, report = normalize(nf)
        assert again == nf and report.rule_applications == 0
        assert normalize(q, strategy="innermost")[0] == nf


def test_path_output_becomes_loop():
    nf, report = normalize(parse_xquery("{$ROOT/a/b}"))
    assert nf == For("_g1", ROOT, ("a",), For("_g2", "_g1", ("b",), VarOut("_g2")))
    assert report.by_rule[2] == 1 and report.by_rule[3] == 1


def test_join_query_normal_form():
    nf, _ = normalize(parse_xquery(corpus.JOIN_Q))
    expected = """<results>
    { for $bib in $ROOT/bib return
      { for $article in $bib/article return
        { for $book in $bib/book return
          { if CHI then <result> }
          { for $author in $article/author return
            { if CHI then {$author} } }
          { if CHI then </result> } } } }
    </results>""".replace("CHI", "$article/author = $book/editor")
    assert _same(nf, parse_xquery(expected))


def test_random_queries_normalize():
    rng = random.Random(3)
    for _ in range(300):
        q = parse_xquery(random_query(random_dtd(rng), rng))
        nf, _ = normalize(q)
        assert is_normal_form(nf)
        assert normalize(nf)[0] == nf
        assert normalize(q, strategy="innermost")[0] == nf
