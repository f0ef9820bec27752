import random

import pytest

from fluxq.errors import QuerySyntaxError, ScopeError, UnsupportedConstruct
from fluxq.xquery import (
    And, Compare, Empty, Exists, For, If, Not, PathOut, PathRef, ROOT, Seq, Str, VarOut,
    dependencies, free_vars, parse_condition, parse_xquery, to_text,
)

from support import random_dtd, random_query

Q3 = "<results> { for $b in $ROOT/bib/book return <result> { $b/title } { $b/author } </result> } </results>"


def test_parse_q3():
    q = parse_xquery(Q3)
    assert q == Seq((
        Str("<results>"),
        For("b", ROOT, ("bib", "book"),
            Seq((Str("<result>"), PathOut("b", ("title",)), PathOut("b", ("author",)),
                 Str("</result>")))),
        Str("</results>"),
    ))


def test_leading_slash_means_root():
    assert parse_xquery("{ for $p in /site/people return {$p} }") == \
        For("p", ROOT, ("site", "people"), VarOut("p"))


def test_where_clause_and_conditions():
    q = parse_xquery('{ for $b in $ROOT/bib/book where $b/publisher = "AW" and $b/year > 1991 '
                     'return {$b} }')
    assert isinstance(q, For)
    assert q.where == And(Compare(PathRef("b", ("publisher",)), "=", "AW"),
                          Compare(PathRef("b", ("year",)), ">", "1991"))


def test_condition_forms():
    scope = ("x", "y")
    assert parse_condition("exists($x/a)", scope) == Exists(PathRef("x", ("a",)))
    assert parse_condition("empty($x/a)", scope) == Not(Exists(PathRef("x", ("a",))))
    c = parse_condition("$x/a = $y/b", scope)
    assert c.is_join
    flipped = parse_condition('"3" < $x/a', scope)
    assert flipped == Compare(PathRef("x", ("a",)), ">", "3")


def test_scope_errors():
    with pytest.raises(ScopeError):
        parse_xquery("{$x}")
    with pytest.raises(ScopeError):
        parse_xquery("{ for $a in $ROOT/r return w } {$a}")


def test_shadowed_variables_are_renamed():
    q = parse_xquery("{ for $a in $ROOT/r return { for $a in $a/s return {$a} } }")
    assert q.var != q.body.var
    assert q.body.source == q.var
    assert q.body.body == VarOut(q.body.var)


@pytest.mark.parametrize("text", [
    "{ let $x := $ROOT/a return {$x} }",
    "{ for $x in $ROOT//a return {$x} }",
    "{ for $x in $ROOT/a[1] return {$x} }",
    "{ for $x in $ROOT/* return {$x} }",
    "{ for $x in $ROOT/a order by $x return {$x} }",
    "{ if $ROOT/a = \"1\" then <x/> else <y/> }",
    "{ for $x in $ROOT/a where $x/b + 1 = 2 return {$x} }",
    "{ for $x in $ROOT/a where $x/b != \"1\" return {$x} }",
])
def test_unsupported_constructs(text):
    with pytest.raises(UnsupportedConstruct):
        parse_xquery(text)


def test_syntax_error_has_position():
    with pytest.raises(QuerySyntaxError) as info:
        parse_xquery("{ for $x in return }")
    assert "line 1" in str(info.value)


def test_free_vars_and_dependencies():
    q = parse_xquery("{ for $a in $ROOT/r return { for $b in $a/s where $a/t = \"1\" return {$b} } }")
    assert free_vars(q) == {ROOT}
    inner = q.body
    assert free_vars(inner) == {"a"}
    assert dependencies("a", inner) == ("t", "s")


def test_text_round_trip_on_random_queries():
    rng = random.Random(5)
    for _ in range(300):
        dtd = random_dtd(rng)
        q = parse_xquery(random_query(dtd, rng))
        assert parse_xquery(to_text(q)) == q


def test_risky_text_survives_round_trip():
    q = Seq((Str("for"), Str("if x"), VarOut(ROOT)))
    assert parse_xquery(to_text(q)) == q


def test_empty_query():
    assert parse_xquery("") == Empty()
    assert parse_xquery("()") == Empty()


def test_if_expression():
    q = parse_xquery('{ for $a in $ROOT/r return { if exists($a/s) then <x/> } }')
    assert q.body == If(Exists(PathRef("a", ("s",))), Str("<x/>"))
