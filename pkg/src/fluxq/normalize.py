"""Normal form of XQuery- expressions.

Six rewrite rules are applied downwards until none applies:

1. ``for $x in $y/pi where chi return b``  ->  ``for $x in $y/pi return {if chi then b}``
2. ``{$y/pi}``  ->  ``for $x in $y/pi return {$x}``  ($x fresh)
3. ``for $x in $y/a/pi return b``  ->  ``for $x0 in $y/a return {for $x in $x0/pi return b}``
4. ``if chi then {for ...}``  ->  ``for ... return {if chi then ...}``
5. ``if chi then a b``  ->  ``{if chi then a} {if chi then b}``
6. ``if chi then {if psi then a}``  ->  ``if (chi and psi) then a``

Sequences are kept flat and ``{if chi then ()}`` collapses to ``()``;
these housekeeping steps are not counted as rule applications.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .xquery import (
    And, Empty, For, If, PathOut, Seq, Str, VarOut, walk, sequence, children,
)

FRESH_PREFIX = "_g"


@dataclass
class NormalizationReport:
    rule_applications: int = 0
    fresh_vars: list = field(default_factory=list)
    by_rule: dict = field(default_factory=lambda: {i: 0 for i in range(1, 7)})


def _conj(a, b):
    """``a and b`` as a left-leaning chain, so merged conditions do not
    depend on the order in which nested ifs were combined."""
    if isinstance(b, And):
        return _conj(_conj(a, b.left), b.right)
    return And(a, b)


class _Normalizer:
    def __init__(self):
        self.report = NormalizationReport()
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        name = f"{FRESH_PREFIX}{self.counter}"
        return name

    def count(self, rule: int, n: int = 1):
        self.report.rule_applications += n
        self.report.by_rule[rule] += n

    def step(self, e):
        """Apply the first applicable rule at the root of ``e``, or return None."""
        if isinstance(e, For):
            if e.where is not None:
                self.count(1)
                return For(e.var, e.source, e.path, If(e.where, e.body))
            if len(e.path) > 1:
                self.count(3)
                x0 = self.fresh()
                inner = For(e.var, x0, e.path[1:], e.body)
                return For(x0, e.source, e.path[:1], inner)
        elif isinstance(e, PathOut):
            self.count(2)
            x = self.fresh()
            return For(x, e.var, e.path, VarOut(x))
        elif isinstance(e, If):
            body = e.body
            if isinstance(body, For) and body.where is None:
                self.count(4)
                return For(body.var, body.source, body.path, If(e.cond, body.body))
            if isinstance(body, Seq):
                self.count(5, len(body.items) - 1)
                return Seq(tuple(If(e.cond, item) for item in body.items))
            if isinstance(body, If):
                self.count(6)
                return If(_conj(e.cond, body.cond), body.body)
            if isinstance(body, Empty):
                return Empty()
        return None

    def rebuild(self, e, kids):
        if isinstance(e, Seq):
            return sequence(*kids)
        if isinstance(e, For):
            return For(e.var, e.source, e.path, kids[0], e.where)
        if isinstance(e, If):
            return If(e.cond, kids[0])
        return e

    def outermost(self, e):
        while True:
            r = self.step(e)
            if r is None:
                break
            e = r
        kids = children(e)
        if not kids:
            return e
        new = self.rebuild(e, [self.outermost(k) for k in kids])
        if self.step_applicable(new):
            return self.outermost(new)
        return new

    def innermost(self, e):
        kids = children(e)
        if kids:
            e = self.rebuild(e, [self.innermost(k) for k in kids])
        r = self.step(e)
        if r is None:
            return e
        return self.innermost(r)

    def step_applicable(self, e) -> bool:
        if isinstance(e, For):
            return e.where is not None or len(e.path) > 1
        if isinstance(e, PathOut):
            return True
        if isinstance(e, If):
            return isinstance(e.body, (For, Seq, If, Empty))
        return False


def normalize(e, strategy: str = "outermost"):
    """Return ``(normal_form, report)``.

    Fresh variables are renamed ``_g1, _g2, ...`` in order of their binders
    in the result, so the output does not depend on the strategy.
    """
    n = _Normalizer()
    if strategy == "outermost":
        out = n.outermost(e)
    elif strategy == "innermost":
        out = n.innermost(e)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    out = sequence(out) if isinstance(out, Seq) else out
    out, names = _rename_fresh(out)
    n.report.fresh_vars = names
    return out, n.report


def _rename_fresh(e):
    order = []
    for sub in walk(e):
        if isinstance(sub, For) and sub.var.startswith(FRESH_PREFIX) and sub.var not in order:
            order.append(sub.var)
    mapping = {old: f"{FRESH_PREFIX}{i}" for i, old in enumerate(order, 1)}
    if all(k == v for k, v in mapping.items()):
        return e, list(mapping.values())
    return rename_vars(e, mapping), list(mapping.values())


def rename_vars(e, mapping: dict):
    """Rename variables everywhere (binders, references, conditions)."""
    from .xquery import Compare, Exists, Not, Or, PathRef

    def v(name):
        return mapping.get(name, name)

    def cond(c):
        if isinstance(c, (And, Or)):
            return type(c)(cond(c.left), cond(c.right))
        if isinstance(c, Not):
            return Not(cond(c.operand))
        if isinstance(c, Exists):
            return Exists(PathRef(v(c.ref.var), c.ref.path))
        if isinstance(c, Compare):
            rhs = PathRef(v(c.rhs.var), c.rhs.path) if c.is_join else c.rhs
            return Compare(PathRef(v(c.lhs.var), c.lhs.path), c.op, rhs)
        return c

    def go(x):
        if isinstance(x, Seq):
            return Seq(tuple(go(i) for i in x.items))
        if isinstance(x, For):
            where = cond(x.where) if x.where is not None else None
            return For(v(x.var), v(x.source), x.path, go(x.body), where)
        if isinstance(x, If):
            return If(cond(x.cond), go(x.body))
        if isinstance(x, PathOut):
            return PathOut(v(x.var), x.path)
        if isinstance(x, VarOut):
            return VarOut(v(x.var))
        return x

    return go(e)


def is_normal_form(e) -> bool:
    for sub in walk(e):
        if isinstance(sub, PathOut):
            return False
        if isinstance(sub, For) and (sub.where is not None or len(sub.path) != 1):
            return False
        if isinstance(sub, If) and not isinstance(sub.body, (Str, VarOut)):
            return False
    return True
