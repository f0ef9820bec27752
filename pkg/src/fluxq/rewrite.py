"""Schema-driven rewriting of normalized XQuery- into safe FluX."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .errors import ElementNotInSchema, NotNormalForm, UnsafeQuery
from .flux import On, OnFirstPast, Ps, SimpleX, check_safety, fold_prefix_suffix, hsymb, is_simple
from .normalize import NormalizationReport, is_normal_form, normalize
from .schema import DOCUMENT, Dtd
from .xquery import ROOT, For, contains_output_of, dependencies, parse_xquery, seq_items, sequence


def _union(*parts) -> tuple:
    seen: dict[str, None] = {}
    for p in parts:
        for s in p:
            seen.setdefault(s)
    return tuple(seen)


class Rewriter:
    def __init__(self, dtd: Dtd, allow_dead_loops: bool = False):
        self.dtd = dtd
        self.allow_dead_loops = allow_dead_loops
        self.elements = {ROOT: DOCUMENT}

    def rewrite(self, x: str, H: tuple, beta):
        if contains_output_of(beta, x):
            if is_simple(beta) and not dependencies(x, beta):
                return SimpleX(beta)
            return Ps("", x, (OnFirstPast(None, beta),))

        items = seq_items(beta)
        if len(items) > 1:
            first = self.rewrite(x, H, items[0])
            rest = self.rewrite(x, _union(H, hsymb(first.handlers)), sequence(*items[1:]))
            return Ps("", x, first.handlers + rest.handlers)

        if is_simple(beta):
            return Ps("", x, (OnFirstPast(_union(dependencies(x, beta), H), beta),))

        if isinstance(beta, For) and len(beta.path) == 1 and beta.where is None:
            a = beta.path[0]
            alpha = beta.body
            candidates = _union(dependencies(x, alpha), H)
            if beta.source != x:
                # the loop reads another variable's buffer, so everything this
                # scope's handlers and the body refer to must have been seen
                return Ps("", x, (OnFirstPast(candidates, beta),))
            elem = self.elements.get(x)
            if elem is not None and a not in self.dtd.symb(elem):
                msg = f"${x}/{a}: {a!r} can never occur as a child of {elem!r}"
                if not self.allow_dead_loops:
                    raise ElementNotInSchema(msg)
                warnings.warn(msg + "; the loop never runs", stacklevel=2)
            ordr = self.dtd.ord(elem) if elem is not None else None
            X = tuple(b for b in candidates
                      if b == a or ordr is None or not ordr.holds(b, a))
            if X:
                return Ps("", x, (OnFirstPast(_union(X, (a,)), beta),))
            self.elements[beta.var] = a
            inner = self.rewrite(beta.var, (), alpha)
            return Ps("", x, (On(a, beta.var, inner),))

        raise NotNormalForm(f"cannot rewrite non-normalized expression {beta!r}")


def rewrite(q, dtd: Dtd, allow_dead_loops: bool = False):
    """``rewrite($ROOT, {}, q)`` for a normalized query ``q``."""
    if not is_normal_form(q):
        raise NotNormalForm("rewrite expects a query in normal form")
    return Rewriter(dtd, allow_dead_loops).rewrite(ROOT, (), q)


@dataclass
class Compilation:
    query: object
    normal_form: object
    flux: object
    report: NormalizationReport


def compile_query(query, dtd: Dtd, *, fold: bool = False, check: bool = True,
                  allow_dead_loops: bool = False) -> Compilation:
    """Parse (if given text), normalize, rewrite and safety-check a query."""
    q = parse_xquery(query) if isinstance(query, str) else query
    nf, report = normalize(q)
    f = rewrite(nf, dtd, allow_dead_loops=allow_dead_loops)
    if check:
        violations = check_safety(f, dtd, allow_dead_loops=allow_dead_loops)
        if violations:
            raise UnsafeQuery(violations)
    if fold:
        f = fold_prefix_suffix(f)
    return Compilation(q, nf, f, report)


__all__ = ["Rewriter", "rewrite", "compile_query", "Compilation"]
