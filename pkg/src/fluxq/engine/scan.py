"""Direct, slow interpreter of FluX over a materialized document.

For every process-stream binding with children ``t1..tn`` it performs the
``n + 2`` scans of the handler list literally.  First-past is decided on
the word of child labels by simulating the position automaton, so the
interpreter shares neither punctuation nor buffering with the streaming
engine.  Used as an oracle in tests.
"""

from __future__ import annotations

from ..flux import On, OnFirstPast, Ps, SimpleX
from ..schema import Dtd
from ..xquery import ROOT
from .evaluate import Node, build_tree, eval_xquery


def _future(g, states) -> set:
    """Symbols that can still be read after reaching any of ``states``."""
    seen, todo = set(), list(states)
    out = set()
    while todo:
        q = todo.pop()
        for sym, targets in g.transitions[q].items():
            out.add(sym)
            for p in targets:
                if p not in seen:
                    seen.add(p)
                    todo.append(p)
    return out


def _past_flags(g, labels, symbols) -> list[bool]:
    """past_S after each prefix of ``labels`` (length n + 1)."""
    flags = []
    current = {0}
    for i in range(len(labels) + 1):
        fut = _future(g, current)
        flags.append(not (fut & symbols))
        if i < len(labels):
            current = {p for q in current for p in g.transitions[q].get(labels[i], ())}
    return flags


class ScanInterpreter:
    def __init__(self, dtd: Dtd):
        self.dtd = dtd

    def run(self, q, document) -> str:
        if not isinstance(document, Node):
            document = build_tree(document, self.dtd)
        out: list[str] = []
        self.eval(q, {ROOT: document}, out)
        return "".join(out)

    def eval(self, q, env: dict, out: list):
        if isinstance(q, SimpleX):
            eval_xquery(q.expr, dict(env), out)
        elif isinstance(q, Ps):
            out.append(q.prefix)
            self.process_stream(q, env, out)
            out.append(q.suffix)
        else:
            raise TypeError(f"not a FluX expression: {q!r}")

    def process_stream(self, ps: Ps, env: dict, out: list):
        node = env[ps.var]
        kids = [c for c in node.children if type(c) is Node]
        labels = [c.tag for c in kids]
        element = node.tag
        g = self.dtd.automaton(element)
        n = len(kids)
        past = {}
        for h in ps.handlers:
            if isinstance(h, OnFirstPast):
                syms = self.dtd.symb(element) if h.symbols is None else h.symbols
                key = frozenset(syms)
                if key not in past:
                    past[key] = _past_flags(g, labels, key)
        fired = [False] * len(ps.handlers)
        for i in range(n + 2):
            for j, h in enumerate(ps.handlers):
                if isinstance(h, On):
                    if 1 <= i <= n and labels[i - 1] == h.symbol:
                        inner = dict(env)
                        inner[h.var] = kids[i - 1]
                        self.eval(h.body, inner, out)
                elif not fired[j]:
                    syms = self.dtd.symb(element) if h.symbols is None else h.symbols
                    if i == n + 1 or past[frozenset(syms)][i]:
                        fired[j] = True
                        eval_xquery(h.body, dict(env), out)


def scan_eval(q, dtd: Dtd, document) -> str:
    """Evaluate FluX query ``q`` by the literal n + 2 scan semantics."""
    return ScanInterpreter(dtd).run(q, document)
