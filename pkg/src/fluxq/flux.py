"""FluX: XQuery- extended with ``process-stream`` event handlers.

A FluX expression is either a simple XQuery- expression (:class:`SimpleX`)
or ``s {ps $y: h1; ...; hn} s'`` (:class:`Ps`).  Handlers are
``on-first past(S) return alpha`` (:class:`OnFirstPast`) and
``on a as $x return Q`` (:class:`On`).  ``past(*)`` is kept symbolic as
``symbols=None`` until a DTD is bound.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Union

from .errors import UnknownElement
from .schema import DOCUMENT
from .xquery import (
    ROOT, For, If, PathOut, Seq, Str, VarOut, XQueryParser, atoms, atom_refs,
    dependencies, free_vars, seq_items, to_text, walk,
    And, Or, Not, Exists, Compare, PathRef,
)


@dataclass(frozen=True)
class SimpleX:
    expr: object


@dataclass(frozen=True)
class OnFirstPast:
    symbols: tuple | None  # None means past(*)
    body: object


@dataclass(frozen=True)
class On:
    symbol: str
    var: str
    body: object  # FluxExpr


@dataclass(frozen=True)
class Ps:
    prefix: str
    var: str
    handlers: tuple
    suffix: str = ""

    def __post_init__(self):
        if not self.handlers:
            raise ValueError("process-stream needs at least one handler")


Handler = Union[OnFirstPast, On]
FluxExpr = Union[SimpleX, Ps]


# --------------------------------------------------------------------------
# simple expressions


def _cond_vars(c) -> set:
    return {r.var for a in atoms(c) for r in atom_refs(a)}


def is_simple(e) -> bool:
    """Whether ``e`` has the shape alpha beta gamma of a simple expression."""
    items = seq_items(e)
    out_index = None
    for i, it in enumerate(items):
        if isinstance(it, Str):
            continue
        if isinstance(it, If) and isinstance(it.body, Str):
            continue
        if isinstance(it, VarOut) or isinstance(it, If) and isinstance(it.body, VarOut):
            if out_index is not None:
                return False
            out_index = i
            continue
        return False
    if out_index is None:
        return True
    beta = items[out_index]
    u = beta.var if isinstance(beta, VarOut) else beta.body.var
    for it in items[:out_index + 1]:
        if isinstance(it, If) and u in _cond_vars(it.cond):
            return False
    return True


def output_var(e) -> str | None:
    """Variable of the subtree output of a simple expression, if any."""
    for it in seq_items(e):
        if isinstance(it, VarOut):
            return it.var
        if isinstance(it, If) and isinstance(it.body, VarOut):
            return it.body.var
    return None


# --------------------------------------------------------------------------
# structural helpers


def hsymb(handlers) -> tuple:
    """Handler symbols of a handler list, as an insertion-ordered tuple.

    ``past(*)`` handlers contribute the marker ``"*"``.
    """
    seen: dict[str, None] = {}
    for h in handlers:
        if isinstance(h, On):
            seen.setdefault(h.symbol)
        elif h.symbols is None:
            seen.setdefault("*")
        else:
            for s in h.symbols:
                seen.setdefault(s)
    return tuple(seen)


def maximal_xquery_subexprs(q, position=()) -> list[tuple]:
    """All maximal XQuery- subexpressions of ``q`` with their positions.

    Positions are tuples of handler indices; a trailing ``"body"`` marks
    the expression held by a handler or a :class:`SimpleX`.
    """
    if isinstance(q, SimpleX):
        return [(position, q.expr)]
    out = []
    for i, h in enumerate(q.handlers):
        if isinstance(h, OnFirstPast):
            out.append((position + (i,), h.body))
        else:
            out.extend(maximal_xquery_subexprs(h.body, position + (i,)))
    return out


def ps_nodes(q, env=None) -> Iterator[tuple]:
    """Yield ``(ps, element_of_var)`` for every Ps subexpression.

    ``env`` maps variables bound by on-handlers to their element names.
    """
    env = dict(env or {ROOT: DOCUMENT})
    if isinstance(q, SimpleX):
        return
    yield q, env
    elem = env.get(q.var)
    for h in q.handlers:
        if isinstance(h, On):
            inner = dict(env)
            inner[h.var] = h.symbol if elem is not None else None
            yield from ps_nodes(h.body, inner)


def flux_walk(q) -> Iterator:
    """All FluX and XQuery- nodes of ``q`` in pre-order."""
    if isinstance(q, SimpleX):
        yield q
        yield from walk(q.expr)
        return
    yield q
    for h in q.handlers:
        yield h
        if isinstance(h, On):
            yield from flux_walk(h.body)
        else:
            yield from walk(h.body)


# --------------------------------------------------------------------------
# safety


@dataclass(frozen=True)
class SafetyViolation:
    location: tuple  # (ps variable, handler index)
    kind: str
    detail: str

    def __str__(self):
        var, idx = self.location
        return f"ps ${var} handler {idx + 1}: {self.kind} ({self.detail})"


def check_safety(q, dtd, allow_dead_loops: bool = False) -> list[SafetyViolation]:
    """Check the two safety conditions for every process-stream subexpression."""
    violations = []
    for ps, env in ps_nodes(q):
        elem = env.get(ps.var)
        if elem is None or not dtd.has(elem):
            raise UnknownElement(f"cannot resolve the element bound to ${ps.var}")
        symb = dtd.symb(elem)
        ordr = dtd.ord(elem)

        def covered(b, S):
            return b in S or any(a in symb and ordr.holds(b, a) for a in S)

        for i, h in enumerate(ps.handlers):
            loc = (ps.var, i)
            if isinstance(h, OnFirstPast):
                S = tuple(symb) if h.symbols is None else h.symbols
                for b in dependencies(ps.var, h.body):
                    if not covered(b, S):
                        violations.append(SafetyViolation(loc, "dependency-not-past", b))
                for z in sorted(_output_vars(h.body) & free_vars(h.body)):
                    if z != ps.var:
                        violations.append(SafetyViolation(loc, "subtree-output-unsafe", "$" + z))
                    else:
                        missing = [b for b in symb if not covered(b, S)]
                        if missing:
                            violations.append(SafetyViolation(
                                loc, "subtree-output-unsafe", f"${z} with {missing[0]} not past"))
            else:
                if h.symbol not in symb:
                    if allow_dead_loops:
                        continue
                    raise UnknownElement(
                        f"on-handler symbol {h.symbol!r} is not a child of {elem!r}")
                for _, alpha in maximal_xquery_subexprs(h.body):
                    for b in dependencies(ps.var, alpha):
                        if not ordr.holds(b, h.symbol):
                            violations.append(SafetyViolation(
                                loc, "on-handler-order", f"{b} may follow {h.symbol}"))
                if isinstance(h.body, SimpleX):
                    for sub in walk(h.body.expr):
                        if isinstance(sub, VarOut) and sub.var != h.var:
                            violations.append(SafetyViolation(
                                loc, "on-handler-foreign-var", "$" + sub.var))
    return violations


def _output_vars(e) -> set:
    return {s.var for s in walk(e) if isinstance(s, (VarOut, PathOut))}


# --------------------------------------------------------------------------
# canonical form for comparisons


def canonical(q):
    """Rename bound variables in pre-order to ``$v1, $v2, ...`` and sort
    past-sets, so that structurally equal queries compare equal."""
    counter = [0]

    def fresh():
        counter[0] += 1
        return f"v{counter[0]}"

    def ref(r, env):
        return PathRef(env.get(r.var, r.var), r.path)

    def cond(c, env):
        if isinstance(c, (And, Or)):
            return type(c)(cond(c.left, env), cond(c.right, env))
        if isinstance(c, Not):
            return Not(cond(c.operand, env))
        if isinstance(c, Exists):
            return Exists(ref(c.ref, env))
        if isinstance(c, Compare):
            rhs = ref(c.rhs, env) if c.is_join else c.rhs
            return Compare(ref(c.lhs, env), c.op, rhs)
        return c

    def xq(e, env):
        if isinstance(e, Seq):
            return Seq(tuple(xq(i, env) for i in e.items))
        if isinstance(e, For):
            src = env.get(e.source, e.source)
            inner = {**env, e.var: fresh()}
            where = cond(e.where, inner) if e.where is not None else None
            return For(inner[e.var], src, e.path, xq(e.body, inner), where)
        if isinstance(e, If):
            return If(cond(e.cond, env), xq(e.body, env))
        if isinstance(e, PathOut):
            return PathOut(env.get(e.var, e.var), e.path)
        if isinstance(e, VarOut):
            return VarOut(env.get(e.var, e.var))
        return e

    def fx(e, env):
        if isinstance(e, SimpleX):
            return SimpleX(xq(e.expr, env))
        if isinstance(e, Ps):
            hs = []
            for h in e.handlers:
                if isinstance(h, OnFirstPast):
                    syms = None if h.symbols is None else tuple(sorted(set(h.symbols)))
                    hs.append(OnFirstPast(syms, xq(h.body, env)))
                else:
                    inner = {**env, h.var: fresh()}
                    hs.append(On(h.symbol, inner[h.var], fx(h.body, inner)))
            return Ps(e.prefix, env.get(e.var, e.var), tuple(hs), e.suffix)
        return xq(e, env)

    return fx(q, {})


def equivalent_modulo_renaming(a, b) -> bool:
    return canonical(a) == canonical(b)


# --------------------------------------------------------------------------
# prefix/suffix folding


def fold_prefix_suffix(q):
    """Move a leading ``on-first past()`` string handler into the Ps prefix and
    a trailing string handler whose past-set covers every earlier handler
    symbol into the suffix.  Both moves preserve semantics."""
    if isinstance(q, SimpleX):
        return q
    handlers = [replace(h, body=fold_prefix_suffix(h.body)) if isinstance(h, On) else h
                for h in q.handlers]
    prefix, suffix = q.prefix, q.suffix
    if (len(handlers) > 1 and not prefix and isinstance(handlers[0], OnFirstPast)
            and handlers[0].symbols == () and isinstance(handlers[0].body, Str)):
        prefix = handlers.pop(0).body.text
    if len(handlers) > 1 and not suffix:
        last = handlers[-1]
        if isinstance(last, OnFirstPast) and isinstance(last.body, Str):
            before = set(hsymb(handlers[:-1]))
            covers = last.symbols is None or "*" not in before and before <= set(last.symbols)
            if covers:
                suffix = last.body.text
                handlers.pop()
    return Ps(prefix, q.var, tuple(handlers), suffix)


# --------------------------------------------------------------------------
# concrete syntax


def serialize_flux(q, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(q, SimpleX):
        return to_text(q.expr, reserved=";")
    lines = [f"{{ps ${q.var}:"]
    for i, h in enumerate(q.handlers):
        sep = ";" if i < len(q.handlers) - 1 else " }"
        if isinstance(h, OnFirstPast):
            syms = "*" if h.symbols is None else ",".join(h.symbols)
            head = f"on-first past({syms}) return "
            lines.append(pad + "  " + head + to_text(h.body, reserved=";") + sep)
        else:
            body = serialize_flux(h.body, indent + 2)
            lines.append(pad + f"  on {h.symbol} as ${h.var} return")
            lines.append(pad + "    " + body + sep)
    text = "\n".join(lines)
    parts = []
    if q.prefix:
        parts.append(_protect(q.prefix))
    parts.append(text)
    if q.suffix:
        parts.append(_protect(q.suffix))
    return " ".join(parts)


def _protect(s: str) -> str:
    return to_text(Str(s), reserved=";")


class FluxParser(XQueryParser):
    """Parses FluX concrete syntax; ``ps`` and ``process-stream`` are synonyms."""

    def __init__(self, text: str):
        super().__init__(text, rename=False)

    def block_keyword(self):
        if self.keyword("process-stream") or self.keyword("ps"):
            return self.ps_block()
        return super().block_keyword()

    def parse_flux(self):
        e = self.flux_sequence(terminators="")
        if not self.at_end():
            self.error("unexpected input")
        return e

    def flux_sequence(self, terminators: str):
        start = self.pos
        e = self.sequence(terminators=terminators, body=True)
        items = seq_items(e)
        ps_idx = [i for i, it in enumerate(items) if isinstance(it, Ps)]
        if not ps_idx:
            if not is_simple(e):
                self.pos = start
                self.error("handler body must be a simple expression or a process-stream")
            return SimpleX(e)
        (k,) = ps_idx if len(ps_idx) == 1 else self._bad(start)
        before, after = items[:k], items[k + 1:]
        if len(before) > 1 or len(after) > 1 or not all(
                isinstance(x, Str) for x in before + after):
            self._bad(start)
        ps = items[k]
        prefix = before[0].text if before else ""
        suffix = after[0].text if after else ""
        return Ps(prefix, ps.var, ps.handlers, suffix)

    def _bad(self, start):
        self.pos = start
        self.error("a process-stream may only be surrounded by strings")

    def ps_block(self):
        self.skip_ws()
        ref = self.path_ref()
        if ref.path:
            self.error("process-stream takes a variable, not a path")
        self.expect(":")
        handlers = [self.handler()]
        while True:
            self.skip_ws()
            if self.peek() != ";":
                break
            self.pos += 1
            handlers.append(self.handler())
        return Ps("", ref.var, tuple(handlers), "")

    def handler(self):
        if self.keyword("on-first"):
            if not self.keyword("past"):
                self.error("expected 'past'")
            self.expect("(")
            self.skip_ws()
            if self.peek() == "*":
                self.pos += 1
                syms = None
            else:
                names = []
                while True:
                    self.skip_ws()
                    m = _name(self)
                    if m is None:
                        break
                    names.append(m)
                    self.skip_ws()
                    if self.peek() != ",":
                        break
                    self.pos += 1
                syms = tuple(names)
            self.expect(")")
            if not self.keyword("return"):
                self.error("expected 'return'")
            body = self.sequence(terminators=";}", body=True)
            return OnFirstPast(syms, body)
        if self.keyword("on"):
            self.skip_ws()
            sym = _name(self)
            if sym is None:
                self.error("expected element name after 'on'")
            if not self.keyword("as"):
                self.error("expected 'as'")
            self.skip_ws()
            if self.peek() != "$":
                self.error("expected variable")
            self.pos += 1
            var = _name(self)
            if not self.keyword("return"):
                self.error("expected 'return'")
            self.scopes.append({var: var})
            body = self.flux_sequence(terminators=";}")
            self.scopes.pop()
            return On(sym, var, body)
        self.error("expected an event handler")


def _name(p) -> str | None:
    import re
    m = re.compile(r"[A-Za-z_][-A-Za-z0-9_.]*").match(p.text, p.pos)
    if not m:
        return None
    p.pos = m.end()
    return m.group()


def parse_flux(text: str):
    return FluxParser(text).parse_flux()


def as_flux(e):
    """Wrap an XQuery- query as ``{ps $ROOT: on-first past(*) return e}``."""
    return Ps("", ROOT, (OnFirstPast(None, e),), "")
