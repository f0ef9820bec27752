"""Abstract syntax, concrete syntax and static analyses of the XQuery- fragment.

Variables are stored without the leading ``$``; the document variable is
:data:`ROOT`.  Literal markup between embedded ``{...}`` blocks is output
verbatim, so ``<r>{$x}</r>`` is the sequence ``Str("<r>") VarOut(x) Str("</r>")``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

from .errors import QuerySyntaxError, ScopeError, UnsupportedConstruct

ROOT = "ROOT"

RELOPS = ("=", "<", "<=", ">", ">=")


# --------------------------------------------------------------------------
# conditions


@dataclass(frozen=True)
class PathRef:
    var: str
    path: tuple

    def __str__(self):
        return "$" + "/".join((self.var,) + self.path)


@dataclass(frozen=True)
class TrueCond:
    pass


@dataclass(frozen=True)
class And:
    left: "Condition"
    right: "Condition"


@dataclass(frozen=True)
class Or:
    left: "Condition"
    right: "Condition"


@dataclass(frozen=True)
class Not:
    operand: "Condition"


@dataclass(frozen=True)
class Exists:
    ref: PathRef


@dataclass(frozen=True)
class Compare:
    """``lhs op rhs``; ``rhs`` is a :class:`PathRef` (join) or a literal string."""

    lhs: PathRef
    op: str
    rhs: Union[PathRef, str]

    @property
    def is_join(self) -> bool:
        return isinstance(self.rhs, PathRef)


Condition = Union[TrueCond, And, Or, Not, Exists, Compare]


def atoms(c: Condition) -> Iterator[Union[Exists, Compare]]:
    if isinstance(c, (And, Or)):
        yield from atoms(c.left)
        yield from atoms(c.right)
    elif isinstance(c, Not):
        yield from atoms(c.operand)
    elif isinstance(c, (Exists, Compare)):
        yield c


def atom_refs(a) -> tuple:
    if isinstance(a, Exists):
        return (a.ref,)
    if a.is_join:
        return (a.lhs, a.rhs)
    return (a.lhs,)


def condition_refs(c: Condition) -> Iterator[PathRef]:
    for a in atoms(c):
        yield from atom_refs(a)


# --------------------------------------------------------------------------
# expressions


@dataclass(frozen=True)
class Empty:
    pass


@dataclass(frozen=True)
class Str:
    text: str


@dataclass(frozen=True)
class Seq:
    items: tuple


@dataclass(frozen=True)
class For:
    """``{for $var in $source/path [where cond] return body}``."""

    var: str
    source: str
    path: tuple
    body: "XQueryExpr"
    where: Condition | None = None


@dataclass(frozen=True)
class PathOut:
    var: str
    path: tuple


@dataclass(frozen=True)
class VarOut:
    var: str


@dataclass(frozen=True)
class If:
    cond: Condition
    body: "XQueryExpr"


XQueryExpr = Union[Empty, Str, Seq, For, PathOut, VarOut, If]


def sequence(*items) -> XQueryExpr:
    """Build a sequence: nested sequences are flattened, empties dropped."""
    flat = []
    for it in items:
        if isinstance(it, Seq):
            flat.extend(it.items)
        elif not isinstance(it, Empty):
            flat.append(it)
    if not flat:
        return Empty()
    if len(flat) == 1:
        return flat[0]
    return Seq(tuple(flat))


def seq_items(e: XQueryExpr) -> tuple:
    if isinstance(e, Seq):
        return e.items
    if isinstance(e, Empty):
        return ()
    return (e,)


def children(e) -> tuple:
    if isinstance(e, Seq):
        return e.items
    if isinstance(e, (For, If)):
        return (e.body,)
    return ()


def walk(e) -> Iterator:
    """Pre-order traversal of all subexpressions, ``e`` included."""
    # explicit stack: nested generators would cost O(depth) per node
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def conditions(e) -> Iterator[Condition]:
    for sub in walk(e):
        if isinstance(sub, If):
            yield sub.cond
        elif isinstance(sub, For) and sub.where is not None:
            yield sub.where


# --------------------------------------------------------------------------
# analyses


def free_vars(e) -> frozenset[str]:
    """Free variables of an XQuery- (or FluX) expression."""
    from . import flux  # FluX terms reuse this function

    if isinstance(e, flux.SimpleX):
        return free_vars(e.expr)
    if isinstance(e, flux.Ps):
        out = {e.var}
        for h in e.handlers:
            if isinstance(h, flux.OnFirstPast):
                out |= free_vars(h.body)
            else:
                out |= free_vars(h.body) - {h.var}
        return frozenset(out)
    if isinstance(e, (Empty, Str)):
        return frozenset()
    if isinstance(e, Seq):
        return frozenset().union(*(free_vars(i) for i in e.items))
    if isinstance(e, For):
        inner = set(free_vars(e.body))
        if e.where is not None:
            inner |= {r.var for r in condition_refs(e.where)}
        return frozenset({e.source} | (inner - {e.var}))
    if isinstance(e, (PathOut, VarOut)):
        return frozenset({e.var})
    if isinstance(e, If):
        return free_vars(e.body) | {r.var for r in condition_refs(e.cond)}
    raise TypeError(f"not an expression: {e!r}")


def condition_paths(e) -> frozenset[PathRef]:
    """All paths ``$x/pi`` occurring in conditions inside ``e``."""
    return frozenset(r for c in _all_conditions(e) for r in condition_refs(c))


def _all_conditions(e):
    from . import flux

    if isinstance(e, flux.SimpleX):
        yield from conditions(e.expr)
    elif isinstance(e, flux.Ps):
        for h in e.handlers:
            yield from _all_conditions(h.body)
    else:
        yield from conditions(e)


def _all_fors(e):
    from . import flux

    if isinstance(e, flux.SimpleX):
        yield from _all_fors(e.expr)
    elif isinstance(e, flux.Ps):
        for h in e.handlers:
            yield from _all_fors(h.body)
    else:
        for sub in walk(e):
            if isinstance(sub, For):
                yield sub


def dependencies(y: str, e) -> tuple:
    """Child symbols of ``$y`` that ``e`` refers to, in order of first occurrence.

    A symbol counts if a condition path ``$y/a/...`` occurs in ``e`` or a
    for-loop iterates over ``$y/a/...``.  The result is an ordered tuple
    used as a set.
    """
    seen: dict[str, None] = {}
    for c in _all_conditions(e):
        for r in condition_refs(c):
            if r.var == y and r.path:
                seen.setdefault(r.path[0])
    for f in _all_fors(e):
        if f.source == y and f.path:
            seen.setdefault(f.path[0])
    return tuple(seen)


def contains_output_of(e, var: str) -> bool:
    """Whether ``{$var}`` is a subexpression of ``e``."""
    return any(isinstance(s, VarOut) and s.var == var for s in walk(e))


def binders(e) -> list[str]:
    return [s.var for s in walk(e) if isinstance(s, For)]


def subexpressions(e, position=(), parent=ROOT) -> Iterator[tuple]:
    """Yield ``(position, subexpression, parent variable)`` in pre-order.

    The parent variable is the variable bound by the nearest enclosing
    binder, or ``ROOT``.
    """
    yield position, e, parent
    inner = e.var if isinstance(e, For) else parent
    for i, c in enumerate(children(e)):
        yield from subexpressions(c, position + (i,), inner)


def subexpression_at(e, position):
    for i in position:
        e = children(e)[i]
    return e


def parent_var(position: tuple, q) -> str:
    """Variable of the nearest binder strictly enclosing ``position`` in ``q``."""
    parent = ROOT
    node = q
    for i in position:
        if isinstance(node, For):
            parent = node.var
        node = children(node)[i]
    return parent


def size(e) -> int:
    return len(to_text(e))


# --------------------------------------------------------------------------
# serialization


def _var(v: str) -> str:
    return "$" + v


def _path(var: str, path: tuple) -> str:
    return "/".join((_var(var),) + tuple(path))


def _literal(s: str) -> str:
    if re.fullmatch(r"-?\d+(\.\d+)?", s):
        return s
    if '"' in s:
        return "'" + s + "'"
    return '"' + s + '"'


def cond_to_text(c: Condition, prec: int = 0) -> str:
    if isinstance(c, TrueCond):
        return "true()"
    if isinstance(c, Exists):
        return f"exists({c.ref})"
    if isinstance(c, Compare):
        rhs = str(c.rhs) if c.is_join else _literal(c.rhs)
        return f"{c.lhs} {c.op} {rhs}"
    if isinstance(c, Not):
        return f"not({cond_to_text(c.operand)})"
    if isinstance(c, And):
        text = f"{cond_to_text(c.left, 2)} and {cond_to_text(c.right, 3)}"
        return f"({text})" if prec > 2 else text
    if isinstance(c, Or):
        text = f"{cond_to_text(c.left, 1)} or {cond_to_text(c.right, 2)}"
        return f"({text})" if prec > 1 else text
    raise TypeError(f"not a condition: {c!r}")


def _escape_braces(text: str) -> str:
    return text.replace("{", "{{").replace("}", "}}")


def to_text(e, reserved: str = "") -> str:
    """Concrete syntax of ``e``; ``reserved`` holds terminator characters of
    the enclosing context that literal text must not contain unprotected."""
    parts = []
    prev_str = False
    for item in seq_items(e) if not isinstance(e, Empty) else ():
        if isinstance(item, Str):
            text = _escape_braces(item.text)
            risky = (
                prev_str
                or not parts and text.lstrip().startswith("$")
                or any(ch in text for ch in reserved)
            )
            parts.append("{ {} " + text + " }" if risky else text)
            prev_str = True
            continue
        prev_str = False
        parts.append(_block(item))
    if isinstance(e, Empty) or not parts:
        return "{}"
    return " ".join(parts)


def _body(e) -> str:
    return to_text(e)


def _block(e) -> str:
    if isinstance(e, For):
        where = f" where {cond_to_text(e.where)}" if e.where is not None else ""
        return f"{{ for {_var(e.var)} in {_path(e.source, e.path)}{where} return {_body(e.body)} }}"
    if isinstance(e, If):
        return f"{{ if {cond_to_text(e.cond)} then {_body(e.body)} }}"
    if isinstance(e, PathOut):
        return "{" + _path(e.var, e.path) + "}"
    if isinstance(e, VarOut):
        return "{" + _var(e.var) + "}"
    if isinstance(e, Empty):
        return "{}"
    raise TypeError(f"unexpected item {e!r}")


# --------------------------------------------------------------------------
# parsing

_NAME = r"[A-Za-z_][-A-Za-z0-9_.]*"
_VAR_RE = re.compile(r"\$([A-Za-z_][A-Za-z0-9_]*)")
_NAME_RE = re.compile(_NAME)
_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")
_ELSE_RE = re.compile(r"(?:^|\s)else(?:\s|$)")


class XQueryParser:
    """Recursive-descent parser for XQuery- concrete syntax.

    Subclassed by the FluX parser, which adds ``process-stream`` blocks.
    """

    def __init__(self, text: str, rename: bool = True):
        self.text = text
        self.pos = 0
        self.rename = rename
        self.scopes: list[dict] = [{ROOT: ROOT}]
        self.used: set[str] = {ROOT}

    # -- helpers -----------------------------------------------------------

    def error(self, msg: str, cls=QuerySyntaxError):
        raise cls(msg, self.text, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self, n: int = 1) -> str:
        return self.text[self.pos:self.pos + n]

    def expect(self, s: str):
        self.skip_ws()
        if not self.text.startswith(s, self.pos):
            self.error(f"expected {s!r}")
        self.pos += len(s)

    def keyword(self, word: str) -> bool:
        """Consume ``word`` if it is the next token (word-bounded)."""
        self.skip_ws()
        end = self.pos + len(word)
        if self.text.startswith(word, self.pos) and (
            end >= len(self.text) or not (self.text[end].isalnum() or self.text[end] in "_-")
        ):
            self.pos = end
            return True
        return False

    def lookup(self, name: str) -> str:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        self.error(f"variable ${name} is not in scope", ScopeError_)

    def bind(self, name: str) -> str:
        if name == ROOT:
            self.error("$ROOT cannot be rebound")
        fresh = name
        if self.rename:
            n = 2
            while fresh in self.used:
                fresh = f"{name}_{n}"
                n += 1
        self.used.add(fresh)
        self.scopes.append({name: fresh})
        return fresh

    def unbind(self):
        self.scopes.pop()

    # -- entry points --------------------------------------------------------

    def parse_query(self) -> XQueryExpr:
        e = self.sequence(terminators="")
        if not self.at_end():
            self.error("unexpected input")
        return e

    # -- sequences -----------------------------------------------------------

    def sequence(self, terminators: str, body: bool = False) -> XQueryExpr:
        items = []
        if body:
            self.skip_ws()
            if self.peek() == "$":
                items.append(self.path_output())
        buf = []
        while not self.at_end():
            ch = self.text[self.pos]
            if ch in terminators:
                break
            if ch == "{" and self.peek(2) == "{{":
                buf.append("{")
                self.pos += 2
            elif ch == "}" and self.peek(2) == "}}":
                buf.append("}")
                self.pos += 2
            elif ch == "{":
                self._flush(buf, items)
                items.append(self.block())
            elif ch == "}":
                self.error("unbalanced '}'")
            else:
                buf.append(ch)
                self.pos += 1
        self._flush(buf, items)
        return self.make_sequence(items)

    def make_sequence(self, items):
        return sequence(*items)

    @staticmethod
    def _flush(buf, items):
        text = "".join(buf).strip()
        buf.clear()
        if text and text != "()":
            items.append(Str(text))

    def block(self):
        self.expect("{")
        self.skip_ws()
        start = self.pos
        if self.peek() == "}":
            self.pos += 1
            return Empty()
        e = self.block_keyword()
        if e is None:
            self.pos = start
            if self.peek() in ("$", "/"):
                e = self.path_output()
            else:
                e = self.sequence(terminators="}")
        self.expect("}")
        return e

    def block_keyword(self):
        if self.keyword("for"):
            return self.for_expr()
        if self.keyword("if"):
            return self.if_expr()
        for word in ("let", "order", "some", "every", "count", "element"):
            if self.keyword(word):
                self.error(f"unsupported construct {word!r}", UnsupportedConstruct)
        return None

    def path_output(self):
        ref = self.path_ref()
        return PathOut(ref.var, ref.path) if ref.path else VarOut(ref.var)

    # -- for / if --------------------------------------------------------------

    def for_expr(self):
        self.skip_ws()
        m = _VAR_RE.match(self.text, self.pos)
        if not m:
            self.error("expected variable after 'for'")
        self.pos = m.end()
        if not self.keyword("in"):
            self.error("expected 'in'")
        src = self.path_ref()
        if not src.path:
            self.error("for-loop needs a non-empty path")
        var = self.bind(m.group(1))
        where = None
        if self.keyword("where"):
            where = self.condition()
        for word in ("order", "stable", "let", "group", "count"):
            if self.keyword(word):
                self.error(f"unsupported FLWOR clause {word!r}", UnsupportedConstruct)
        if not self.keyword("return"):
            self.error("expected 'return'")
        body = self.sequence(terminators=self.body_terminators(), body=True)
        self.unbind()
        return For(var, src.var, src.path, body, where)

    def if_expr(self):
        cond = self.condition()
        if not self.keyword("then"):
            self.error("expected 'then'")
        body = self.sequence(terminators=self.body_terminators(), body=True)
        if self.keyword("else") or any(
                isinstance(it, Str) and _ELSE_RE.search(it.text) for it in seq_items(body)):
            self.error("'else' branches are not part of XQuery-", UnsupportedConstruct)
        return If(cond, body)

    def body_terminators(self) -> str:
        return "}"

    # -- paths -----------------------------------------------------------------

    def path_ref(self) -> PathRef:
        self.skip_ws()
        if self.peek() == "/":
            if self.peek(2) == "//":
                self.error("descendant axis '//' is not supported", UnsupportedConstruct)
            var = ROOT
        else:
            m = _VAR_RE.match(self.text, self.pos)
            if not m:
                self.error("expected a variable or absolute path")
            self.pos = m.end()
            var = self.lookup(m.group(1))
        steps = []
        while self.peek() == "/":
            if self.peek(2) == "//":
                self.error("descendant axis '//' is not supported", UnsupportedConstruct)
            self.pos += 1
            if self.peek() in ("*", "@"):
                self.error("wildcards and attributes are not supported", UnsupportedConstruct)
            m = _NAME_RE.match(self.text, self.pos)
            if not m:
                self.error("expected element name in path")
            if self.text.startswith("(", m.end()):
                self.error(f"function step {m.group()}() is not supported", UnsupportedConstruct)
            steps.append(m.group())
            self.pos = m.end()
        if self.peek() == "[":
            self.error("predicates are not supported", UnsupportedConstruct)
        return PathRef(var, tuple(steps))

    # -- conditions --------------------------------------------------------------

    def condition(self) -> Condition:
        left = self.cond_and()
        while self.keyword("or"):
            left = Or(left, self.cond_and())
        return left

    def cond_and(self) -> Condition:
        left = self.cond_unary()
        while self.keyword("and"):
            left = And(left, self.cond_unary())
        return left

    def cond_unary(self) -> Condition:
        self.skip_ws()
        if self.keyword("not"):
            return Not(self.cond_unary())
        if self.keyword("true"):
            self._optional_call_parens()
            return TrueCond()
        if self.keyword("exists"):
            return Exists(self._function_arg())
        if self.keyword("empty"):
            return Not(Exists(self._function_arg()))
        if self.peek() == "(":
            self.pos += 1
            c = self.condition()
            self.expect(")")
            return c
        return self.comparison()

    def _optional_call_parens(self):
        self.skip_ws()
        if self.peek(2) == "()":
            self.pos += 2

    def _function_arg(self) -> PathRef:
        self.skip_ws()
        if self.peek() == "(":
            self.pos += 1
            ref = self._condition_path()
            self.expect(")")
            return ref
        return self._condition_path()

    def _condition_path(self) -> PathRef:
        ref = self.path_ref()
        if not ref.path:
            self.error("condition paths need at least one step")
        return ref

    def comparison(self) -> Condition:
        self.skip_ws()
        literal_left = self._try_literal()
        if literal_left is not None:
            op = self.relop()
            rhs = self._condition_path()
            return Compare(rhs, _flip(op), literal_left)
        lhs = self._condition_path()
        op = self.relop()
        self.skip_ws()
        lit = self._try_literal()
        if lit is not None:
            return Compare(lhs, op, lit)
        if self.peek() == "(":
            self.error("arithmetic in conditions is not supported", UnsupportedConstruct)
        return Compare(lhs, op, self._condition_path())

    def _try_literal(self):
        ch = self.peek()
        if ch in ("'", '"'):
            end = self.text.find(ch, self.pos + 1)
            if end < 0:
                self.error("unterminated string literal")
            s = self.text[self.pos + 1:end]
            self.pos = end + 1
            return s
        m = _NUMBER_RE.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            self.skip_ws()
            if self.peek() == "*":
                self.error("arithmetic in conditions is not supported", UnsupportedConstruct)
            return m.group()
        return None

    def relop(self) -> str:
        self.skip_ws()
        for op, canon in (("<=", "<="), (">=", ">="), ("≤", "<="), ("≥", ">="),
                          ("=", "="), ("<", "<"), (">", ">")):
            if self.text.startswith(op, self.pos):
                self.pos += len(op)
                return canon
        if self.peek() in ("+", "-", "*") or self.keyword("div") or self.keyword("mod"):
            self.error("arithmetic in conditions is not supported", UnsupportedConstruct)
        if self.peek(2) == "!=":
            self.error("'!=' is not part of XQuery-", UnsupportedConstruct)
        self.error("expected a comparison operator")


def _flip(op: str) -> str:
    return {"<": ">", ">": "<", "<=": ">=", ">=": "<=", "=": "="}[op]


class ScopeError_(ScopeError, QuerySyntaxError):
    def __init__(self, message, text="", pos=None):
        QuerySyntaxError.__init__(self, message, text, pos)


def parse_xquery(text: str) -> XQueryExpr:
    """Parse an XQuery- query; rebinding a variable name renames it uniquely."""
    e = XQueryParser(text).parse_query()
    stray = free_vars(e) - {ROOT}
    if stray:
        raise ScopeError(f"query has free variables {sorted(stray)}")
    return e


def parse_condition(text: str, scope=()) -> Condition:
    p = XQueryParser(text)
    p.scopes.append({v: v for v in scope})
    c = p.condition()
    p.skip_ws()
    if not p.at_end():
        p.error("unexpected input after condition")
    return c
