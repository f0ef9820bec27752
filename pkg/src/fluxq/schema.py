"""DTD content models, Glushkov automata and the order constraints derived from them.

Every content model of a DTD is compiled into its Glushkov (position)
automaton.  States are integers: ``0`` is the initial state and state ``i``
is the i-th atom of the marked expression, so ``symbol_of[i]`` is the
``#`` projection.  From the automaton we derive

* ``Past(q, a)``: no ``a`` can be read any more after reaching ``q``;
* ``Ord(a, b)``: in no accepted word does a ``b`` precede an ``a``;
* ``PastTable`` for a set ``S``: per state, whether every symbol of ``S`` is past.

``Past`` looks at strict successors of ``q`` (paths of length >= 1).  The
symbol consumed to enter ``q`` is already behind us.
"""

from __future__ import annotations

import re
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Union

from .errors import DtdError, DtdSyntaxError, NotOneUnambiguous, ValidationError

#: pseudo element name of the document node; its content model is ``(root)``
DOCUMENT = "#document"


# --------------------------------------------------------------------------
# regular expressions


@dataclass(frozen=True)
class Epsilon:
    def __str__(self):
        return "EMPTY"


@dataclass(frozen=True)
class Atom:
    symbol: str
    index: int | None = None

    def __str__(self):
        return self.symbol if self.index is None else f"{self.symbol}{self.index}"


@dataclass(frozen=True)
class Seq:
    items: tuple

    def __str__(self):
        return "(" + ",".join(str(i) for i in self.items) + ")"


@dataclass(frozen=True)
class Alt:
    items: tuple

    def __str__(self):
        return "(" + "|".join(str(i) for i in self.items) + ")"


@dataclass(frozen=True)
class Star:
    child: "RegExpr"

    def __str__(self):
        return f"{_wrap(self.child)}*"


@dataclass(frozen=True)
class Plus:
    child: "RegExpr"

    def __str__(self):
        return f"{_wrap(self.child)}+"


@dataclass(frozen=True)
class Opt:
    child: "RegExpr"

    def __str__(self):
        return f"{_wrap(self.child)}?"


RegExpr = Union[Epsilon, Atom, Seq, Alt, Star, Plus, Opt]


def _wrap(r):
    return str(r) if isinstance(r, (Atom, Seq, Alt)) else f"({r})"


def seq(*items) -> RegExpr:
    """Build a sequence, flattening nested sequences and dropping epsilons."""
    flat = []
    for it in items:
        if isinstance(it, Seq):
            flat.extend(it.items)
        elif not isinstance(it, Epsilon):
            flat.append(it)
    if not flat:
        return Epsilon()
    if len(flat) == 1:
        return flat[0]
    return Seq(tuple(flat))


def alt(*items) -> RegExpr:
    flat = []
    for it in items:
        flat.extend(it.items if isinstance(it, Alt) else [it])
    if len(flat) == 1:
        return flat[0]
    return Alt(tuple(flat))


def symbols(r: RegExpr) -> frozenset[str]:
    """symb(r): the atomic symbols occurring in ``r``."""
    return frozenset(a.symbol for a in _atoms(r))


def _atoms(r):
    if isinstance(r, Atom):
        yield r
    elif isinstance(r, (Seq, Alt)):
        for it in r.items:
            yield from _atoms(it)
    elif isinstance(r, (Star, Plus, Opt)):
        yield from _atoms(r.child)


def mark(r: RegExpr) -> RegExpr:
    """Number the atoms of ``r`` 1..k from left to right."""
    counter = iter(range(1, 1 << 62))

    def go(e):
        if isinstance(e, Atom):
            return Atom(e.symbol, next(counter))
        if isinstance(e, Seq):
            return Seq(tuple(go(i) for i in e.items))
        if isinstance(e, Alt):
            return Alt(tuple(go(i) for i in e.items))
        if isinstance(e, (Star, Plus, Opt)):
            return type(e)(go(e.child))
        return e

    return go(r)


def unmark(r: RegExpr) -> RegExpr:
    """The ``#`` operation: drop position indices."""
    if isinstance(r, Atom):
        return Atom(r.symbol)
    if isinstance(r, (Seq, Alt)):
        return type(r)(tuple(unmark(i) for i in r.items))
    if isinstance(r, (Star, Plus, Opt)):
        return type(r)(unmark(r.child))
    return r


# --------------------------------------------------------------------------
# content model parsing

_NAME = r"[A-Za-z_:][-A-Za-z0-9_.:]*"
_MODEL_TOKEN = re.compile(rf"\s*(?:(#PCDATA)|({_NAME})|([(),|*+?]))")


def parse_content_model(text: str) -> RegExpr:
    """Parse a content model such as ``(title,(author+|editor+),price)``.

    ``,`` binds tighter than ``|``; postfix operators bind tightest.
    """
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _MODEL_TOKEN.match(text, pos)
        if not m:
            raise DtdSyntaxError(f"unexpected character in content model {text!r} at {pos}")
        tokens.append(m.group(1) or m.group(2) or m.group(3))
        pos = m.end()
    if "#PCDATA" in tokens:
        raise DtdError(f"mixed content is not supported: {text!r}")
    parser = _ModelParser(tokens, text)
    r = parser.alternation()
    if parser.i != len(tokens):
        raise DtdSyntaxError(f"trailing tokens in content model {text!r}")
    return r


class _ModelParser:
    def __init__(self, tokens, text):
        self.tokens = tokens
        self.text = text
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise DtdSyntaxError(
                f"expected {expected or 'token'} in content model {self.text!r}, got {tok!r}"
            )
        self.i += 1
        return tok

    def alternation(self):
        items = [self.sequence()]
        while self.peek() == "|":
            self.take()
            items.append(self.sequence())
        return alt(*items)

    def sequence(self):
        items = [self.postfix()]
        while self.peek() == ",":
            self.take()
            items.append(self.postfix())
        if len(items) == 1:
            return items[0]
        return Seq(tuple(items))

    def postfix(self):
        tok = self.peek()
        if tok == "(":
            self.take()
            if self.peek() == ")":
                raise DtdSyntaxError(f"empty group in content model {self.text!r}")
            e = self.alternation()
            self.take(")")
        elif tok is not None and tok not in "(),|*+?":
            e = Atom(self.take())
        else:
            raise DtdSyntaxError(f"unbalanced parentheses or misplaced operator in {self.text!r}")
        while self.peek() in ("*", "+", "?"):
            op = self.take()
            e = {"*": Star, "+": Plus, "?": Opt}[op](e)
        return e


# --------------------------------------------------------------------------
# Glushkov automata


@dataclass(frozen=True)
class GlushkovAutomaton:
    """Position automaton of a content model.

    ``transitions[q][a]`` is the tuple of target states; it has length one
    everywhere when the source expression is one-unambiguous.
    """

    symbol_of: tuple  # index 0 (q0) carries None
    transitions: tuple  # per state: dict symbol -> tuple of states
    finals: frozenset
    deterministic: bool
    expression: RegExpr = field(compare=False)

    @property
    def states(self) -> range:
        return range(len(self.symbol_of))

    @property
    def alphabet(self) -> frozenset[str]:
        return frozenset(s for s in self.symbol_of[1:])

    def state_name(self, q: int) -> str:
        return "q0" if q == 0 else f"{self.symbol_of[q]}{q}"

    def step(self, q: int, symbol: str) -> int | None:
        targets = self.transitions[q].get(symbol)
        if not targets:
            return None
        if len(targets) > 1:
            raise NotOneUnambiguous(symbol, targets)
        return targets[0]

    def accepts(self, word: Iterable[str]) -> bool:
        current = {0}
        for sym in word:
            current = {p for q in current for p in self.transitions[q].get(sym, ())}
            if not current:
                return False
        return bool(current & self.finals)

    def successors(self) -> list[frozenset]:
        """States reachable from each state by paths of length >= 1."""
        out = []
        for q in self.states:
            seen = set()
            todo = deque(p for ts in self.transitions[q].values() for p in ts)
            while todo:
                p = todo.popleft()
                if p in seen:
                    continue
                seen.add(p)
                todo.extend(r for ts in self.transitions[p].values() for r in ts)
            out.append(frozenset(seen))
        return out


def _analyse(r, first_pos=1):
    """Return (nullable, first, last, follow-pairs, next position)."""
    if isinstance(r, Epsilon):
        return True, frozenset(), frozenset(), [], first_pos
    if isinstance(r, Atom):
        p = frozenset([first_pos])
        return False, p, p, [], first_pos + 1
    if isinstance(r, Seq):
        nullable, first, last, follow = True, frozenset(), frozenset(), []
        pos = first_pos
        for it in r.items:
            n2, f2, l2, fo2, pos = _analyse(it, pos)
            follow.extend(fo2)
            follow.append((last, f2))
            first = first | f2 if nullable else first
            last = l2 | last if n2 else l2
            nullable = nullable and n2
        return nullable, first, last, follow, pos
    if isinstance(r, Alt):
        nullable, first, last, follow = False, frozenset(), frozenset(), []
        pos = first_pos
        for it in r.items:
            n2, f2, l2, fo2, pos = _analyse(it, pos)
            nullable = nullable or n2
            first |= f2
            last |= l2
            follow.extend(fo2)
        return nullable, first, last, follow, pos
    if isinstance(r, (Star, Plus)):
        n, f, l, fo, pos = _analyse(r.child, first_pos)
        # Plus(x) behaves like Seq(x, Star(x)) without renumbering atoms
        return (True if isinstance(r, Star) else n), f, l, fo + [(l, f)], pos
    if isinstance(r, Opt):
        n, f, l, fo, pos = _analyse(r.child, first_pos)
        return True, f, l, fo, pos
    raise TypeError(f"not a regular expression: {r!r}")


def build_glushkov(r: RegExpr, require_deterministic: bool = True) -> GlushkovAutomaton:
    """Construct the Glushkov automaton of ``r``.

    Raises :class:`NotOneUnambiguous` if two positions carrying the same
    symbol are reachable from one state, unless ``require_deterministic`` is
    false, in which case the (nondeterministic) position automaton is returned.
    """
    marked = mark(r)
    atoms = list(_atoms(marked))
    symbol_of = (None,) + tuple(a.symbol for a in atoms)
    nullable, first, last, follow_pairs, _ = _analyse(marked)
    follow = [set() for _ in symbol_of]
    follow[0] = set(first)
    for lasts, firsts in follow_pairs:
        for p in lasts:
            follow[p] |= firsts
    transitions = []
    deterministic = True
    for q, targets in enumerate(follow):
        table: dict[str, tuple] = {}
        for p in sorted(targets):
            table[symbol_of[p]] = table.get(symbol_of[p], ()) + (p,)
        for sym, ps in table.items():
            if len(ps) > 1:
                deterministic = False
                if require_deterministic:
                    raise NotOneUnambiguous(sym, ps)
        transitions.append(table)
    finals = set(last)
    if nullable:
        finals.add(0)
    return GlushkovAutomaton(symbol_of, tuple(transitions), frozenset(finals), deterministic, r)


# --------------------------------------------------------------------------
# Past / Ord / PastTable


@dataclass(frozen=True)
class PastRelation:
    """Past(q, a) for a Glushkov automaton; symbols outside symb(rho) are always past."""

    automaton: GlushkovAutomaton
    future: tuple  # per state: frozenset of symbols still readable

    def holds(self, q: int, symbol: str) -> bool:
        return symbol not in self.future[q]

    def pairs(self) -> frozenset[tuple[int, str]]:
        alphabet = self.automaton.alphabet
        return frozenset(
            (q, a) for q in self.automaton.states for a in alphabet if self.holds(q, a)
        )


def past_relation(g: GlushkovAutomaton) -> PastRelation:
    future = tuple(frozenset(g.symbol_of[p] for p in succ) for succ in g.successors())
    return PastRelation(g, future)


@dataclass(frozen=True)
class OrdRelation:
    """Ord(a, b): every ``a`` precedes every ``b`` in all accepted words."""

    alphabet: frozenset
    pairs: frozenset

    def holds(self, a: str, b: str) -> bool:
        if a not in self.alphabet or b not in self.alphabet:
            return True  # vacuous: one of them never occurs
        return (a, b) in self.pairs

    def __contains__(self, pair) -> bool:
        return self.holds(*pair)


def ord_relation(g: GlushkovAutomaton, past: PastRelation | None = None) -> OrdRelation:
    past = past or past_relation(g)
    alphabet = g.alphabet
    pairs = set()
    for a in alphabet:
        for b in alphabet:
            if all(past.holds(q, a) for q in g.states if g.symbol_of[q] == b):
                pairs.add((a, b))
    return OrdRelation(alphabet, frozenset(pairs))


@dataclass(frozen=True)
class PastTable:
    set_id: object
    symbols: frozenset
    table: tuple  # per state: bool

    def __call__(self, q: int) -> bool:
        return self.table[q]


def make_past_table(g: GlushkovAutomaton, symbols_: Iterable[str], set_id=None,
                    past: PastRelation | None = None) -> PastTable:
    past = past or past_relation(g)
    s = frozenset(symbols_)
    table = tuple(all(past.holds(q, a) for a in s) for q in g.states)
    return PastTable(set_id if set_id is not None else s, s, table)


# --------------------------------------------------------------------------
# incremental validation with first-past detection


@dataclass
class ValidatorState:
    current: int = 0
    fired: dict = field(default_factory=dict)
    length: int = 0


def validator_start(g: GlushkovAutomaton, tables: list[PastTable]) -> tuple[ValidatorState, list]:
    """Initial state; tables already true at q0 fire at word position 0."""
    v = ValidatorState()
    fired = []
    for t in tables:
        now = t(0)
        v.fired[t.set_id] = now
        if now:
            fired.append(t.set_id)
    return v, fired


def validator_step(v: ValidatorState, g: GlushkovAutomaton, tables: list[PastTable],
                   symbol: str) -> tuple[ValidatorState, list]:
    target = g.step(v.current, symbol)
    if target is None:
        raise ValidationError(
            f"child {symbol!r} not allowed after {v.length} children (state {g.state_name(v.current)})"
        )
    old = v.current
    fired_now = []
    for t in tables:
        if t(target) and not t(old) and not v.fired.get(t.set_id, False):
            v.fired[t.set_id] = True
            fired_now.append(t.set_id)
    v.current = target
    v.length += 1
    return v, fired_now


def validator_finish(v: ValidatorState, g: GlushkovAutomaton) -> None:
    if v.current not in g.finals:
        raise ValidationError(
            f"children sequence incomplete (stopped in state {g.state_name(v.current)}, "
            f"content model {g.expression})"
        )


# --------------------------------------------------------------------------
# DTDs

_COMMENT = re.compile(r"<!--.*?-->", re.S)
_DECL = re.compile(r"<!(\w+)\s+(.*?)>", re.S)
_ELEMENT_BODY = re.compile(rf"({_NAME})\s+(.*)$", re.S)


class Dtd:
    """A local tree grammar: one content model per element name."""

    def __init__(self, root: str, productions: dict, text_only: Iterable[str] = ()):
        if root not in productions:
            raise DtdError(f"root element {root!r} is not declared")
        self.root = root
        self.productions = dict(productions)
        self.text_only = frozenset(text_only)
        self._automata: dict = {}
        self._past: dict = {}
        self._ord: dict = {}

    def __repr__(self):
        return f"Dtd(root={self.root!r}, elements={sorted(self.productions)})"

    @property
    def elements(self) -> frozenset[str]:
        return frozenset(self.productions)

    def production(self, element: str) -> RegExpr:
        if element == DOCUMENT:
            return Atom(self.root)
        try:
            return self.productions[element]
        except KeyError:
            raise DtdError(f"element {element!r} is not declared") from None

    def has(self, element: str) -> bool:
        return element == DOCUMENT or element in self.productions

    def symb(self, element: str) -> frozenset[str]:
        if not self.has(element):
            return frozenset()
        return symbols(self.production(element))

    def automaton(self, element: str, require_deterministic: bool = True) -> GlushkovAutomaton:
        key = (element, require_deterministic)
        g = self._automata.get(key)
        if g is None:
            g = build_glushkov(self.production(element), require_deterministic)
            self._automata[key] = g
        return g

    def past(self, element: str) -> PastRelation:
        p = self._past.get(element)
        if p is None:
            p = self._past[element] = past_relation(self.automaton(element, False))
        return p

    def ord(self, element: str) -> OrdRelation:
        """Order constraints of ``element``; undeclared elements have none to violate."""
        o = self._ord.get(element)
        if o is None:
            if not self.has(element):
                o = OrdRelation(frozenset(), frozenset())
            else:
                g = self.automaton(element, False)
                o = ord_relation(g, self.past(element))
            self._ord[element] = o
        return o

    def past_table(self, element: str, symbols_: Iterable[str], set_id=None) -> PastTable:
        g = self.automaton(element)
        return make_past_table(g, symbols_, set_id, self.past(element))

    def with_root(self, root: str) -> "Dtd":
        return Dtd(root, self.productions, self.text_only)


def parse_dtd(text: str, root: str | None = None, strict: bool = True) -> Dtd:
    """Parse ``<!ELEMENT ...>`` declarations.

    The first declared element is the root unless ``root`` is given.
    References to undeclared elements raise :class:`DtdError` when
    ``strict``; otherwise they warn and are treated as text-only elements.
    """
    body = _COMMENT.sub(" ", text)
    productions: dict[str, RegExpr] = {}
    text_only: set[str] = set()
    order = []
    pos = 0
    for m in _DECL.finditer(body):
        gap = body[pos:m.start()].strip()
        if gap:
            raise DtdSyntaxError(f"unexpected text in DTD: {gap[:40]!r}")
        pos = m.end()
        kind, rest = m.group(1), m.group(2).strip()
        if kind != "ELEMENT":
            warnings.warn(f"ignoring <!{kind} ...> declaration", stacklevel=2)
            continue
        em = _ELEMENT_BODY.match(rest)
        if not em:
            raise DtdSyntaxError(f"malformed ELEMENT declaration: {rest!r}")
        name, model = em.group(1), em.group(2).strip()
        if name in productions:
            raise DtdError(f"duplicate ELEMENT declaration for {name!r}")
        if model == "EMPTY":
            productions[name] = Epsilon()
        elif re.fullmatch(r"\(\s*#PCDATA\s*\)\*?", model):
            productions[name] = Epsilon()
            text_only.add(name)
        elif model == "ANY":
            raise DtdError(f"ANY content model of {name!r} is not supported")
        else:
            productions[name] = parse_content_model(model)
        order.append(name)
    tail = body[pos:].strip()
    if tail:
        raise DtdSyntaxError(f"unexpected text in DTD: {tail[:40]!r}")
    if not order:
        raise DtdSyntaxError("DTD declares no elements")
    for name, model in list(productions.items()):
        for sym in sorted(symbols(model)):
            if sym not in productions:
                if strict:
                    raise DtdError(f"content model of {name!r} references undeclared element {sym!r}")
                warnings.warn(f"undeclared element {sym!r} treated as text-only", stacklevel=2)
                productions[sym] = Epsilon()
                text_only.add(sym)
    return Dtd(root or order[0], productions, text_only)
