"""Random DTDs, documents and queries shared by the property tests."""

from __future__ import annotations

import random

from fluxq.errors import NotOneUnambiguous
from fluxq.schema import Alt, Atom, Opt, Plus, Seq, Star, build_glushkov, parse_dtd

TEXTS = ("a", "b", "1", "2", "10")

# --------------------------------------------------------------------------
# regular expressions


def random_regex(rng: random.Random, alphabet, max_atoms: int = 6, depth: int = 0):
    n = rng.randint(1, max_atoms)
    return _regex(rng, list(alphabet), [n], depth)


def _regex(rng, alphabet, budget, depth):
    if budget[0] <= 1 or depth > 3 or rng.random() < 0.3:
        budget[0] -= 1
        r = Atom(rng.choice(alphabet))
    else:
        kind = rng.choice(("seq", "alt"))
        parts = []
        for _ in range(rng.randint(2, 3)):
            if budget[0] <= 0:
                break
            parts.append(_regex(rng, alphabet, budget, depth + 1))
        if len(parts) == 1:
            r = parts[0]
        else:
            r = Seq(tuple(parts)) if kind == "seq" else Alt(tuple(parts))
    roll = rng.random()
    if roll < 0.2:
        return Star(r)
    if roll < 0.3:
        return Plus(r)
    if roll < 0.4:
        return Opt(r)
    return r


def regex_matches(r, word) -> bool:
    """Whether ``word`` is in L(r), by computing reachable end positions.

    Polynomial in len(word), unlike backtracking matchers on nested stars.
    """
    from fluxq.schema import Epsilon

    n = len(word)
    memo = {}

    def ends(e, i) -> frozenset:
        key = (id(e), i)
        got = memo.get(key)
        if got is not None:
            return got
        if isinstance(e, Epsilon):
            out = {i}
        elif isinstance(e, Atom):
            out = {i + 1} if i < n and word[i] == e.symbol else set()
        elif isinstance(e, Seq):
            out = {i}
            for item in e.items:
                out = {k for j in out for k in ends(item, j)}
        elif isinstance(e, Alt):
            out = set().union(*(ends(item, i) for item in e.items))
        elif isinstance(e, Opt):
            out = {i} | ends(e.child, i)
        elif isinstance(e, (Star, Plus)):
            out = set(ends(e.child, i))
            todo = list(out)
            while todo:
                for k in ends(e.child, todo.pop()):
                    if k not in out:
                        out.add(k)
                        todo.append(k)
            if isinstance(e, Star):
                out.add(i)
        else:
            raise TypeError(e)
        memo[key] = out = frozenset(out)
        return out

    return n in ends(r, 0)


def bounded_language(r, max_len: int) -> set[str]:
    """All words of L(r) with at most ``max_len`` symbols, built from sets."""
    from fluxq.schema import Epsilon

    def cat(xs, ys):
        by_len = [[] for _ in range(max_len + 1)]
        for y in ys:
            by_len[len(y)].append(y)
        return {x + y for x in xs for k in range(max_len - len(x) + 1) for y in by_len[k]}

    def closure(base):
        base = base - {""}
        out, frontier = {""}, {""}
        while frontier:
            frontier = cat(frontier, base) - out
            out |= frontier
        return out

    if isinstance(r, Epsilon):
        return {""}
    if isinstance(r, Atom):
        return {r.symbol} if max_len >= 1 else set()
    if isinstance(r, Seq):
        out = {""}
        for item in r.items:
            out = cat(out, bounded_language(item, max_len))
        return out
    if isinstance(r, Alt):
        return set().union(*(bounded_language(i, max_len) for i in r.items))
    if isinstance(r, Opt):
        return {""} | bounded_language(r.child, max_len)
    if isinstance(r, Star):
        return closure(bounded_language(r.child, max_len))
    if isinstance(r, Plus):
        base = bounded_language(r.child, max_len)
        return cat(base, closure(base))
    raise TypeError(r)


def random_unambiguous_regex(rng, alphabet, max_atoms=6):
    while True:
        r = random_regex(rng, alphabet, max_atoms)
        try:
            build_glushkov(r, require_deterministic=True)
        except NotOneUnambiguous:
            continue
        return r


# --------------------------------------------------------------------------
# DTDs


def random_dtd(rng: random.Random, levels: int = 3, width: int = 3):
    """A layered, non-recursive DTD with one-unambiguous content models."""
    names = [["r"]]
    for lvl in range(1, levels + 1):
        names.append([f"{chr(ord('a') + i)}{lvl}" for i in range(width)])
    decls = []
    for lvl, layer in enumerate(names):
        for name in layer:
            if lvl == levels or (lvl > 0 and rng.random() < 0.25):
                decls.append(f"<!ELEMENT {name} (#PCDATA)>")
                continue
            kids = rng.sample(names[lvl + 1], rng.randint(1, width))
            r = random_unambiguous_regex(rng, kids, max_atoms=4)
            model = str(r)
            if not model.startswith("("):
                model = f"({model})"
            decls.append(f"<!ELEMENT {name} {model}>")
    return parse_dtd("\n".join(decls), root="r")


# --------------------------------------------------------------------------
# queries


class QueryGen:
    """Random XQuery- text whose paths follow the schema."""

    def __init__(self, dtd, rng: random.Random, max_depth: int = 3):
        self.dtd = dtd
        self.rng = rng
        self.max_depth = max_depth
        self.counter = 0

    def query(self) -> str:
        self.counter = 0
        return self.seq([("ROOT", "#document")], 0)

    def path(self, element, lo=1, hi=2):
        steps = []
        for _ in range(self.rng.randint(lo, hi)):
            kids = sorted(self.dtd.symb(element))
            if not kids:
                break
            element = self.rng.choice(kids)
            steps.append(element)
        return steps, element

    def seq(self, scope, depth) -> str:
        return " ".join(self.item(scope, depth) for _ in range(self.rng.randint(1, 3)))

    def item(self, scope, depth) -> str:
        rng = self.rng
        roll = rng.random()
        if depth >= self.max_depth:
            roll = 0.9 + roll * 0.1 if roll > 0.5 else roll * 0.3
        if roll < 0.1:
            return rng.choice(("w", "<e/>", "x y"))
        if roll < 0.3 and depth < self.max_depth:
            tag = f"t{rng.randint(0, 2)}"
            return f"<{tag}> {self.seq(scope, depth + 1)} </{tag}>"
        if roll < 0.6 and depth < self.max_depth:
            return self.for_expr(scope, depth)
        if roll < 0.75 and depth < self.max_depth:
            return "{ if " + self.cond(scope) + " then " + self.seq(scope, depth + 1) + " }"
        var, element = scope[-1] if rng.random() < 0.6 else rng.choice(scope)
        if var == "ROOT" or rng.random() < 0.5:
            steps, _ = self.path(element)
            if not steps:
                return "w"
            return "{$" + var + "/" + "/".join(steps) + "}"
        return "{$" + var + "}"

    def for_expr(self, scope, depth) -> str:
        rng = self.rng
        options = [(v, e) for v, e in scope if self.dtd.symb(e)]
        if not options:
            return "w"
        # prefer the innermost variable so most loops are streamable
        var, element = options[-1] if rng.random() < 0.7 else rng.choice(options)
        steps, target = self.path(element)
        self.counter += 1
        name = f"v{self.counter}"
        where = ""
        inner = scope + [(name, target)]
        if rng.random() < 0.3:
            where = " where " + self.cond(inner)
        body = self.seq(inner, depth + 1)
        return f"{{ for ${name} in ${var}/{'/'.join(steps)}{where} return {body} }}"

    def cond(self, scope, depth=0) -> str:
        rng = self.rng
        roll = rng.random()
        if depth < 2 and roll < 0.25:
            op = rng.choice(("and", "or"))
            return f"({self.cond(scope, depth + 1)} {op} {self.cond(scope, depth + 1)})"
        if depth < 2 and roll < 0.32:
            return f"not({self.cond(scope, depth + 1)})"
        if roll < 0.35:
            return "true()"
        ref = self.ref(scope)
        if ref is None:
            return "true()"
        roll = rng.random()
        if roll < 0.25:
            return f"{rng.choice(('exists', 'empty'))}({ref})"
        op = rng.choice(("=", "=", "<", ">", "<=", ">="))
        if roll < 0.55:
            other = self.ref(scope)
            if other is not None:
                return f"{ref} {op} {other}"
        lit = rng.choice(TEXTS)
        return f'{ref} {op} "{lit}"' if rng.random() < 0.7 or not lit.isdigit() else f"{ref} {op} {lit}"

    def ref(self, scope):
        var, element = self.rng.choice(scope)
        steps, _ = self.path(element, 1, 2)
        if not steps:
            return None
        return "$" + var + "/" + "/".join(steps)


def random_query(dtd, rng, max_depth=3) -> str:
    return QueryGen(dtd, rng, max_depth).query()


# --------------------------------------------------------------------------
# Brzozowski derivatives: a language oracle independent of the automaton


class _Void:
    """The empty language."""


VOID = _Void()


def derive(r, a):
    from fluxq.schema import Epsilon

    if r is VOID or isinstance(r, Epsilon):
        return VOID
    if isinstance(r, Atom):
        return Epsilon() if r.symbol == a else VOID
    if isinstance(r, Alt):
        parts = [d for d in (derive(i, a) for i in r.items) if d is not VOID]
        if not parts:
            return VOID
        return parts[0] if len(parts) == 1 else Alt(tuple(parts))
    if isinstance(r, Seq):
        head, rest = r.items[0], r.items[1:]
        tail = rest[0] if len(rest) == 1 else Seq(rest)
        first = derive(head, a)
        out = [] if first is VOID else [Seq((first, tail))]
        if nullable(head):
            d = derive(tail, a)
            if d is not VOID:
                out.append(d)
        if not out:
            return VOID
        return out[0] if len(out) == 1 else Alt(tuple(out))
    if isinstance(r, (Star, Plus)):
        d = derive(r.child, a)
        return VOID if d is VOID else Seq((d, Star(r.child)))
    if isinstance(r, Opt):
        return derive(r.child, a)
    raise TypeError(r)


def nullable(r) -> bool:
    from fluxq.schema import Epsilon

    if r is VOID or isinstance(r, Atom):
        return False
    if isinstance(r, (Epsilon, Star, Opt)):
        return True
    if isinstance(r, Plus):
        return nullable(r.child)
    if isinstance(r, Seq):
        return all(nullable(i) for i in r.items)
    if isinstance(r, Alt):
        return any(nullable(i) for i in r.items)
    raise TypeError(r)


def live_symbols(r) -> set:
    """Symbols occurring in some word of L(r)."""
    from fluxq.schema import Epsilon

    if r is VOID or isinstance(r, Epsilon):
        return set()
    if isinstance(r, Atom):
        return {r.symbol}
    if isinstance(r, Alt):
        return set().union(*(live_symbols(i) for i in r.items))
    if isinstance(r, Seq):
        if any(_empty_language(i) for i in r.items):
            return set()
        return set().union(*(live_symbols(i) for i in r.items))
    if isinstance(r, (Star, Plus, Opt)):
        return live_symbols(r.child)
    raise TypeError(r)


def _empty_language(r) -> bool:
    from fluxq.schema import Epsilon

    if r is VOID:
        return True
    if isinstance(r, (Epsilon, Atom, Star, Opt)):
        return False
    if isinstance(r, Plus):
        return _empty_language(r.child)
    if isinstance(r, Seq):
        return any(_empty_language(i) for i in r.items)
    if isinstance(r, Alt):
        return all(_empty_language(i) for i in r.items)
    raise TypeError(r)


def first_past_positions(r, word, symbols) -> int:
    """Index i (0..n) of the first prefix after which no symbol of
    ``symbols`` can occur any more, or n + 1 if that never happens."""
    current = r
    for i in range(len(word) + 1):
        if not (live_symbols(current) & set(symbols)):
            return i
        if i < len(word):
            current = derive(current, word[i])
    return len(word) + 1


def random_accepted_word(rng, r, max_len=10):
    """A random word of L(r) built by walking derivatives, or None."""
    word = []
    current = r
    alphabet = sorted(live_symbols(r))
    while True:
        options = [a for a in alphabet if derive(current, a) is not VOID
                   and not _empty_language(derive(current, a))]
        if nullable(current) and (not options or len(word) >= max_len or rng.random() < 0.3):
            return word
        if not options:
            return None
        a = rng.choice(options)
        word.append(a)
        current = derive(current, a)


def ord_oracle(g, a, b) -> bool:
    """Ord(a, b) by exploring accepted words of length <= 3 * |states|:
    false iff some accepted word has a ``b`` before an ``a``."""
    bound = 3 * len(g.states)
    # configuration: (state, phase) with phase 0 = no b yet, 1 = b read, 2 = a after b
    frontier = {(0, 0)}
    seen = set(frontier)
    for _ in range(bound):
        nxt = set()
        for q, phase in frontier:
            for sym, targets in g.transitions[q].items():
                ph = phase
                if ph == 1 and sym == a:
                    ph = 2
                if ph == 0 and sym == b:
                    ph = 1
                for p in targets:
                    if (p, ph) not in seen:
                        seen.add((p, ph))
                        nxt.add((p, ph))
        frontier = nxt
    return not any(q in g.finals and ph == 2 for q, ph in seen)
