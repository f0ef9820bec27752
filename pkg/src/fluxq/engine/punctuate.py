"""Validation against the DTD with first-past punctuation.

Every open element keeps the state of its content model's Glushkov
automaton.  Registered past-sets are checked with one table lookup per
child; when a set becomes past, a punctuation event
``(PAST, (element, set_ids, position))`` is injected:

* position 0 right after the element's start tag,
* position i just before the start tag of the i-th child,
* position n+1 just before the end tag, for sets that never fired.
"""

from __future__ import annotations

from ..errors import ValidationError
from ..schema import DOCUMENT, Dtd, validator_finish, validator_start, validator_step
from .events import END, PAST, START, TEXT


class Punctuator:
    def __init__(self, dtd: Dtd, registrations: dict | None = None):
        self.dtd = dtd
        self.registrations = registrations or {}
        self._tables: dict = {}

    def tables(self, element: str) -> list:
        t = self._tables.get(element)
        if t is None:
            t = [self.dtd.past_table(element, syms, set_id)
                 for set_id, syms in self.registrations.get(element, ())]
            self._tables[element] = t
        return t

    def _open(self, element, path):
        if not self.dtd.has(element):
            raise ValidationError(f"undeclared element {element!r}", tuple(path))
        g = self.dtd.automaton(element)
        tables = self.tables(element)
        state, fired = validator_start(g, tables)
        return [element, g, tables, state], fired

    def run(self, events):
        dtd = self.dtd
        path: list[str] = []
        doc, fired = self._open(DOCUMENT, path)
        stack = [doc]
        if fired:
            yield PAST, (DOCUMENT, tuple(fired), 0)
        for ev in events:
            kind = ev[0]
            if kind == START:
                tag = ev[1]
                frame = stack[-1]
                try:
                    _, fired = validator_step(frame[3], frame[1], frame[2], tag)
                except ValidationError as exc:
                    raise ValidationError(f"in {frame[0]!r}: {exc}", tuple(path)) from None
                if fired:
                    yield PAST, (frame[0], tuple(fired), frame[3].length)
                path.append(tag)
                child, fired = self._open(tag, path)
                stack.append(child)
                yield ev
                if fired:
                    yield PAST, (tag, tuple(fired), 0)
            elif kind == END:
                frame = stack.pop()
                yield from self._close(frame, path)
                path.pop()
                yield ev
            elif kind == TEXT:
                element = stack[-1][0]
                if element in dtd.text_only:
                    yield ev
                elif ev[1].strip():
                    raise ValidationError(
                        f"character data not allowed in {element!r}", tuple(path))
            else:
                yield ev
        if len(stack) != 1:
            raise ValidationError("document ended inside an element", tuple(path))
        if stack[0][3].length == 0:
            raise ValidationError("document has no root element")
        yield from self._close(stack[0], path)

    def _close(self, frame, path):
        element, g, tables, state = frame
        try:
            validator_finish(state, g)
        except ValidationError as exc:
            raise ValidationError(f"in {element!r}: {exc}", tuple(path)) from None
        rest = tuple(t.set_id for t in tables if not state.fired.get(t.set_id, False))
        if rest:
            yield PAST, (element, rest, state.length + 1)


def validate_and_punctuate(events, dtd: Dtd, registrations: dict | None = None):
    """Validate ``events`` and inject first-past punctuation.

    ``registrations`` maps an element name to a list of ``(set_id, symbols)``.
    """
    return Punctuator(dtd, registrations).run(events)
