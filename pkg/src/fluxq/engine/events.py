"""XML tokenization into start/end/text events.

Events are plain tuples ``(kind, payload)`` to keep the hot path cheap.
The data model has no attributes; text is merged, and whitespace-only
text is dropped unless it is the only content of its element.
"""

from __future__ import annotations

import io
from xml.parsers import expat

from ..errors import XmlSyntaxError

START, END, TEXT, PAST = 0, 1, 2, 3
KIND_NAMES = {START: "start", END: "end", TEXT: "text", PAST: "first-past"}

CHUNK = 1 << 16


def escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _open(source):
    if isinstance(source, (bytes, bytearray)):
        return io.BytesIO(source)
    if isinstance(source, str):
        return io.BytesIO(source.encode("utf-8"))
    return source


def tokenize(source):
    """Yield events for an XML document given as bytes, str or binary file."""
    stream = _open(source)
    parser = expat.ParserCreate()
    pending: list = []
    text: list[str] = []
    had_child: list[bool] = []

    def flush(closing: bool):
        if not text:
            return
        data = "".join(text)
        text.clear()
        if data.strip() or closing and not had_child[-1]:
            pending.append((TEXT, data))

    def start(name, attrs):
        if attrs:
            raise XmlSyntaxError(
                f"attribute on <{name}>: attributes are not part of the data model; "
                "encode them as child elements", parser.CurrentByteIndex)
        if had_child:
            flush(False)
            had_child[-1] = True
        pending.append((START, name))
        had_child.append(False)

    def end(name):
        flush(True)
        had_child.pop()
        pending.append((END, name))

    def chars(data):
        if had_child:
            text.append(data)

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    parser.buffer_text = True

    try:
        while True:
            chunk = stream.read(CHUNK)
            if isinstance(chunk, str):
                chunk = chunk.encode("utf-8")
            parser.Parse(chunk, not chunk)
            if pending:
                yield from pending
                pending.clear()
            if not chunk:
                break
    except expat.ExpatError as exc:
        raise XmlSyntaxError(expat.ErrorString(exc.code), parser.ErrorByteIndex) from None


def serialize_events(events) -> str:
    """Serialize start/end/text events; punctuation is skipped."""
    out = []
    for kind, payload in events:
        if kind == START:
            out.append(f"<{payload}>")
        elif kind == END:
            out.append(f"</{payload}>")
        elif kind == TEXT:
            out.append(escape(payload))
    return "".join(out)
