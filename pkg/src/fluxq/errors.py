"""Exception hierarchy shared by all pipeline stages."""

from __future__ import annotations


class FluxqError(Exception):
    """Base class for every error raised by fluxq."""


class DtdSyntaxError(FluxqError):
    pass


class DtdError(FluxqError):
    """Semantically invalid DTD (duplicate or undeclared elements, mixed content)."""


class NotOneUnambiguous(FluxqError):
    def __init__(self, symbol: str, positions: tuple[int, ...]):
        self.symbol = symbol
        self.positions = positions
        super().__init__(
            f"content model is not one-unambiguous: symbol {symbol!r} "
            f"matches positions {list(positions)} from the same state"
        )


class ValidationError(FluxqError):
    def __init__(self, message: str, path: tuple[str, ...] = ()):
        self.path = path
        where = "/" + "/".join(path) if path else "<document>"
        super().__init__(f"{where}: {message}")


class QuerySyntaxError(FluxqError):
    def __init__(self, message: str, text: str = "", pos: int | None = None):
        self.pos = pos
        if pos is not None:
            line = text.count("\n", 0, pos) + 1
            col = pos - (text.rfind("\n", 0, pos) + 1) + 1
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)


class UnsupportedConstruct(QuerySyntaxError):
    pass


class ScopeError(FluxqError):
    """A variable is used outside the scope that binds it."""


class NotNormalForm(FluxqError):
    pass


class ElementNotInSchema(FluxqError):
    pass


class UnknownElement(FluxqError):
    pass


class UnsafeQuery(FluxqError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"FluX query is not safe: {lines}")


class XmlSyntaxError(FluxqError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class BufferMiss(FluxqError):
    """Evaluation dereferenced data that was never buffered.

    Indicates a bug in safety checking or projection, never a user error.
    """
