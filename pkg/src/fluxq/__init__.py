"""Schema-aware compilation of an XQuery fragment into streaming FluX plans."""

from .errors import FluxqError
from .flux import check_safety, parse_flux, serialize_flux
from .normalize import is_normal_form, normalize
from .projection import project
from .rewrite import compile_query, rewrite
from .schema import parse_dtd
from .xquery import parse_xquery

__all__ = [
    "FluxqError", "check_safety", "compile_query", "is_normal_form", "normalize",
    "parse_dtd", "parse_flux", "parse_xquery", "project", "rewrite", "serialize_flux",
]
__version__ = "0.1.0"
