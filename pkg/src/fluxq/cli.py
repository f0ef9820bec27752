"""Command-line interface: ``fluxq analyze|compile|run|gen``."""

from __future__ import annotations

import argparse
import os
import sys
import warnings

from .errors import (
    BufferMiss, ElementNotInSchema, FluxqError, UnknownElement, UnsafeQuery,
)
from .flux import check_safety, fold_prefix_suffix, serialize_flux
from .normalize import normalize
from .projection import project
from .rewrite import rewrite
from .schema import Dtd, parse_dtd
from .xquery import parse_xquery, to_text

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_SAFETY, EXIT_MISMATCH = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_text(path: str, what: str) -> str:
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise UsageError(f"cannot read {what} {path!r}: {e.strerror}") from None


def load_dtd(spec: str, root: str | None = None) -> Dtd:
    """A DTD from a file, or ``builtin:bib`` / ``builtin:auction``."""
    from .engine.datagen import builtin_dtd

    if spec.startswith("builtin:"):
        try:
            dtd = builtin_dtd(spec.split(":", 1)[1])
        except ValueError as e:
            raise UsageError(str(e)) from None
        return dtd.with_root(root) if root else dtd
    return parse_dtd(_read_text(spec, "DTD"), root=root)


def _query_text(args) -> str:
    if args.query_text is not None:
        return args.query_text
    if args.query is None:
        raise UsageError("one of --query or --query-text is required")
    return _read_text(args.query, "query")


class Stage:
    """Prefixes errors with the pipeline stage that raised them."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        if isinstance(exc, FluxqError) and not getattr(exc, "stage", None):
            exc.stage = self.name
        return False


def compile_stages(args, dtd: Dtd):
    with Stage("parse"):
        q = parse_xquery(_query_text(args))
    with Stage("normalize"):
        nf, _ = normalize(q)
    with Stage("rewrite"):
        f = rewrite(nf, dtd, allow_dead_loops=args.allow_dead_loops)
    with Stage("safety"):
        violations = check_safety(f, dtd, allow_dead_loops=args.allow_dead_loops)
        if violations:
            raise UnsafeQuery(violations)
    if getattr(args, "fold", False):
        f = fold_prefix_suffix(f)
    return q, nf, f


# --------------------------------------------------------------------------
# subcommands


def cmd_analyze(args, out) -> int:
    dtd = load_dtd(args.dtd, args.root)
    if args.element:
        if args.element not in dtd.productions:
            raise UsageError(f"element {args.element!r} is not declared")
        elements = [args.element]
    else:
        elements = sorted(dtd.productions)
    for name in elements:
        out.write(analyze_element(dtd, name))
    return EXIT_OK


def analyze_element(dtd: Dtd, name: str) -> str:
    g = dtd.automaton(name, require_deterministic=False)
    lines = [f"element {name}: {'(#PCDATA)' if name in dtd.text_only else dtd.production(name)}"]
    if not g.alphabet:
        lines.append("  no element children; Ord is empty")
        return "\n".join(lines) + "\n\n"
    lines.append(f"  one-unambiguous: {'yes' if g.deterministic else 'no'}")
    ordr = dtd.ord(name)
    pairs = sorted(ordr.pairs)
    lines.append(f"  order constraints ({len(pairs)}):")
    lines.extend(f"    Ord({a}, {b})" for a, b in pairs)
    past = dtd.past(name)
    alphabet = sorted(g.alphabet)
    lines.append("  past per state:")
    for q in g.states:
        gone = [a for a in alphabet if past.holds(q, a)]
        final = " final" if q in g.finals else ""
        lines.append(f"    {g.state_name(q)}{final}: past {{{', '.join(gone)}}}")
    return "\n".join(lines) + "\n\n"


def cmd_compile(args, out) -> int:
    dtd = load_dtd(args.dtd, args.root)
    _, nf, f = compile_stages(args, dtd)
    if args.dump_normal_form:
        out.write("-- normal form --\n" + to_text(nf) + "\n-- flux --\n")
    out.write(serialize_flux(f) + "\n")
    if args.dump_buffer_trees:
        out.write("-- buffer trees --\n" + project(f).dump() + "\n")
    return EXIT_OK


def cmd_run(args, out) -> int:
    from .engine.evaluate import build_tree, reference_eval
    from .engine.events import tokenize
    from .engine.runtime import build_plan, run

    dtd = load_dtd(args.dtd, args.root)
    q, _, f = compile_stages(args, dtd)
    plan = build_plan(f, dtd)
    if args.oracle:
        data = _read_input(args.input)
        result = run(plan, data)
        expected = reference_eval(q, build_tree(tokenize(data), dtd))
        out.write(result.output)
        _emit_stats(args, result.stats)
        if result.output != expected:
            sys.stderr.write("MISMATCH: streaming output differs from the reference evaluator\n")
            return EXIT_MISMATCH
        sys.stderr.write("MATCH\n")
        return EXIT_OK
    if args.input == "-":
        source = sys.stdin.buffer
    else:
        try:
            source = open(args.input, "rb")
        except OSError as e:
            raise UsageError(f"cannot read input {args.input!r}: {e.strerror}") from None
    try:
        result = run(plan, source, out.write)
    finally:
        if source is not sys.stdin.buffer:
            source.close()
    _emit_stats(args, result.stats)
    return EXIT_OK


def _read_input(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise UsageError(f"cannot read input {path!r}: {e.strerror}") from None


def _emit_stats(args, stats):
    text = stats.to_json_lines() + "\n"
    if args.stats_file:
        with open(args.stats_file, "w", encoding="utf-8") as f:
            f.write(text)
    if args.stats:
        sys.stderr.write(text)


def cmd_gen(args, out) -> int:
    from .engine.datagen import generate_data

    if args.size < 0:
        raise UsageError("--size must be non-negative")
    try:
        data = generate_data(args.schema, args.size, args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    out.flush()
    sys.stdout.buffer.write(data)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fluxq", description="Schema-aware streaming XQuery evaluation via FluX.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def schema_args(sp):
        sp.add_argument("--dtd", required=True,
                        help="DTD file, or builtin:bib / builtin:auction")
        sp.add_argument("--root", help="override the document element")

    def query_args(sp):
        sp.add_argument("--query", help="file holding the XQuery")
        sp.add_argument("--query-text", help="the XQuery itself")
        sp.add_argument("--allow-dead-loops", action="store_true",
                        help="accept loops over elements the schema never allows")
        sp.add_argument("--fold", action="store_true",
                        help="fold leading/trailing constant handlers into process-stream text")

    a = sub.add_parser("analyze", help="print order constraints and past sets of a DTD")
    schema_args(a)
    a.add_argument("--element", help="only this production")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("compile", help="compile an XQuery into safe FluX")
    schema_args(c)
    query_args(c)
    c.add_argument("--dump-normal-form", action="store_true")
    c.add_argument("--dump-buffer-trees", action="store_true")
    c.set_defaults(func=cmd_compile)

    r = sub.add_parser("run", help="evaluate an XQuery over an XML stream")
    schema_args(r)
    query_args(r)
    r.add_argument("--input", required=True, help="XML file or - for standard input")
    r.add_argument("--stats", action="store_true", help="buffer statistics to stderr")
    r.add_argument("--stats-file", help="write buffer statistics to this file")
    r.add_argument("--oracle", action="store_true",
                   help="also evaluate on an in-memory tree and compare")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gen", help="generate a document for a built-in schema")
    g.add_argument("--schema", required=True, choices=("bib", "auction"))
    g.add_argument("--size", type=int, default=100_000, help="approximate size in bytes")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen)
    return p


def _show_warning(message, category, filename, lineno, file=None, line=None):
    sys.stderr.write(f"fluxq: warning: {message}\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = sys.stdout
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            return args.func(args, out)
    except UsageError as e:
        sys.stderr.write(f"fluxq: {e}\n")
        return EXIT_USAGE
    except (UnsafeQuery, UnknownElement) as e:
        sys.stderr.write(f"fluxq: safety: {e}\n")
        return EXIT_SAFETY
    except BufferMiss as e:
        sys.stderr.write(f"fluxq: internal error: {e}\n")
        return EXIT_SAFETY
    except ElementNotInSchema as e:
        sys.stderr.write(f"fluxq: rewrite: {e}\n")
        return EXIT_INPUT
    except FluxqError as e:
        stage = getattr(e, "stage", None)
        sys.stderr.write(f"fluxq: {stage + ': ' if stage else ''}{e}\n")
        return EXIT_INPUT
    except BrokenPipeError:
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
