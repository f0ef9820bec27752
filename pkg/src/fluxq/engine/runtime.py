"""Streaming execution of safe FluX queries.

The driver pushes events through a stack of *frames*.  A frame is the list
of consumers interested in the children of the currently open element.
Each consumer implements::

    start_child(tag) -> list of consumers for the child's own children
    end_child(tag)
    text(data)
    first_past(payload)
    finish()            # the element whose children this frame covers ended

Process-stream evaluators realize the n+2-scan handler semantics in a
single pass; scope trackers fill per-variable buffers according to the
buffer trees; copiers stream subtrees straight to the output.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from ..errors import FluxqError, UnknownElement
from ..flux import On, OnFirstPast, Ps, SimpleX, ps_nodes
from ..projection import Projection, project
from ..schema import DOCUMENT, Dtd
from ..xquery import (
    If, PathOut, ROOT, VarOut, atoms, atom_refs, dependencies, seq_items, walk,
)
from .evaluate import Node, compare_values, eval_xquery, evaluate_condition
from .events import END, PAST, START, TEXT, escape, tokenize
from .punctuate import validate_and_punctuate


# --------------------------------------------------------------------------
# statistics


@dataclass
class VarStats:
    var: str
    events: int = 0
    bytes: int = 0
    items: int = 0
    events_hwm: int = 0
    bytes_hwm: int = 0
    items_hwm: int = 0
    fills: int = 0
    frees: int = 0

    def record(self) -> dict:
        return {"var": "$" + self.var, "events_hwm": self.events_hwm,
                "bytes_hwm": self.bytes_hwm, "items_hwm": self.items_hwm,
                "fills": self.fills, "frees": self.frees}


@dataclass
class BufferStats:
    per_var: dict = field(default_factory=dict)
    events: int = 0
    bytes: int = 0
    events_hwm: int = 0
    bytes_hwm: int = 0
    elapsed: float = 0.0

    def var(self, name: str) -> VarStats:
        s = self.per_var.get(name)
        if s is None:
            s = self.per_var[name] = VarStats(name)
        return s

    def total_record(self) -> dict:
        return {"var": "*total*", "events_hwm": self.events_hwm,
                "bytes_hwm": self.bytes_hwm,
                "items_hwm": sum(s.items_hwm for s in self.per_var.values()),
                "fills": sum(s.fills for s in self.per_var.values()),
                "frees": sum(s.frees for s in self.per_var.values())}

    def records(self) -> list[dict]:
        recs = [self.per_var[v].record() for v in sorted(self.per_var)]
        recs.append(self.total_record())
        recs.append({"elapsed_s": round(self.elapsed, 6)})
        return recs

    def to_json_lines(self) -> str:
        return "\n".join(json.dumps(r, sort_keys=True) for r in self.records())


class Scope:
    """The live buffer of one binding of a variable."""

    __slots__ = ("stats", "vs", "events", "bytes", "items")

    def __init__(self, stats: BufferStats, var: str):
        self.stats = stats
        self.vs = stats.var(var)
        self.vs.fills += 1
        self.events = self.bytes = self.items = 0

    def add(self, events: int, nbytes: int, items: int = 0):
        self.events += events
        self.bytes += nbytes
        self.items += items
        vs, st = self.vs, self.stats
        vs.events += events
        vs.bytes += nbytes
        vs.items += items
        if vs.events > vs.events_hwm:
            vs.events_hwm = vs.events
        if vs.bytes > vs.bytes_hwm:
            vs.bytes_hwm = vs.bytes
        if vs.items > vs.items_hwm:
            vs.items_hwm = vs.items
        st.events += events
        st.bytes += nbytes
        if st.events > st.events_hwm:
            st.events_hwm = st.events
        if st.bytes > st.bytes_hwm:
            st.bytes_hwm = st.bytes

    def free(self):
        vs, st = self.vs, self.stats
        vs.events -= self.events
        vs.bytes -= self.bytes
        vs.items -= self.items
        vs.frees += 1
        st.events -= self.events
        st.bytes -= self.bytes
        self.events = self.bytes = self.items = 0


def _tag_bytes(tag: str) -> int:
    return 2 * len(tag) + 5


# --------------------------------------------------------------------------
# output sinks


class Capture:
    """Holds output of a handler that must be emitted after earlier ones."""

    __slots__ = ("parts",)

    def __init__(self):
        self.parts: list[str] = []

    def __call__(self, s: str):
        self.parts.append(s)

    def value(self) -> str:
        return "".join(self.parts)


# --------------------------------------------------------------------------
# consumers


class Consumer:
    __slots__ = ()

    def start_child(self, tag):
        return ()

    def end_child(self, tag):
        pass

    def text(self, data):
        pass

    def first_past(self, payload):
        pass

    def finish(self):
        pass


class Recorder(Consumer):
    """Stores a whole subtree (a marked buffer-tree node)."""

    __slots__ = ("scope", "stack")

    def __init__(self, scope: Scope, node: Node):
        self.scope = scope
        self.stack = [node]

    def start_child(self, tag):
        n = Node(tag)
        self.stack[-1].children.append(n)
        self.stack.append(n)
        self.scope.add(2, _tag_bytes(tag))
        return (self,)

    def end_child(self, tag):
        self.stack.pop()

    def text(self, data):
        self.stack[-1].children.append(data)
        self.scope.add(1, len(data))


class ProbeCapture(Consumer):
    """Computes the string value of one element and sets probe flags."""

    __slots__ = ("targets", "anchors", "parts", "depth")

    def __init__(self, targets, anchors):
        self.targets = targets
        self.anchors = anchors
        self.parts: list[str] = []
        self.depth = 0

    def start_child(self, tag):
        self.depth += 1
        return (self,)

    def end_child(self, tag):
        self.depth -= 1

    def text(self, data):
        self.parts.append(data)

    def finish(self):
        if self.depth:
            return
        value = "".join(self.parts)
        for key, owner, atom in self.targets:
            if key[0] == "exists" or compare_values(value, atom.op, atom.rhs):
                node = self.anchors[id(owner)]
                if node.flags is None:
                    node.flags = {}
                node.flags[key] = True


class TreeConsumer(Consumer):
    """Follows an unmarked buffer-tree node, storing tags of tracked children."""

    __slots__ = ("scope", "tnode", "bnode", "anchors")

    def __init__(self, scope, tnode, bnode, anchors):
        self.scope = scope
        self.tnode = tnode
        self.bnode = bnode
        self.anchors = anchors

    def start_child(self, tag):
        c = self.tnode.children.get(tag)
        if c is None:
            return ()
        if c.marked:
            n = Node(tag)
            self.bnode.children.append(n)
            self.scope.add(2, _tag_bytes(tag), 1)
            return (Recorder(self.scope, n),)
        out = []
        anchors = self.anchors
        n = None
        if c.stored:
            n = Node(tag, tree=c)
            self.bnode.children.append(n)
            self.scope.add(2, _tag_bytes(tag))
            if c.probes:
                anchors = dict(anchors)
                anchors[id(c)] = n
        if c.children:
            out.append(TreeConsumer(self.scope, c, n, anchors))
        if c.probe_targets:
            out.append(ProbeCapture(c.probe_targets, anchors))
        return out


class Copier(Consumer):
    """Writes the children of the current element to the output."""

    __slots__ = ("write", "depth")

    def __init__(self, write):
        self.write = write
        self.depth = 0

    def start_child(self, tag):
        self.write(f"<{tag}>")
        self.depth += 1
        return (self,)

    def end_child(self, tag):
        self.write(f"</{tag}>")
        self.depth -= 1

    def text(self, data):
        self.write(escape(data))


class SimpleRunner(Copier):
    """Streams a simple expression ``alpha beta gamma`` for one binding.

    ``alpha`` runs when the binding starts (or at its end if a condition
    needs the bound element), the element itself is copied through if
    ``beta`` asks for it, and ``gamma`` runs at the end.
    """

    __slots__ = ("tag", "env", "late", "copy", "gamma")

    def __init__(self, expr, var, tag, write, env):
        super().__init__(write)
        self.tag = tag
        self.env = env
        items = seq_items(expr)
        beta_at = None
        for i, it in enumerate(items):
            if isinstance(it, VarOut) or isinstance(it, If) and isinstance(it.body, VarOut):
                beta_at = i
                break
        self.copy = False
        if beta_at is None:
            refs_self = any(r.var == var for it in items if isinstance(it, If)
                            for a in atoms(it.cond) for r in atom_refs(a))
            if refs_self:
                self.late = items
                self.gamma = ()
                return
            self._eval(items)
            self.late = ()
            self.gamma = ()
            return
        beta = items[beta_at]
        u = beta.var if isinstance(beta, VarOut) else beta.body.var
        if u != var:
            raise FluxqError(f"streamed output of ${u} inside the handler for ${var}")
        self._eval(items[:beta_at])
        self.copy = isinstance(beta, VarOut) or evaluate_condition(beta.cond, env)
        if self.copy and tag is not None:
            write(f"<{tag}>")
        self.late = ()
        self.gamma = items[beta_at + 1:]

    def _eval(self, items):
        out: list[str] = []
        for it in items:
            eval_xquery(it, self.env, out)
        if out:
            self.write("".join(out))

    def start_child(self, tag):
        if self.copy:
            return super().start_child(tag)
        self.depth += 1
        return (self,)

    def end_child(self, tag):
        if self.copy:
            super().end_child(tag)
        else:
            self.depth -= 1

    def text(self, data):
        if self.copy:
            self.write(escape(data))

    def finish(self):
        if self.depth:
            return
        if self.copy and self.tag is not None:
            self.write(f"</{self.tag}>")
        self._eval(self.late)
        self._eval(self.gamma)


class Closer(Consumer):
    __slots__ = ("write", "suffix", "scope")

    def __init__(self, write, suffix, scope):
        self.write = write
        self.suffix = suffix
        self.scope = scope

    def finish(self):
        if self.suffix:
            self.write(self.suffix)
        if self.scope is not None:
            self.scope.free()


# --------------------------------------------------------------------------
# plans


@dataclass
class HandlerPlan:
    handler: object
    set_id: object = None
    deps: frozenset = frozenset()
    outputs_self: bool = False


@dataclass
class PsPlan:
    ps: Ps
    element: str
    handlers: list
    text_only: bool = False


class ExecutionPlan:
    """Compiled form of a safe FluX query: handler tables, past-set
    registrations and buffer trees."""

    def __init__(self, query, dtd: Dtd, projection: Projection | None = None):
        self.query = query
        self.dtd = dtd
        self.projection = projection if projection is not None else project(query)
        self.registrations: dict[str, list] = {}
        self._set_ids: dict = {}
        self.ps_plans: dict[int, PsPlan] = {}
        if isinstance(query, Ps):
            for ps, env in ps_nodes(query):
                element = env.get(ps.var)
                if element is None or not dtd.has(element):
                    raise UnknownElement(f"cannot resolve the element bound to ${ps.var}")
                self._plan_ps(ps, element)

    def _register(self, element: str, symbols) -> object:
        key = (element, frozenset(symbols))
        sid = self._set_ids.get(key)
        if sid is None:
            sid = self._set_ids[key] = len(self._set_ids)
            self.registrations.setdefault(element, []).append((sid, key[1]))
        return sid

    def _plan_ps(self, ps: Ps, element: str):
        plans = []
        for h in ps.handlers:
            if isinstance(h, OnFirstPast):
                syms = self.dtd.symb(element) if h.symbols is None else h.symbols
                outputs = any(isinstance(s, (VarOut, PathOut)) and s.var == ps.var
                              for s in walk(h.body))
                plans.append(HandlerPlan(h, self._register(element, syms),
                                         frozenset(dependencies(ps.var, h.body)), outputs))
            else:
                if isinstance(h.body, Ps) and h.body.var != h.var:
                    raise FluxqError(
                        f"process-stream over ${h.body.var} inside the handler for ${h.var}")
                plans.append(HandlerPlan(h))
        self.ps_plans[id(ps)] = PsPlan(ps, element, plans, element in self.dtd.text_only)

    def buffer_dump(self) -> str:
        return self.projection.dump()


class Runtime:
    def __init__(self, plan: ExecutionPlan):
        self.plan = plan
        self.stats = BufferStats()

    def open_scope(self, var: str, tag: str):
        """Start buffering a new binding of ``var``; returns (scope, node, consumer)."""
        tree = self.plan.projection.trees.get(var)
        if tree is None:
            return None, None, None
        scope = Scope(self.stats, var)
        root = tree.root
        if root.marked:
            node = Node(tag)
            scope.add(2, _tag_bytes(tag), 1)
            return scope, node, Recorder(scope, node)
        node = Node(tag, tree=root)
        return scope, node, TreeConsumer(scope, root, node, {id(root): node})

    def binding(self, handler: On, tag: str, write, env: dict) -> list:
        """Consumers for one firing of an on-handler on a child labelled ``tag``."""
        scope, node, tracker = self.open_scope(handler.var, tag)
        if node is not None:
            env = dict(env)
            env[handler.var] = node
        out = [tracker] if tracker is not None else []
        body = handler.body
        if isinstance(body, SimpleX):
            out.append(SimpleRunner(body.expr, handler.var, tag, write, env))
            out.append(Closer(write, "", scope))
        else:
            if body.prefix:
                write(body.prefix)
            out.append(PsEvaluator(self, self.plan.ps_plans[id(body)], write, env))
            out.append(Closer(write, body.suffix, scope))
        return out


DIRECT, DURING, AFTER = 0, 1, 2


class PsEvaluator(Consumer):
    """Runs the handler list of one process-stream binding."""

    __slots__ = ("rt", "plans", "write", "env", "fired", "pending", "queue", "by_set",
                 "at_end")

    def __init__(self, rt: Runtime, plan: PsPlan, write, env: dict):
        self.rt = rt
        self.plans = plan.handlers
        self.write = write
        self.env = env
        self.fired = [False] * len(self.plans)
        self.pending: set = set()
        self.queue: list = []
        self.by_set = {}
        # text is not a symbol: inside text-only elements every handler
        # waits for the text to be complete
        self.at_end = plan.text_only
        for i, hp in enumerate(self.plans):
            if hp.set_id is not None:
                self.by_set.setdefault(hp.set_id, []).append(i)

    def _run_first(self, i: int, write):
        self.fired[i] = True
        out: list[str] = []
        eval_xquery(self.plans[i].handler.body, dict(self.env), out)
        if out:
            write("".join(out))

    def first_past(self, payload):
        if self.at_end:
            return
        _, ids, position = payload
        hit = sorted(i for sid in ids for i in self.by_set.get(sid, ()) if not self.fired[i])
        if not hit:
            return
        if position == 0:
            for i in hit:
                self._run_first(i, self.write)
        else:
            self.pending.update(hit)

    def start_child(self, tag):
        consumers = []
        mode = DIRECT
        pending = self.pending
        for i, hp in enumerate(self.plans):
            h = hp.handler
            if hp.set_id is not None:
                if i in pending and not self.fired[i]:
                    if mode == DIRECT and tag not in hp.deps and not hp.outputs_self:
                        self._run_first(i, self.write)
                    else:
                        mode = AFTER
                        self.fired[i] = True
                        self.queue.append((i, None))
            elif h.symbol == tag:
                if mode == DIRECT:
                    mode = DURING
                    consumers.extend(self.rt.binding(h, tag, self.write, self.env))
                else:
                    cap = Capture()
                    self.queue.append((None, cap))
                    consumers.extend(self.rt.binding(h, tag, cap, self.env))
        if pending:
            pending.clear()
        return consumers

    def end_child(self, tag):
        if not self.queue:
            return
        queue, self.queue = self.queue, []
        for i, cap in queue:
            if cap is not None:
                s = cap.value()
                if s:
                    self.write(s)
            else:
                out: list[str] = []
                eval_xquery(self.plans[i].handler.body, dict(self.env), out)
                if out:
                    self.write("".join(out))

    def finish(self):
        self.pending.clear()
        for i, hp in enumerate(self.plans):
            if hp.set_id is not None and not self.fired[i]:
                self._run_first(i, self.write)


# --------------------------------------------------------------------------
# driver


@dataclass
class RunResult:
    output: str
    stats: BufferStats


def build_plan(query, dtd: Dtd, projection: Projection | None = None) -> ExecutionPlan:
    return ExecutionPlan(query, dtd, projection)


def drive(events, frame0: list):
    """Push ``events`` through the consumer stack rooted at ``frame0``."""
    stack = [frame0]
    top = frame0
    for kind, payload in events:
        if kind == START:
            frame = []
            for c in top:
                got = c.start_child(payload)
                if got:
                    frame.extend(got)
            stack.append(frame)
            top = frame
        elif kind == END:
            done = stack.pop()
            for c in done:
                c.finish()
            top = stack[-1]
            for c in top:
                c.end_child(payload)
        elif kind == TEXT:
            for c in top:
                c.text(payload)
        elif kind == PAST:
            for c in top:
                c.first_past(payload)
    for c in frame0:
        c.finish()


def execute(plan: ExecutionPlan, events, write) -> BufferStats:
    """Run ``plan`` over raw (unvalidated) events, writing output via ``write``."""
    rt = Runtime(plan)
    started = time.perf_counter()
    q = plan.query
    doc_scope, doc_node, tracker = rt.open_scope(ROOT, DOCUMENT)
    env = {ROOT: doc_node if doc_node is not None else Node(DOCUMENT, tree=_EMPTY_TREE)}
    frame0 = [tracker] if tracker is not None else []
    if isinstance(q, SimpleX):
        frame0.append(SimpleRunner(q.expr, ROOT, None, write, env))
    else:
        if q.prefix:
            write(q.prefix)
        frame0.append(PsEvaluator(rt, plan.ps_plans[id(q)], write, env))
    frame0.append(Closer(write, q.suffix if isinstance(q, Ps) else "", doc_scope))
    stream = validate_and_punctuate(events, plan.dtd, plan.registrations)
    drive(stream, frame0)
    rt.stats.elapsed = time.perf_counter() - started
    return rt.stats


class _EmptyTree:
    children: dict = {}
    probes: frozenset = frozenset()
    marked = False


_EMPTY_TREE = _EmptyTree()


def run(plan: ExecutionPlan, source, write=None) -> RunResult:
    """Execute ``plan`` on an XML source (bytes, str, file or event iterator)."""
    parts: list[str] = []
    sink = write if write is not None else parts.append
    if isinstance(source, (bytes, bytearray, str)) or hasattr(source, "read"):
        events = tokenize(source)
    else:
        events = source
    stats = execute(plan, events, sink)
    return RunResult("".join(parts), stats)
