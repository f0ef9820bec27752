"""Evaluation of XQuery- over in-memory trees.

The same :class:`Node` type holds fully materialized documents (for the
reference evaluator) and partially buffered data (for the streaming
engine).  A node with a ``tree`` attribute was built from a buffer tree
and only holds the children that tree asks for; dereferencing anything
else raises :class:`~fluxq.errors.BufferMiss`.
"""

from __future__ import annotations

from decimal import Decimal, InvalidOperation

from ..errors import BufferMiss
from ..projection import probe_key
from ..xquery import (
    And, Compare, Empty, Exists, For, If, Not, Or, PathOut, ROOT, Seq, Str, TrueCond, VarOut,
)
from ..schema import DOCUMENT
from .events import END, START, TEXT, escape


class Node:
    __slots__ = ("tag", "children", "flags", "tree")

    def __init__(self, tag: str, tree=None):
        self.tag = tag
        self.children: list = []
        self.flags = None
        self.tree = tree

    def __repr__(self):
        return f"Node({self.tag!r}, {len(self.children)} children)"


def build_tree(events, dtd=None) -> Node:
    """Materialize a document; with a DTD, whitespace-only text inside
    element-only content is dropped the same way validation does."""
    doc = Node(DOCUMENT)
    stack = [doc]
    text_only = dtd.text_only if dtd is not None else None
    for kind, payload in events:
        if kind == START:
            n = Node(payload)
            stack[-1].children.append(n)
            stack.append(n)
        elif kind == END:
            stack.pop()
        elif kind == TEXT:
            top = stack[-1]
            if text_only is not None and top.tag not in text_only and not payload.strip():
                continue
            top.children.append(payload)
    return doc


# --------------------------------------------------------------------------
# navigation


def child_nodes(node: Node, tag: str) -> list:
    tree = node.tree
    if tree is not None:
        tn = tree.children.get(tag)
        if tn is None or not tn.stored:
            raise BufferMiss(f"<{node.tag}>/{tag} was not buffered")
    return [c for c in node.children if type(c) is Node and c.tag == tag]


def nodes_at(node: Node, path: tuple) -> list:
    current = [node]
    for step in path:
        nxt = []
        for n in current:
            nxt.extend(child_nodes(n, step))
        current = nxt
    return current


def string_value(node: Node) -> str:
    if node.tree is not None:
        raise BufferMiss(f"string value of partially buffered <{node.tag}>")
    ch = node.children
    if len(ch) == 1 and type(ch[0]) is str:
        return ch[0]
    return "".join(_texts(node))


def _texts(node):
    for c in node.children:
        if type(c) is str:
            yield c
        else:
            yield from _texts(c)


def serialize_node(node: Node, out: list):
    if node.tree is not None:
        raise BufferMiss(f"output of partially buffered <{node.tag}>")
    _serialize(node, out)


def _serialize(node: Node, out: list):
    own = node.tag != DOCUMENT
    if own:
        out.append(f"<{node.tag}>")
    for c in node.children:
        if type(c) is str:
            out.append(escape(c))
        else:
            _serialize(c, out)
    if own:
        out.append(f"</{node.tag}>")


# --------------------------------------------------------------------------
# conditions


def _number(s: str):
    try:
        d = Decimal(s.strip())
    except InvalidOperation:
        return None
    return d if d.is_finite() else None


_OPS = {
    "=": lambda a, b: a == b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def compare_values(a: str, op: str, b: str) -> bool:
    """Numeric comparison when both sides are decimal numbers, else string."""
    x, y = _number(a), _number(b)
    if x is not None and y is not None:
        return _OPS[op](x, y)
    return _OPS[op](a, b)


def _flag(node: Node, key) -> bool | None:
    tree = node.tree
    if tree is not None and key in tree.probes:
        return bool(node.flags and node.flags.get(key))
    return None


def evaluate_condition(c, env: dict) -> bool:
    if isinstance(c, TrueCond):
        return True
    if isinstance(c, And):
        return evaluate_condition(c.left, env) and evaluate_condition(c.right, env)
    if isinstance(c, Or):
        return evaluate_condition(c.left, env) or evaluate_condition(c.right, env)
    if isinstance(c, Not):
        return not evaluate_condition(c.operand, env)
    if isinstance(c, Exists):
        node = env[c.ref.var]
        flag = _flag(node, probe_key(c, c.ref.path))
        if flag is not None:
            return flag
        return bool(nodes_at(node, c.ref.path))
    if isinstance(c, Compare):
        lhs_node = env[c.lhs.var]
        if not c.is_join:
            flag = _flag(lhs_node, probe_key(c, c.lhs.path))
            if flag is not None:
                return flag
            return any(compare_values(string_value(n), c.op, c.rhs)
                       for n in nodes_at(lhs_node, c.lhs.path))
        left = [string_value(n) for n in nodes_at(lhs_node, c.lhs.path)]
        if not left:
            return False
        right = [string_value(n) for n in nodes_at(env[c.rhs.var], c.rhs.path)]
        return any(compare_values(a, c.op, b) for a in left for b in right)
    raise TypeError(f"not a condition: {c!r}")


# --------------------------------------------------------------------------
# expressions


def eval_xquery(e, env: dict, out: list):
    """Evaluate ``e`` under ``env`` (variable -> Node), appending text to ``out``."""
    if isinstance(e, Str):
        out.append(e.text)
    elif isinstance(e, Seq):
        for item in e.items:
            eval_xquery(item, env, out)
    elif isinstance(e, For):
        nodes = nodes_at(env[e.source], e.path)
        saved = env.get(e.var)
        for n in nodes:
            env[e.var] = n
            if e.where is None or evaluate_condition(e.where, env):
                eval_xquery(e.body, env, out)
        if saved is None:
            env.pop(e.var, None)
        else:
            env[e.var] = saved
    elif isinstance(e, If):
        if evaluate_condition(e.cond, env):
            eval_xquery(e.body, env, out)
    elif isinstance(e, VarOut):
        serialize_node(env[e.var], out)
    elif isinstance(e, PathOut):
        for n in nodes_at(env[e.var], e.path):
            serialize_node(n, out)
    elif isinstance(e, Empty):
        pass
    else:
        raise TypeError(f"not an XQuery- expression: {e!r}")


def reference_eval(q, document) -> str:
    """Evaluate an XQuery- query on a materialized document (the oracle)."""
    if not isinstance(document, Node):
        document = build_tree(document)
    out: list = []
    eval_xquery(q, {ROOT: document}, out)
    return "".join(out)
