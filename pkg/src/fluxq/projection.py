"""Buffer projection: which parts of the input each variable must keep.

For every variable that is free in a maximal XQuery- subexpression, the
buffered paths are merged into a prefix tree.  Nodes whose subtree is
output or compared in a join are marked and stored whole; unmarked nodes
store only their tags.  Comparisons with constants and ``exists`` tests
need no data: they become *probes*, boolean flags computed while the
relevant elements stream by.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .flux import OnFirstPast, SimpleX, maximal_xquery_subexprs
from .xquery import (
    Compare, Exists, For, If, PathOut, ROOT, Seq, VarOut, atoms, free_vars,
)

STRUCTURAL = "structural"
OUTPUT = "output-subtree"
JOIN = "join-operand"


@dataclass(frozen=True)
class BufferPath:
    var: str
    steps: tuple
    kind: str

    def __str__(self):
        return "/".join(("$" + self.var,) + self.steps) + f" [{self.kind}]"


def buffer_paths(r: str, alpha, skip_output_of: str | None = None) -> set[BufferPath]:
    """Buffered paths of ``alpha`` that start at variable ``r``.

    ``skip_output_of`` names a variable whose own subtree output is
    streamed rather than buffered.
    """
    if isinstance(alpha, Seq):
        out = set()
        for item in alpha.items:
            out |= buffer_paths(r, item, skip_output_of)
        return out
    if isinstance(alpha, VarOut):
        if alpha.var == r and r != skip_output_of:
            return {BufferPath(r, (), OUTPUT)}
        return set()
    if isinstance(alpha, PathOut):
        if alpha.var == r:
            return {BufferPath(r, alpha.path, OUTPUT)}
        return set()
    if isinstance(alpha, For):
        out = buffer_paths(r, alpha.body, skip_output_of)
        if alpha.where is not None:
            out |= _join_paths(r, alpha.where)
            inner_cond = _join_paths(alpha.var, alpha.where)
        else:
            inner_cond = set()
        if alpha.source == r:
            inner = buffer_paths(alpha.var, alpha.body, skip_output_of) | inner_cond
            if not inner:
                out.add(BufferPath(r, alpha.path, STRUCTURAL))
            for p in inner:
                out.add(BufferPath(r, alpha.path + p.steps, p.kind))
        return out
    if isinstance(alpha, If):
        return buffer_paths(r, alpha.body, skip_output_of) | _join_paths(r, alpha.cond)
    return set()


def _join_paths(r, cond) -> set[BufferPath]:
    out = set()
    for a in atoms(cond):
        if isinstance(a, Compare) and a.is_join:
            for ref in (a.lhs, a.rhs):
                if ref.var == r:
                    out.add(BufferPath(r, ref.path, JOIN))
    return out


def probe_key(atom, relpath: tuple) -> tuple:
    if isinstance(atom, Exists):
        return ("exists", relpath)
    return ("cmp", relpath, atom.op, atom.rhs)


@dataclass
class TreeNode:
    tag: str
    children: dict = field(default_factory=dict)
    marked: bool = False
    stored: bool = True
    probes: set = field(default_factory=set)          # keys evaluated on instances of this node
    probe_targets: list = field(default_factory=list)  # (key, owner TreeNode, atom)

    def child(self, tag: str, stored: bool = True) -> "TreeNode":
        node = self.children.get(tag)
        if node is None:
            node = self.children[tag] = TreeNode(tag, stored=stored)
        elif stored:
            node.stored = True
        return node

    def walk(self, depth=0):
        yield depth, self
        for tag in sorted(self.children):
            yield from self.children[tag].walk(depth + 1)

    def is_empty(self) -> bool:
        return not self.children and not self.marked and not self.probes


@dataclass
class BufferTree:
    var: str
    root: TreeNode

    def dump(self) -> str:
        lines = [f"${self.var}" + (" *" if self.root.marked else "")]
        for depth, node in self.root.walk():
            if depth == 0:
                continue
            flags = []
            if node.marked:
                flags.append("*")
            if not node.stored:
                flags.append("probe-path")
            if node.probes:
                flags.append("flags=" + ",".join(_key_text(k) for k in sorted(node.probes, key=str)))
            suffix = " " + " ".join(flags) if flags else ""
            lines.append("  " * depth + node.tag + suffix)
        if self.root.probes:
            lines[0] += " flags=" + ",".join(_key_text(k) for k in sorted(self.root.probes, key=str))
        return "\n".join(lines)


def _key_text(key) -> str:
    if key[0] == "exists":
        return "exists(" + "/".join(key[1]) + ")"
    return "/".join(key[1]) + key[2] + repr(key[3])


def build_buffer_tree(r: str, paths) -> BufferTree:
    """Merge paths into a prefix tree, mark, then prune below marked nodes."""
    root = TreeNode("$" + r)
    for p in paths:
        node = root
        for step in p.steps:
            node = node.child(step)
        if p.kind in (OUTPUT, JOIN):
            node.marked = True
    _prune(root)
    return BufferTree(r, root)


def _prune(node: TreeNode):
    if node.marked:
        node.children.clear()
        return
    for c in node.children.values():
        _prune(c)


# --------------------------------------------------------------------------
# whole-query projection


@dataclass
class Projection:
    trees: dict  # var -> BufferTree
    var_nodes: dict  # var -> (owner var, steps) for variables inside maximal subexpressions

    def tree(self, var) -> BufferTree | None:
        return self.trees.get(var)

    def dump(self) -> str:
        if not self.trees:
            return "(no buffers)"
        return "\n".join(self.trees[v].dump() for v in sorted(self.trees))


def buffered_vars(q) -> set[str]:
    """Variables free in some maximal XQuery- subexpression of ``q``."""
    out = set()
    for _, alpha in maximal_xquery_subexprs(q):
        out |= free_vars(alpha)
    return out


def _streamed_var(q, position) -> str | None:
    """Handler variable whose subtree a SimpleX body at ``position`` streams."""
    node, var = q, ROOT
    for i in position:
        h = node.handlers[i]
        if isinstance(h, OnFirstPast):
            return None
        node, var = h.body, h.var
    return var if isinstance(node, SimpleX) else None


def project(q) -> Projection:
    """Buffer trees for every variable of a safe FluX query in normal form."""
    paths: dict[str, set] = {}
    probes = []
    var_nodes: dict[str, tuple] = {}
    for position, alpha in maximal_xquery_subexprs(q):
        streamed = _streamed_var(q, position)
        for r in free_vars(alpha):
            ps = buffer_paths(r, alpha, skip_output_of=streamed)
            paths.setdefault(r, set()).update(ps)
        for r in free_vars(alpha):
            var_nodes.setdefault(r, (r, ()))
        _collect(alpha, var_nodes, probes)
        if streamed is not None:
            paths.setdefault(streamed, set())
    trees = {r: build_buffer_tree(r, ps) for r, ps in paths.items()}
    for owner, steps, relpath, atom in probes:
        tree = trees.setdefault(owner, build_buffer_tree(owner, ()))
        _add_probe(tree.root, steps, relpath, atom)
    trees = {r: t for r, t in trees.items() if not t.root.is_empty()}
    return Projection(trees, var_nodes)


def _collect(e, var_nodes, probes):
    """Record tree positions of for-bound variables and const/exists probes."""
    if isinstance(e, Seq):
        for item in e.items:
            _collect(item, var_nodes, probes)
    elif isinstance(e, For):
        owner, steps = var_nodes.get(e.source, (e.source, ()))
        var_nodes[e.var] = (owner, steps + e.path)
        if e.where is not None:
            _cond_probes(e.where, var_nodes, probes)
        _collect(e.body, var_nodes, probes)
    elif isinstance(e, If):
        _cond_probes(e.cond, var_nodes, probes)
        _collect(e.body, var_nodes, probes)


def _cond_probes(cond, var_nodes, probes):
    for a in atoms(cond):
        if isinstance(a, Compare) and a.is_join:
            continue
        ref = a.ref if isinstance(a, Exists) else a.lhs
        owner, steps = var_nodes.get(ref.var, (ref.var, ()))
        probes.append((owner, steps, ref.path, a))


def _add_probe(root: TreeNode, steps, relpath, atom):
    node = root
    if node.marked:
        return
    for s in steps:
        node = node.children.get(s)
        if node is None:
            raise AssertionError("for-loop variable outside its buffer tree")
        if node.marked:
            return
    anchor = node
    probe = anchor
    for s in relpath:
        probe = probe.children.get(s)
        if probe is None:
            break
        if probe.marked:
            return  # the data on the probe path is buffered anyway
    key = probe_key(atom, relpath)
    anchor.probes.add(key)
    node = anchor
    for s in relpath:
        node = node.child(s, stored=False)
    node.probe_targets.append((key, anchor, atom))
