"""Discrete syntactic structures and the parsing algorithms over them.

A constituency tree is a nested tuple over leaf token indices: a leaf is an
``int`` and an internal node is a ``(left, right)`` pair whose in-order leaf
traversal is 0..n-1.  Split-point scores (one real per adjacent token pair)
determine the tree: the sentence is split recursively at the highest score.
Per-token height scores determine, inside every constituent, which token acts
as the parent of the whole span.

All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DataError

Tree = "int | tuple"


@dataclass(frozen=True)
class DependencyGraph:
    """Set of (dependent, parent) arcs plus the root token index."""

    arcs: frozenset
    root: int

    def __post_init__(self):
        deps = [d for d, _ in self.arcs]
        if len(deps) != len(set(deps)):
            raise DataError("dependency graph: a token has more than one parent")
        if self.root in deps:
            raise DataError("dependency graph: root must not have a parent")

    @property
    def n(self):
        return len(self.arcs) + 1

    def parent_array(self) -> list:
        """Parent index per token, -1 at the root."""
        parents = [-1] * self.n
        for d, p in self.arcs:
            parents[d] = p
        return parents

    def is_acyclic(self) -> bool:
        parents = dict(self.arcs)
        for start in parents:
            seen = set()
            node = start
            while node in parents:
                if node in seen:
                    return False
                seen.add(node)
                node = parents[node]
        return True


def _argmax_leftmost(tau, lo, hi):
    best = lo
    for j in range(lo + 1, hi):
        if tau[j] > tau[best]:
            best = j
    return best


def distance_to_tree(words, tau) -> Tree:
    """Binary constituency tree from split scores; ties split leftmost.

    Only the rank order of `tau` matters: any strictly monotone transform
    of the scores yields the identical tree.
    """
    n = len(words)
    if n == 0:
        raise DataError("distance_to_tree: empty word sequence")
    if len(tau) != n - 1:
        raise DataError(
            f"distance_to_tree: need {n - 1} split scores for {n} words, got {len(tau)}")
    tau = [float(t) for t in tau]

    def build(lo, hi):
        if hi - lo == 1:
            return lo
        k = _argmax_leftmost(tau, lo, hi - 1)
        return (build(lo, k + 1), build(k + 1, hi))

    return build(0, n)


def tree_to_dependencies(tree: Tree, delta) -> DependencyGraph:
    """Percolate heads: in each constituent the child subtree whose head has
    the larger height becomes the parent side (ties prefer the left child)."""
    delta = [float(d) for d in delta]
    arcs = []

    def walk(t):
        if isinstance(t, int):
            return t
        left, right = t
        pl = walk(left)
        pr = walk(right)
        if delta[pl] >= delta[pr]:
            arcs.append((pr, pl))
            return pl
        arcs.append((pl, pr))
        return pr

    root = walk(tree)
    return DependencyGraph(frozenset(arcs), root)


def joint_parse(words, tau, delta):
    """Single recursion producing the constituency tree and dependency graph
    together; equivalent to distance_to_tree followed by tree_to_dependencies.
    """
    n = len(words)
    if n == 0:
        raise DataError("joint_parse: empty word sequence")
    if len(tau) != n - 1 or len(delta) != n:
        raise DataError(
            f"joint_parse: inconsistent lengths (words {n}, tau {len(tau)}, delta {len(delta)})")
    tau = [float(t) for t in tau]
    delta = [float(d) for d in delta]
    arcs = []

    def build(lo, hi):
        if hi - lo == 1:
            return lo, lo, delta[lo]
        k = _argmax_leftmost(tau, lo, hi - 1)
        tl, pl, hl = build(lo, k + 1)
        tr, pr, hr = build(k + 1, hi)
        if hl >= hr:
            arcs.append((pr, pl))
            return (tl, tr), pl, hl
        arcs.append((pl, pr))
        return (tl, tr), pr, hr

    tree, root, _ = build(0, n)
    return tree, DependencyGraph(frozenset(arcs), root)


def tree_leaves(tree: Tree) -> list:
    if isinstance(tree, int):
        return [tree]
    return tree_leaves(tree[0]) + tree_leaves(tree[1])


def tree_spans(tree: Tree) -> set:
    """Inclusive (start, end) index pairs, one per internal node; single
    leaves are never emitted."""
    spans = set()

    def walk(t):
        if isinstance(t, int):
            return t, t
        lo1, _ = walk(t[0])
        _, hi2 = walk(t[1])
        spans.add((lo1, hi2))
        return lo1, hi2

    walk(tree)
    return spans


def tree_to_bracketed(tree: Tree, tokens) -> str:
    """Render an unlabeled binary tree over `tokens` as nested parentheses."""
    if isinstance(tree, int):
        return tokens[tree]
    return f"({tree_to_bracketed(tree[0], tokens)} {tree_to_bracketed(tree[1], tokens)})"
