"""Finite, non-recombining scenario trees.

A node encodes a whole path prefix: the states seen from the root (always at
the origin) down to that node.  Nodes are numbered breadth-first, so every
depth occupies a contiguous id range and ``parent < child`` for every edge.
A single backward sweep over decreasing ids therefore visits children before
parents.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DepthOutOfRange, EmptyBranching, SizeLimit, UnknownNode, ValidationError

DEFAULT_MAX_NODES = 2_000_000


def max_nodes_default() -> int:
    """Node cap; the ``RDG_MAX_NODES`` environment variable overrides it."""
    value = os.environ.get("RDG_MAX_NODES")
    return int(value) if value else DEFAULT_MAX_NODES


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValidationError("horizon must be positive", "grid.T")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValidationError("steps must be an integer >= 1", "grid.N")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        t = np.arange(self.steps + 1) * self.dt
        t[-1] = self.horizon
        return t


@dataclass(frozen=True)
class Node:
    id: int
    depth: int
    state: tuple[float, ...]
    parent: int | None
    children: tuple[int, ...]


class ScenarioTree:
    """Immutable rooted tree on a time grid.

    Built through :func:`build_tree` or :meth:`from_nodes`; the constructor
    assumes its arrays are already consistent and only runs :meth:`validate`.
    """

    def __init__(self, grid: TimeGrid, depth, parent, states, children):
        self.grid = grid
        self.depth = np.asarray(depth, dtype=np.int64)
        self.parent = np.asarray(parent, dtype=np.int64)
        self.states = np.atleast_2d(np.asarray(states, dtype=float))
        self.children: tuple[tuple[int, ...], ...] = tuple(tuple(c) for c in children)
        for a in (self.depth, self.parent, self.states):
            a.setflags(write=False)
        self.validate()
        bounds = np.searchsorted(self.depth, np.arange(grid.steps + 2))
        self._depth_bounds = bounds
        self.root = 0

    # -- construction -----------------------------------------------------
    @classmethod
    def from_nodes(cls, grid: TimeGrid, nodes: Sequence[dict]) -> "ScenarioTree":
        """Rebuild from the JSON node records ``{id, depth, state, parent, children}``."""
        n = len(nodes)
        by_id = sorted(nodes, key=lambda rec: rec["id"])
        if [rec["id"] for rec in by_id] != list(range(n)):
            raise ValidationError("node ids must be dense in [0, node_count)", "tree.nodes")
        depth = [int(rec["depth"]) for rec in by_id]
        parent = [-1 if rec.get("parent") is None else int(rec["parent"]) for rec in by_id]
        states = [list(map(float, np.atleast_1d(rec["state"]))) for rec in by_id]
        children = [tuple(int(c) for c in rec.get("children", ())) for rec in by_id]
        return cls(grid, depth, parent, states, children)

    def to_dict(self) -> dict:
        return {
            "grid": {"T": self.grid.horizon, "N": self.grid.steps},
            "nodes": [
                {
                    "id": i,
                    "depth": int(self.depth[i]),
                    "state": [float(x) for x in self.states[i]],
                    "parent": None if self.parent[i] < 0 else int(self.parent[i]),
                    "children": list(self.children[i]),
                }
                for i in range(len(self))
            ],
        }

    def validate(self) -> None:
        n = len(self.depth)
        N = self.grid.steps
        path = "tree.nodes"
        if n == 0 or not (len(self.parent) == len(self.children) == len(self.states) == n):
            raise ValidationError("inconsistent node arrays", path)
        if self.depth[0] != 0 or self.parent[0] != -1:
            raise ValidationError("node 0 must be the root at depth 0", path)
        if np.any(self.states[0] != 0):
            raise ValidationError("root state must be the origin", f"{path}[0].state")
        if n > 1 and np.any(self.parent[1:] < 0):
            raise ValidationError("exactly one root is allowed", path)
        if np.any(np.diff(self.depth) < 0):
            raise ValidationError("nodes must be ordered by depth", path)
        seen = np.zeros(n, dtype=bool)
        for i, kids in enumerate(self.children):
            d = self.depth[i]
            if d > N:
                raise ValidationError(f"depth {d} exceeds N={N}", f"{path}[{i}].depth")
            if d < N and not kids:
                raise ValidationError("non-terminal node without children", f"{path}[{i}].children")
            if d == N and kids:
                raise ValidationError("terminal node with children", f"{path}[{i}].children")
            for c in kids:
                if not 0 <= c < n or seen[c]:
                    raise ValidationError(f"bad or repeated child id {c}", f"{path}[{i}].children")
                seen[c] = True
                if self.parent[c] != i or self.depth[c] != d + 1 or c <= i:
                    raise ValidationError(f"child {c} inconsistent with parent {i}", f"{path}[{c}]")
        if not seen[1:].all():
            raise ValidationError("tree is not connected", path)

    # -- queries ----------------------------------------------------------
    def __len__(self) -> int:
        return len(self.depth)

    @property
    def steps(self) -> int:
        return self.grid.steps

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def node(self, i: int) -> Node:
        self._check(i)
        p = int(self.parent[i])
        return Node(i, int(self.depth[i]), tuple(self.states[i]), None if p < 0 else p, self.children[i])

    @property
    def nodes(self) -> list[Node]:
        return [self.node(i) for i in range(len(self))]

    def is_leaf(self, i: int) -> bool:
        return not self.children[i]

    @property
    def leaves(self) -> np.ndarray:
        return np.arange(self._depth_bounds[self.steps], len(self))

    @property
    def internal(self) -> np.ndarray:
        return np.arange(self._depth_bounds[self.steps])

    def ancestors(self, i: int) -> list[int]:
        """Node ids from the root down to ``i`` inclusive."""
        self._check(i)
        out = []
        while i >= 0:
            out.append(int(i))
            i = self.parent[i]
        return out[::-1]

    def ancestor_at(self, i: int, k: int) -> int:
        while self.depth[i] > k:
            i = self.parent[i]
        return int(i)

    def leaf_paths(self) -> np.ndarray:
        """(n_leaves, N+1) array of node ids along each root-to-leaf path."""
        leaves = self.leaves
        out = np.empty((len(leaves), self.steps + 1), dtype=np.int64)
        cur = leaves.copy()
        for k in range(self.steps, -1, -1):
            out[:, k] = cur
            cur = self.parent[cur]
        return out

    def subtree_leaves(self, i: int) -> list[int]:
        stack, out = [i], []
        while stack:
            u = stack.pop()
            if self.children[u]:
                stack.extend(reversed(self.children[u]))
            else:
                out.append(u)
        return out

    def _check(self, i) -> None:
        if not (isinstance(i, (int, np.integer)) and 0 <= i < len(self)):
            raise UnknownNode(f"unknown node id {i!r}", i)


def build_tree(
    grid: TimeGrid,
    branching: Callable[[int, np.ndarray], Iterable],
    *,
    dim: int = 1,
    max_nodes: int | None = None,
) -> ScenarioTree:
    """Grow a tree breadth-first.

    ``branching(k, path)`` receives the depth ``k`` of the parent and its path
    as a ``(k+1, dim)`` array of states, and returns the child states in the
    order they should be numbered.
    """
    cap = max_nodes_default() if max_nodes is None else max_nodes
    depth, parent, children = [0], [-1], []
    states = [np.zeros(dim)]
    paths = {0: np.zeros((1, dim))}
    frontier = [0]
    for k in range(grid.steps):
        nxt = []
        for u in frontier:
            prefix = paths.pop(u)
            emitted = list(branching(k, prefix))
            if not emitted:
                raise EmptyBranching(f"node {u} at depth {k} received no children", u)
            kids = []
            for s in emitted:
                c = len(depth)
                if c >= cap:
                    raise SizeLimit(f"tree exceeds the node cap of {cap}")
                s = np.atleast_1d(np.asarray(s, dtype=float))
                if s.shape != (dim,):
                    raise ValidationError(f"child state has shape {s.shape}, expected ({dim},)")
                depth.append(k + 1)
                parent.append(u)
                states.append(s)
                if k + 1 < grid.steps:
                    paths[c] = np.vstack([prefix, s])
                kids.append(c)
            children.append(tuple(kids))
            nxt.extend(kids)
        frontier = nxt
    children.extend(() for _ in range(len(depth) - len(children)))
    return ScenarioTree(grid, depth, parent, np.vstack(states), children)


def additive_tree(grid: TimeGrid, increments: Sequence, **kwargs) -> ScenarioTree:
    """Tree whose children add each of ``increments`` to the parent state."""
    incs = [np.atleast_1d(np.asarray(x, dtype=float)) for x in increments]
    kwargs.setdefault("dim", len(incs[0]) if incs else 1)
    return build_tree(grid, lambda k, path: [path[-1] + x for x in incs], **kwargs)


def path_of(tree: ScenarioTree, node: int) -> np.ndarray:
    """States from the root to ``node``: shape ``(depth+1, d)``."""
    return tree.states[tree.ancestors(node)]


def nodes_at_depth(tree: ScenarioTree, k: int) -> list[int]:
    if not (isinstance(k, (int, np.integer)) and 0 <= k <= tree.steps):
        raise DepthOutOfRange(f"depth {k!r} outside [0, {tree.steps}]", k)
    lo, hi = tree._depth_bounds[k], tree._depth_bounds[k + 1]
    return list(range(int(lo), int(hi)))
