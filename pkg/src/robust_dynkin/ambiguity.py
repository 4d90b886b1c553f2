"""Rectangular prior families on a scenario tree.

Every internal node carries a finite menu of one-step kernels over its
children.  Choosing one kernel per node (a *policy*) pins down one prior,
and because menus are chosen independently node by node the family is closed
under pasting.  Zero weights are allowed, so two kernels of the same node
may charge disjoint sets of children; the priors they induce are then
mutually singular.

Policies are plain ``dict[int, int]`` mapping internal node ids to kernel
indices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    DepthMismatch,
    EmptyMenu,
    EnumerationTooLarge,
    IncompletePolicy,
    OverlappingPartition,
    ValidationError,
)
from .scenario_tree import ScenarioTree

WEIGHT_TOL = 1e-12
TIE_TOL = 1e-12
DEFAULT_POLICY_CAP = 1_000_000

Policy = dict


@dataclass(frozen=True)
class Kernel:
    label: float
    weights: tuple[float, ...]


class KernelMenu:
    """Per-node kernel menus.  ``weights[u]`` is a ``(n_kernels, n_children)`` array."""

    def __init__(self, tree: ScenarioTree, menus: Mapping[int, Sequence[Kernel]]):
        self.tree = tree
        self.weights: dict[int, np.ndarray] = {}
        self.labels: dict[int, tuple] = {}
        for u in tree.internal:
            u = int(u)
            kernels = menus.get(u)
            if not kernels:
                raise EmptyMenu(f"node {u} has an empty kernel menu", u)
            w = np.array([k.weights for k in kernels], dtype=float)
            where = f"ambiguity.menus[{u}]"
            if w.ndim != 2 or w.shape[1] != len(tree.children[u]):
                raise ValidationError("kernel length does not match the number of children", where, u)
            if np.any(w < 0) or np.any(~np.isfinite(w)):
                raise ValidationError("kernel weights must be finite and nonnegative", where, u)
            if np.any(np.abs(w.sum(axis=1) - 1.0) > WEIGHT_TOL):
                raise ValidationError("kernel weights must sum to 1", where, u)
            w.setflags(write=False)
            self.weights[u] = w
            self.labels[u] = tuple(k.label for k in kernels)

    @classmethod
    def single(cls, tree: ScenarioTree) -> "KernelMenu":
        """One equal-weight kernel per node: no ambiguity."""
        return cls(tree, {
            int(u): [Kernel(0.0, tuple([1.0 / len(tree.children[u])] * len(tree.children[u])))]
            for u in tree.internal
        })

    @classmethod
    def uniform(cls, tree: ScenarioTree, templates: Sequence[Kernel],
                overrides: Mapping[int, Sequence[Kernel]] | None = None) -> "KernelMenu":
        """Apply every template whose length matches a node's arity to that node."""
        overrides = overrides or {}
        menus = {}
        for u in tree.internal:
            u = int(u)
            if u in overrides:
                menus[u] = overrides[u]
            else:
                menus[u] = [k for k in templates if len(k.weights) == len(tree.children[u])]
        return cls(tree, menus)

    def kernels(self, u: int) -> list[Kernel]:
        return [Kernel(lab, tuple(w)) for lab, w in zip(self.labels[u], self.weights[u])]

    def size(self, u: int) -> int:
        return len(self.weights[u])

    def to_dict(self) -> dict:
        return {"menus": {
            str(u): [{"label": k.label, "weights": {str(c): float(w)
                                                    for c, w in zip(self.tree.children[u], k.weights)}}
                     for k in self.kernels(u)]
            for u in self.weights
        }}


@dataclass(frozen=True)
class TreeMeasure:
    """Probability of reaching every node; ``leaf_prob`` follows ``tree.leaves``."""

    node_prob: np.ndarray
    leaves: np.ndarray

    @property
    def leaf_prob(self) -> np.ndarray:
        return self.node_prob[self.leaves]

    @property
    def support(self) -> frozenset:
        return frozenset(int(x) for x in self.leaves[self.leaf_prob > 0])


def _check_policy(tree: ScenarioTree, menu: KernelMenu, policy: Mapping[int, int]) -> None:
    for u in tree.internal:
        u = int(u)
        k = policy.get(u)
        if k is None:
            raise IncompletePolicy(f"policy has no kernel at node {u}", u)
        if not 0 <= k < menu.size(u):
            raise IncompletePolicy(f"kernel index {k} out of range at node {u}", u)


def measure_of(tree: ScenarioTree, menu: KernelMenu, policy: Mapping[int, int]) -> TreeMeasure:
    _check_policy(tree, menu, policy)
    prob = np.zeros(len(tree))
    prob[0] = 1.0
    for u in tree.internal:
        u = int(u)
        kids = tree.children[u]
        prob[list(kids)] = prob[u] * menu.weights[u][policy[u]]
    return TreeMeasure(prob, tree.leaves)


def one_step_inf_expectation(weights, child_values) -> tuple[float, int]:
    """Smallest kernel expectation of ``child_values`` and the kernel attaining it.

    ``weights`` is a ``(n_kernels, n_children)`` array or a list of
    :class:`Kernel`.  Ties within ``TIE_TOL`` go to the lowest index.
    """
    if len(weights) == 0:
        raise EmptyMenu("empty kernel menu")
    if isinstance(weights[0], Kernel):
        weights = [k.weights for k in weights]
    w = np.asarray(weights, dtype=float)
    values = np.asarray(child_values, dtype=float)
    if w.ndim != 2 or w.shape[1] != values.shape[0]:
        raise ValidationError("one value per child is required")
    means = w @ values
    best = float(means.min())
    idx = int(np.flatnonzero(means <= best + TIE_TOL * max(1.0, abs(best)))[0])
    return best, idx


def inf_expectation(tree: ScenarioTree, menu: KernelMenu, leaf_values, frozen: Mapping[int, float] | None = None):
    """Backward iteration of the one-step inf expectation.

    Returns ``(values, argmin)`` per node.  Nodes listed in ``frozen`` keep the
    given value instead of being recomputed from their children.
    """
    values = np.full(len(tree), np.nan)
    values[tree.leaves] = np.asarray(leaf_values, dtype=float)
    argmin = np.full(len(tree), -1)
    frozen = frozen or {}
    for u in reversed(tree.internal):
        u = int(u)
        if u in frozen:
            values[u] = frozen[u]
            continue
        values[u], argmin[u] = one_step_inf_expectation(menu.weights[u], values[list(tree.children[u])])
    for u, v in frozen.items():
        values[u] = v
    return values, argmin


def policy_expectation(tree: ScenarioTree, menu: KernelMenu, policy: Mapping[int, int], leaf_values) -> float:
    measure = measure_of(tree, menu, policy)
    return float(measure.leaf_prob @ np.asarray(leaf_values, dtype=float))


def policy_count(tree: ScenarioTree, menu: KernelMenu) -> int:
    count = 1
    for u in tree.internal:
        count *= menu.size(int(u))
    return count


def enumerate_policies(tree: ScenarioTree, menu: KernelMenu, *, cap: int = DEFAULT_POLICY_CAP,
                       prefix: Sequence[int] = ()) -> Iterator[Policy]:
    """All policies, lexicographic in (node id, kernel index).

    ``prefix`` fixes the kernel indices of the first ``len(prefix)`` internal
    nodes, which splits the enumeration into disjoint partitions.
    """
    count = policy_count(tree, menu)
    if count > cap:
        raise EnumerationTooLarge(f"{count} policies exceed the cap of {cap}")
    nodes = [int(u) for u in tree.internal]
    ranges = [range(menu.size(u)) for u in nodes]
    for i, k in enumerate(prefix):
        ranges[i] = range(k, k + 1)
    for choice in itertools.product(*ranges):
        yield dict(zip(nodes, choice))


def policy_partitions(tree: ScenarioTree, menu: KernelMenu, parts: int) -> list[tuple[int, ...]]:
    """Leading-index prefixes splitting the policy space into at least ``parts`` blocks (when possible)."""
    nodes = [int(u) for u in tree.internal]
    prefixes: list[tuple[int, ...]] = [()]
    depth = 0
    while len(prefixes) < parts and depth < len(nodes):
        prefixes = [p + (k,) for p in prefixes for k in range(menu.size(nodes[depth]))]
        depth += 1
    return prefixes


def policy_choices(tree: ScenarioTree, menu: KernelMenu, *, cap: int = DEFAULT_POLICY_CAP) -> np.ndarray:
    """``(n_policies, n_internal)`` kernel indices in :func:`enumerate_policies` order."""
    count = policy_count(tree, menu)
    if count > cap:
        raise EnumerationTooLarge(f"{count} policies exceed the cap of {cap}")
    sizes = [menu.size(int(u)) for u in tree.internal]
    grids = np.meshgrid(*[np.arange(s, dtype=np.int16) for s in sizes], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def leaf_probabilities(tree: ScenarioTree, menu: KernelMenu, choices: np.ndarray) -> np.ndarray:
    """``(n_leaves, n_policies)`` leaf laws for a block of policies given as kernel indices."""
    choices = np.atleast_2d(choices)
    prob = np.empty((len(tree), len(choices)))
    prob[0] = 1.0
    for col, u in enumerate(tree.internal):
        u = int(u)
        w = menu.weights[u][choices[:, col]]          # (n_policies, n_children)
        prob[list(tree.children[u])] = prob[u] * w.T
    return prob[tree.leaves]


def paste_policies(tree: ScenarioTree, base: Mapping[int, int],
                   patches: Iterable[tuple[Iterable[int], Mapping[int, int]]], s: int) -> Policy:
    """Replace ``base`` below each depth-``s`` node set ``A_j`` by the kernels of ``P_j``.

    The result follows ``base`` before depth ``s`` and outside the patched
    subtrees, so its law agrees with ``base`` on every event observable at
    depth ``s``.
    """
    owner: dict[int, int] = {}
    patches = [(set(int(a) for a in nodes), policy) for nodes, policy in patches]
    for j, (nodes, _) in enumerate(patches):
        for a in nodes:
            if tree.depth[a] != s:
                raise DepthMismatch(f"node {a} is not at depth {s}", a)
            if a in owner:
                raise OverlappingPartition(f"node {a} appears in two patch sets", a)
            owner[a] = j
    result = dict(base)
    for u in tree.internal:
        u = int(u)
        if tree.depth[u] < s:
            continue
        j = owner.get(tree.ancestor_at(u, s))
        if j is not None:
            try:
                result[u] = patches[j][1][u]
            except KeyError:
                raise IncompletePolicy(f"patch policy {j} has no kernel at node {u}", u) from None
    return result


def mutually_singular(tree: ScenarioTree, menu: KernelMenu, p1: Mapping[int, int], p2: Mapping[int, int]) -> bool:
    return not (measure_of(tree, menu, p1).support & measure_of(tree, menu, p2).support)
