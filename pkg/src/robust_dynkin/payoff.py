"""Running reward ``g``, obstacles ``L <= U`` and the game payoff.

Player 1 (the maximiser) receives the running reward accumulated up to the
first stop plus ``L`` if she stops first or at the same time as Player 2, and
``U`` if Player 2 stops strictly first.  The running integral is a
left-endpoint sum so that the reward collected at depth ``k`` only uses
information available at ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import BoundViolated, MissingTableEntry, ValidationError
from .scenario_tree import ScenarioTree

KINDS = ("table", "linear", "asian_put", "lookback_spread")


@dataclass(frozen=True)
class StopPair:
    tau_depth: int
    gamma_depth: int


@dataclass(frozen=True)
class PayoffSpec:
    """A payoff family plus its parameters.

    For ``kind="table"`` the ``g``, ``L`` and ``U`` mappings give per-node
    values (``g`` may be left empty, meaning zero everywhere).  The other
    families read their constants from ``params``:

    linear
        ``{"g": [a, b, c], "L": [...], "U": [...]}``; each functional is
        ``a + b * sum(state) + c * t``.
    asian_put
        ``L = (K - running mean of the first coordinate)^+ - shift``,
        ``U = L + spread``, ``g = 0``.
    lookback_spread
        ``L = running max of the first coordinate - K``, ``U = L + spread``,
        ``g = rate``.

    ``collapse_terminal`` (families only) sets ``U = L`` at the leaves.
    """

    kind: str
    params: Mapping = field(default_factory=dict)
    g: Mapping[int, float] = field(default_factory=dict)
    L: Mapping[int, float] = field(default_factory=dict)
    U: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown payoff kind {self.kind!r}", "payoff.kind")

    @classmethod
    def table(cls, L, U, g=None) -> "PayoffSpec":
        as_map = lambda v: dict(enumerate(v)) if not isinstance(v, Mapping) else dict(v)
        return cls("table", {}, as_map(g) if g is not None else {}, as_map(L), as_map(U))

    def evaluate(self, tree: ScenarioTree) -> "PayoffValues":
        return payoff_values(self, tree)


@dataclass(frozen=True)
class PayoffValues:
    """Per-node arrays of ``g``, ``L`` and ``U`` on a specific tree."""

    g: np.ndarray
    L: np.ndarray
    U: np.ndarray
    dt: float

    @property
    def psi(self) -> np.ndarray:
        return np.maximum(np.maximum(-self.L, self.U), 0.0)


def _table_array(table: Mapping, n: int, name: str, required: bool) -> np.ndarray:
    if not table and not required:
        return np.zeros(n)
    return np.array([_lookup(table, i, name) for i in range(n)])


def _running(tree: ScenarioTree):
    """Running sum and running max of the first coordinate along each path."""
    x = tree.states[:, 0]
    total = x.copy()
    peak = x.copy()
    for i in range(1, len(tree)):
        p = tree.parent[i]
        total[i] += total[p]
        peak[i] = max(peak[i], peak[p])
    return total, peak


def payoff_values(spec: PayoffSpec, tree: ScenarioTree) -> PayoffValues:
    n = len(tree)
    dt = tree.grid.dt
    params = dict(spec.params)
    if spec.kind == "table":
        g = _table_array(spec.g, n, "g", required=False)
        L = _table_array(spec.L, n, "L", required=True)
        U = _table_array(spec.U, n, "U", required=True)
        return PayoffValues(g, L, U, dt)

    t = tree.depth * dt
    if spec.kind == "linear":
        x = tree.states.sum(axis=1)

        def affine(key):
            a, b, c = (list(params.get(key, [0.0, 0.0, 0.0])) + [0.0, 0.0, 0.0])[:3]
            return a + b * x + c * t

        g, L, U = affine("g"), affine("L"), affine("U")
    elif spec.kind == "asian_put":
        total, _ = _running(tree)
        mean = total / (tree.depth + 1)
        L = np.maximum(params.get("K", 0.0) - mean, 0.0) - params.get("shift", 0.0)
        U = L + params.get("spread", 1.0)
        g = np.zeros(n)
    else:  # lookback_spread
        _, peak = _running(tree)
        L = peak - params.get("K", 0.0)
        U = L + params.get("spread", 1.0)
        g = np.full(n, float(params.get("rate", 0.0)))
    if params.get("collapse_terminal", False):
        leaves = tree.leaves
        U = U.copy()
        U[leaves] = L[leaves]
    return PayoffValues(np.asarray(g, float), np.asarray(L, float), np.asarray(U, float), dt)


def validate_payoff(values: PayoffValues, tree: ScenarioTree, mode: str = "standard", bound=None) -> None:
    """Reject payoffs breaking ``L <= U`` before the horizon, or the triplet-mode rules."""
    for name in ("g", "L", "U"):
        arr = getattr(values, name)
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise ValidationError(f"non-finite value at node {bad[0]}", f"payoff.{name}[{bad[0]}]", int(bad[0]))
    interior = tree.internal
    bad = interior[values.L[interior] > values.U[interior]]
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"L={values.L[i]} > U={values.U[i]} at node {i}", f"payoff.L[{i}]", i)
    if mode == "triplet":
        if np.any(values.g != 0):
            i = int(np.flatnonzero(values.g)[0])
            raise ValidationError("triplet mode requires g == 0", f"payoff.g[{i}]", i)
        leaves = tree.leaves
        bad = leaves[values.L[leaves] != values.U[leaves]]
        if bad.size:
            i = int(bad[0])
            raise ValidationError("triplet mode requires L == U at leaves", f"payoff.U[{i}]", i)
        if bound is not None:
            big = np.flatnonzero(np.maximum(np.abs(values.L), np.abs(values.U)) > bound)
            if big.size:
                i = int(big[0])
                raise ValidationError(f"|payoff| exceeds bound {bound}", f"payoff.L[{i}]", i)
    elif mode != "standard":
        raise ValidationError(f"unknown mode {mode!r}", "mode")


def eval_g(spec: PayoffSpec, tree: ScenarioTree, node: int) -> float:
    tree._check(node)
    if spec.kind == "table":
        return _lookup(spec.g, node, "g") if spec.g else 0.0
    return float(payoff_values(spec, tree).g[node])


def _lookup(table: Mapping, node: int, name: str) -> float:
    if node in table:
        return float(table[node])
    if str(node) in table:
        return float(table[str(node)])
    raise MissingTableEntry(f"payoff table {name} has no entry for node {node}", node)


def eval_psi(spec: PayoffSpec, tree: ScenarioTree, node: int) -> float:
    tree._check(node)
    values = payoff_values(spec, tree)
    return float(values.psi[node])


def reward_table(values: PayoffValues, tree: ScenarioTree) -> np.ndarray:
    """``R[leaf_index, a, b]``: payoff on each leaf path for stop depths ``a`` (P1), ``b`` (P2)."""
    paths = tree.leaf_paths()
    N = tree.steps
    g = values.g[paths] * values.dt
    accrued = np.concatenate([np.zeros((len(paths), 1)), np.cumsum(g, axis=1)[:, :-1]], axis=1)
    a = np.arange(N + 1)[:, None]
    b = np.arange(N + 1)[None, :]
    first = np.minimum(a, b)
    lower = values.L[paths][:, first]
    upper = values.U[paths][:, first]
    return accrued[:, first] + np.where(a <= b, lower, upper)


def eval_R(spec, tree: ScenarioTree, leaf: int, pair: StopPair, values: PayoffValues | None = None) -> float:
    """Payoff along the path ending at ``leaf`` for realised stop depths ``pair``."""
    tree._check(leaf)
    if not tree.is_leaf(leaf):
        raise ValidationError(f"node {leaf} is not a leaf", "leaf")
    N = tree.steps
    tau, gamma = pair.tau_depth, pair.gamma_depth
    if not (0 <= tau <= N and 0 <= gamma <= N):
        raise ValidationError(f"stop depths {pair} outside [0, {N}]", "pair")
    values = payoff_values(spec, tree) if values is None else values
    path = tree.ancestors(leaf)
    first = min(tau, gamma)
    accrued = sum(values.g[path[k]] for k in range(first)) * values.dt
    end = path[first]
    return float(accrued + (values.L[end] if tau <= gamma else values.U[end]))


def check_payoff_bound(spec, tree: ScenarioTree, tol: float = 1e-12, values: PayoffValues | None = None) -> float:
    """Worst slack of ``|R| <= sum |g| dt + Psi`` over every leaf and stop pair."""
    values = payoff_values(spec, tree) if values is None else values
    R = reward_table(values, tree)
    paths = tree.leaf_paths()
    N = tree.steps
    absg = np.abs(values.g[paths]) * values.dt
    accrued = np.concatenate([np.zeros((len(paths), 1)), np.cumsum(absg, axis=1)[:, :-1]], axis=1)
    first = np.minimum(np.arange(N + 1)[:, None], np.arange(N + 1)[None, :])
    envelope = accrued[:, first] + values.psi[paths][:, first]
    slack = np.abs(R) - envelope
    worst = float(slack.max())
    if worst > tol:
        leaf_idx, a, b = np.unravel_index(np.argmax(slack), slack.shape)
        witness = (int(tree.leaves[leaf_idx]), StopPair(int(a), int(b)))
        raise BoundViolated(f"payoff bound violated by {worst}", witness)
    return worst
