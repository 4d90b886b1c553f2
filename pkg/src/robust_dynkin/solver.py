"""Backward induction for the robust Dynkin game on a scenario tree.

At an internal node with continuation value ``c`` (worst-case kernel
expectation of the children's values plus the running reward) the value is
the median of ``L``, ``c`` and ``U``::

    v = min(U, max(L, c))

When Player 1 is restricted to a dyadic stopping grid, nodes off the grid
lose the ``max(L, .)`` branch: ``v = min(U, c)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .ambiguity import KernelMenu, one_step_inf_expectation
from .errors import SubmartingaleViolated
from .payoff import PayoffSpec, PayoffValues, payoff_values
from .scenario_tree import ScenarioTree

REGION_TOL = 1e-12
SUBMART_TOL = 1e-9


def grid_eligible(tree: ScenarioTree, n: int | None) -> np.ndarray:
    """Boolean mask over depths ``0..N``: may Player 1 stop at this depth?

    A dyadic time ``i * 2**-n * T`` takes effect at the first tree date at or
    after it, so depth ``k >= 1`` is eligible iff ``((k-1)T/N, kT/N]`` holds a
    dyadic point, i.e. ``floor(k 2^n / N) > floor((k-1) 2^n / N)`` in integer
    arithmetic.  For ``N`` a power of two this is exactly "``t_k`` is dyadic";
    once ``2**n >= N`` every depth is eligible.  ``n=None`` means every depth.
    """
    N = tree.steps
    if n is None:
        return np.ones(N + 1, dtype=bool)
    if n < 0:
        raise ValueError("grid level must be >= 0")
    scale = 2**n
    mask = np.array([k == 0 or (k * scale) // N > ((k - 1) * scale) // N for k in range(N + 1)])
    mask[N] = True
    return mask


@dataclass
class GameSolution:
    tree: ScenarioTree
    payoff: PayoffValues
    v: np.ndarray
    cont: np.ndarray            # nan at leaves
    argmin_kernel: np.ndarray   # -1 at leaves
    p1_stop: np.ndarray
    p2_stop: np.ndarray
    eligible: np.ndarray        # per depth
    grid_level: float = math.inf

    @property
    def value(self) -> float:
        return float(self.v[0])


@dataclass(frozen=True)
class StoppingRegion:
    """Set of nodes; the induced stopping time is the first entry along each path.

    Leaves always belong to the region, so every path stops by depth ``N``.
    """

    nodes: frozenset

    @classmethod
    def of(cls, tree: ScenarioTree, nodes: Iterable[int]) -> "StoppingRegion":
        return cls(frozenset(int(u) for u in nodes) | frozenset(int(x) for x in tree.leaves))

    def first_entry(self, tree: ScenarioTree) -> np.ndarray:
        """Per node: the first region node on its root path (itself included), or -1."""
        hit = np.full(len(tree), -1)
        for u in range(len(tree)):
            p = tree.parent[u]
            if p >= 0 and hit[p] >= 0:
                hit[u] = hit[p]
            elif u in self.nodes:
                hit[u] = u
        return hit

    def stop_depths(self, tree: ScenarioTree) -> np.ndarray:
        """Realised stop depth on every leaf path (ordered as ``tree.leaves``)."""
        hit = self.first_entry(tree)[tree.leaves]
        return tree.depth[hit]

    def depth_histogram(self, tree: ScenarioTree) -> dict[int, int]:
        depths, counts = np.unique(self.stop_depths(tree), return_counts=True)
        return {int(d): int(c) for d, c in zip(depths, counts)}


def _solve(tree: ScenarioTree, payoff, menu: KernelMenu, eligible: np.ndarray, level: float) -> GameSolution:
    values = payoff if isinstance(payoff, PayoffValues) else payoff_values(payoff, tree)
    L, U, g, dt = values.L, values.U, values.g, values.dt
    n = len(tree)
    v = np.empty(n)
    cont = np.full(n, np.nan)
    argmin = np.full(n, -1)
    leaves = tree.leaves
    v[leaves] = L[leaves]
    for u in reversed(tree.internal):
        u = int(u)
        e, k = one_step_inf_expectation(menu.weights[u], v[list(tree.children[u])])
        c = e + g[u] * dt
        cont[u], argmin[u] = c, k
        if eligible[tree.depth[u]]:
            v[u] = min(U[u], max(L[u], c))
        else:
            v[u] = min(U[u], c)
    node_ok = eligible[tree.depth]
    p1_stop = node_ok & (np.abs(v - L) <= REGION_TOL)
    p2_stop = np.abs(v - U) <= REGION_TOL
    p2_stop[leaves] = True
    return GameSolution(tree, values, v, cont, argmin, p1_stop, p2_stop, eligible, level)


def backward_induction(tree: ScenarioTree, payoff: PayoffSpec | PayoffValues, menu: KernelMenu) -> GameSolution:
    return _solve(tree, payoff, menu, grid_eligible(tree, None), math.inf)


def backward_induction_grid(tree: ScenarioTree, payoff, menu: KernelMenu, n: int) -> GameSolution:
    return _solve(tree, payoff, menu, grid_eligible(tree, n), n)


def extract_tau_star(solution: GameSolution) -> StoppingRegion:
    """Player 1 stops the first time the value touches the lower obstacle."""
    return StoppingRegion.of(solution.tree, np.flatnonzero(solution.p1_stop))


def extract_gamma_star(solution: GameSolution) -> StoppingRegion:
    """Player 2 stops the first time the value touches the upper obstacle."""
    return StoppingRegion.of(solution.tree, np.flatnonzero(solution.p2_stop))


def extract_p_star(solution: GameSolution) -> dict[int, int]:
    return {int(u): int(solution.argmin_kernel[u]) for u in solution.tree.internal}


def upsilon(tree: ScenarioTree, payoff, solution: GameSolution) -> np.ndarray:
    """Value plus the running reward accrued strictly before each node."""
    values = solution.payoff if payoff is None else (
        payoff if isinstance(payoff, PayoffValues) else payoff_values(payoff, tree))
    accrued = np.zeros(len(tree))
    for u in range(1, len(tree)):
        p = tree.parent[u]
        accrued[u] = accrued[p] + values.g[p] * values.dt
    return solution.v + accrued


@dataclass(frozen=True)
class SubmartingaleCheck:
    worst: float
    witness: int
    margins: np.ndarray   # nan where tau* has already fired (the check is vacuous there)


def verify_submartingale(tree: ScenarioTree, payoff, menu: KernelMenu, solution: GameSolution,
                         zeta: StoppingRegion | None = None, *, tol: float = SUBMART_TOL,
                         raise_on_violation: bool = True) -> SubmartingaleCheck:
    """Check ``Upsilon`` stopped at ``tau* ^ zeta`` against its inf-expectation.

    For each node not yet stopped, the margin is the worst-case expectation
    of the stopped process seen from that node minus the current
    ``Upsilon``.  Nodes below a stopping point compare a known value with
    itself and get margin 0.
    """
    ups = upsilon(tree, payoff, solution)
    tau = extract_tau_star(solution)
    stop = set(tau.nodes)
    if zeta is not None:
        stop |= zeta.nodes
    region = StoppingRegion.of(tree, stop)
    hit = region.first_entry(tree)
    frozen = {int(u): float(ups[u]) for u in region.nodes}
    target = np.empty(len(tree))
    for u in reversed(range(len(tree))):
        if u in frozen:
            target[u] = frozen[u]
        else:
            target[u], _ = one_step_inf_expectation(menu.weights[u], target[list(tree.children[u])])
    margins = np.where(hit >= 0, 0.0, target - ups)
    worst_idx = int(np.argmin(margins))
    worst = float(margins[worst_idx])
    if raise_on_violation and worst < -tol:
        raise SubmartingaleViolated(f"submartingale property fails by {-worst} at node {worst_idx}", worst_idx)
    return SubmartingaleCheck(worst, worst_idx, margins)


def convergence_report(tree: ScenarioTree, payoff, menu: KernelMenu, n_max: int) -> list[tuple[int, float, float]]:
    """Rows ``(n, V^n_0, Vbar_0 - V^n_0)`` for ``n = 0..n_max``."""
    full = backward_induction(tree, payoff, menu).value
    rows = []
    for n in range(n_max + 1):
        vn = backward_induction_grid(tree, payoff, menu, n).value
        rows.append((n, vn, full - vn))
    return rows


def reflected_residual(solution: GameSolution) -> float:
    """Largest deviation from the reflected recursion at grid-eligible internal nodes."""
    tree = solution.tree
    internal = tree.internal
    ok = internal[solution.eligible[tree.depth[internal]]]
    L, U = solution.payoff.L[ok], solution.payoff.U[ok]
    expected = np.minimum(U, np.maximum(L, solution.cont[ok]))
    return float(np.max(np.abs(expected - solution.v[ok]), initial=0.0))
