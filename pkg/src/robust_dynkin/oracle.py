"""Brute-force ground truth on small trees.

Every adapted stopping rule for each player and every policy of Nature is
enumerated, and the three optimisations are carried out literally in the
requested order.  Nothing here calls the backward-induction solver except
the ``verify_*`` helpers, which compare against it.

Expected payoffs for a block of (tau, gamma, policy) triples are computed
as one tensor contraction: ``K[tau, gamma, leaf] @ P[leaf, policy]`` where
``K`` holds the pathwise payoff and ``P`` the leaf laws.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .ambiguity import (
    DEFAULT_POLICY_CAP,
    KernelMenu,
    leaf_probabilities,
    measure_of,
    policy_choices,
    policy_count,
)
from .errors import EnumerationTooLarge, OptimalityViolated, SaddleViolated
from .payoff import PayoffValues, StopPair, eval_R, payoff_values, reward_table
from .solver import GameSolution, StoppingRegion, backward_induction

ORACLE_TOL = 1e-9
DEFAULT_RULE_CAP = 100_000
DEFAULT_TRIPLE_CAP = 10**10
_BLOCK = 4_000_000   # floats per contraction block


@dataclass(frozen=True)
class StoppingTimeEnum:
    """Antichain of the nodes where the rule stops; each root-to-leaf path meets exactly one."""

    nodes: tuple[int, ...]

    def stop_depths(self, tree) -> np.ndarray:
        return StoppingRegion.of(tree, self.nodes).stop_depths(tree)


def _eligible_set(tree, eligible_depths) -> set[int]:
    N = tree.steps
    depths = set(range(N + 1)) if eligible_depths is None else {int(k) for k in eligible_depths}
    if N not in depths:
        raise ValueError("the terminal depth must be eligible")
    return depths


def count_stopping_times(tree, eligible_depths=None) -> int:
    depths = _eligible_set(tree, eligible_depths)
    count = np.zeros(len(tree), dtype=object)
    for u in reversed(range(len(tree))):
        kids = tree.children[u]
        here = 1 if tree.depth[u] in depths else 0
        count[u] = here if not kids else here + int(np.prod([count[c] for c in kids], dtype=object))
    return int(count[0])


def enumerate_stopping_times(tree, eligible_depths=None, *, cap: int = DEFAULT_RULE_CAP) -> Iterator[StoppingTimeEnum]:
    """Every adapted rule with stop depths in ``eligible_depths``; "stop here" comes first."""
    depths = _eligible_set(tree, eligible_depths)
    total = count_stopping_times(tree, depths)
    if total > cap:
        raise EnumerationTooLarge(f"{total} stopping rules exceed the cap of {cap}")

    def rules(u):
        if tree.depth[u] in depths:
            yield (u,)
        kids = tree.children[u]
        if kids:
            for combo in itertools.product(*[list(rules(c)) for c in kids]):
                yield tuple(itertools.chain.from_iterable(combo))

    for nodes in rules(0):
        yield StoppingTimeEnum(nodes)


def stop_depth_matrix(tree, eligible_depths=None, *, cap: int = DEFAULT_RULE_CAP):
    rules = list(enumerate_stopping_times(tree, eligible_depths, cap=cap))
    return rules, np.array([r.stop_depths(tree) for r in rules], dtype=np.int64)


def _values(tree, payoff) -> PayoffValues:
    return payoff if isinstance(payoff, PayoffValues) else payoff_values(payoff, tree)


def _as_depths(tree, rule) -> np.ndarray:
    if isinstance(rule, (StoppingTimeEnum, StoppingRegion)):
        return rule.stop_depths(tree)
    return np.asarray(rule, dtype=np.int64)


def expected_payoff(tree, payoff, menu: KernelMenu, tau, gamma, policy: Mapping[int, int]) -> float:
    """Leafwise sum of probability times pathwise payoff."""
    values = _values(tree, payoff)
    measure = measure_of(tree, menu, policy)
    a, b = _as_depths(tree, tau), _as_depths(tree, gamma)
    total = 0.0
    for i, leaf in enumerate(tree.leaves):
        total += measure.leaf_prob[i] * eval_R(None, tree, int(leaf), StopPair(int(a[i]), int(b[i])), values)
    return total


class PayoffCube:
    """Expected payoffs ``E[tau, gamma, policy]`` streamed in policy blocks."""

    def __init__(self, tree, payoff, menu: KernelMenu, tau_depths, gamma_depths, *,
                 policy_cap: int = DEFAULT_POLICY_CAP, triple_cap: int = DEFAULT_TRIPLE_CAP):
        self.tree = tree
        self.menu = menu
        self.tau = np.atleast_2d(tau_depths)
        self.gamma = np.atleast_2d(gamma_depths)
        self.n_policies = policy_count(tree, menu)
        if self.n_policies > policy_cap:
            raise EnumerationTooLarge(f"{self.n_policies} policies exceed the cap of {policy_cap}")
        triples = len(self.tau) * len(self.gamma) * self.n_policies
        if triples > triple_cap:
            raise EnumerationTooLarge(f"{triples} triple evaluations exceed the cap of {triple_cap}")
        self.choices = policy_choices(tree, menu, cap=policy_cap)
        R = reward_table(_values(tree, payoff), tree)
        leaf = np.arange(R.shape[0])
        # K[t, g, leaf] = pathwise payoff of (tau_t, gamma_g) on that leaf
        self.K = R[leaf[None, None, :], self.tau[:, None, :], self.gamma[None, :, :]]

    @property
    def block_size(self) -> int:
        nt, ng = self.K.shape[:2]
        return max(1, _BLOCK // max(1, nt * ng))

    def blocks(self, start: int = 0, stop: int | None = None):
        """Yield ``(offset, E)`` with ``E`` shaped ``(n_tau, n_gamma, block)``.

        Blocks sit on fixed multiples of :attr:`block_size`, so a policy's
        column is computed by the same matmul shape whichever range asked
        for it (BLAS results can depend on the operand shape in the last bit).
        """
        stop = self.n_policies if stop is None else stop
        nt, ng, nl = self.K.shape
        step = self.block_size
        flat = self.K.reshape(nt * ng, nl)
        for lo in range(start, stop, step):
            hi = min(stop, (lo // step + 1) * step)
            probs = leaf_probabilities(self.tree, self.menu, self.choices[lo:hi])
            yield lo, (flat @ probs).reshape(nt, ng, hi - lo)

    def policy(self, index: int) -> dict[int, int]:
        return {int(u): int(k) for u, k in zip(self.tree.internal, self.choices[index])}


@dataclass
class _Partial:
    # running reductions over a contiguous policy range
    min_over_p: np.ndarray           # (n_tau, n_gamma)  min over policies
    upper: float                     # min over P, gamma of max over tau
    upper_arg: tuple
    p_tau_gamma: float               # min over P of max over tau of min over gamma


def _reduce_range(cube: PayoffCube, start: int, stop: int) -> _Partial:
    nt, ng = cube.K.shape[:2]
    min_over_p = np.full((nt, ng), np.inf)
    upper, upper_arg, ptg = np.inf, None, np.inf
    for lo, E in cube.blocks(start, stop):
        np.minimum(min_over_p, E.min(axis=2), out=min_over_p)
        # policy-major layout: ties resolve to the first (policy, gamma) in
        # enumeration order whatever the block boundaries are
        inner = E.max(axis=0).T                     # (block, n_gamma)
        b, j = np.unravel_index(np.argmin(inner), inner.shape)
        if inner[b, j] < upper:
            upper, upper_arg = float(inner[b, j]), (int(j), lo + int(b))
        ptg = min(ptg, float(E.min(axis=1).max(axis=0).min()))
    return _Partial(min_over_p, upper, upper_arg, ptg)


def _split(n: int, workers: int, block: int = 1) -> list[tuple[int, int]]:
    """Cut ``range(n)`` into at most ``workers`` ranges on multiples of ``block``."""
    n_blocks = -(-n // block)
    workers = max(1, min(workers, n_blocks))
    edges = np.linspace(0, n_blocks, workers + 1).astype(int) * block
    edges[-1] = n
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


@dataclass
class OracleValues:
    lower: float            # sup_tau inf_gamma inf_P
    upper: float            # inf_P inf_gamma sup_tau
    orders: dict            # every ordering of the three operators
    n_tau: int
    n_gamma: int
    n_policies: int
    lower_tau: int          # index of the maximising tau rule
    upper_gamma: int
    upper_policy: dict


def game_values(tree, payoff, menu: KernelMenu, *, eligible_depths=None, workers: int = 1,
                rule_cap: int = DEFAULT_RULE_CAP, policy_cap: int = DEFAULT_POLICY_CAP,
                triple_cap: int = DEFAULT_TRIPLE_CAP) -> OracleValues:
    """Exhaustive lower and upper values (and the other operator orderings).

    ``eligible_depths`` restricts Player 1's stopping depths (Player 2 is
    never restricted).  Policy blocks are reduced independently by up to
    ``workers`` threads and merged in a fixed order; min/max reductions are
    exact, so the result does not depend on ``workers``.
    """
    _, taus = stop_depth_matrix(tree, eligible_depths, cap=rule_cap)
    _, gammas = stop_depth_matrix(tree, None, cap=rule_cap)
    cube = PayoffCube(tree, payoff, menu, taus, gammas, policy_cap=policy_cap, triple_cap=triple_cap)
    ranges = _split(cube.n_policies, workers, cube.block_size)
    if len(ranges) == 1:
        parts = [_reduce_range(cube, *ranges[0])]
    else:
        with ThreadPoolExecutor(len(ranges)) as pool:
            parts = list(pool.map(lambda r: _reduce_range(cube, *r), ranges))
    min_over_p = parts[0].min_over_p
    upper, upper_arg, ptg = parts[0].upper, parts[0].upper_arg, parts[0].p_tau_gamma
    for part in parts[1:]:
        np.minimum(min_over_p, part.min_over_p, out=min_over_p)
        if part.upper < upper:
            upper, upper_arg = part.upper, part.upper_arg
        ptg = min(ptg, part.p_tau_gamma)
    inner_g = min_over_p.min(axis=1)                 # inf_gamma inf_P, per tau
    lower = float(inner_g.max())
    orders = {
        "sup_tau inf_gamma inf_P": lower,
        "sup_tau inf_P inf_gamma": lower,
        "inf_gamma sup_tau inf_P": float(min_over_p.max(axis=0).min()),
        "inf_P sup_tau inf_gamma": ptg,
        "inf_gamma inf_P sup_tau": upper,
        "inf_P inf_gamma sup_tau": upper,
    }
    return OracleValues(lower, upper, orders, len(taus), len(gammas), cube.n_policies,
                        int(np.argmax(inner_g)), upper_arg[0], cube.policy(upper_arg[1]))


def lower_value_bruteforce(tree, payoff, menu: KernelMenu, **kwargs) -> float:
    return game_values(tree, payoff, menu, **kwargs).lower


def upper_value_bruteforce(tree, payoff, menu: KernelMenu, **kwargs) -> float:
    return game_values(tree, payoff, menu, **kwargs).upper


def _best_response_min(tree, payoff, menu, tau_depths, *, rule_cap, policy_cap):
    """min over (gamma, P) of the expected payoff against a fixed tau, with the minimiser."""
    rules, gammas = stop_depth_matrix(tree, None, cap=rule_cap)
    cube = PayoffCube(tree, payoff, menu, tau_depths[None, :], gammas, policy_cap=policy_cap)
    best, arg = np.inf, None
    for lo, E in cube.blocks():
        j, b = np.unravel_index(np.argmin(E[0]), E[0].shape)
        if E[0, j, b] < best:
            best, arg = float(E[0, j, b]), (rules[j], cube.policy(lo + int(b)))
    return best, arg


def verify_tau_star(tree, payoff, menu: KernelMenu, tau_star: StoppingRegion, *,
                    solution: GameSolution | None = None, tol: float = ORACLE_TOL,
                    rule_cap: int = DEFAULT_RULE_CAP, policy_cap: int = DEFAULT_POLICY_CAP,
                    raise_on_violation: bool = True) -> float:
    """Gap between the worst case of ``tau_star`` and the solver value."""
    solution = backward_induction(tree, payoff, menu) if solution is None else solution
    worst, arg = _best_response_min(tree, payoff, menu, tau_star.stop_depths(tree),
                                    rule_cap=rule_cap, policy_cap=policy_cap)
    gap = abs(worst - solution.value)
    if raise_on_violation and gap > tol:
        raise OptimalityViolated(f"tau* falls short of the value by {gap}", arg)
    return gap


@dataclass(frozen=True)
class SaddleReport:
    value: float
    max_dev: float
    value_gap: float
    tau_deviation: float     # best unilateral gain for Player 1 against (gamma*, worst P)
    gamma_deviation: float   # best joint gain for Player 2 and Nature against tau*


def verify_saddle(tree, payoff, menu: KernelMenu, tau_star: StoppingRegion, gamma_star: StoppingRegion,
                  p_star: Mapping[int, int], *, solution: GameSolution | None = None,
                  tol: float = ORACLE_TOL, rule_cap: int = DEFAULT_RULE_CAP,
                  policy_cap: int = DEFAULT_POLICY_CAP, raise_on_violation: bool = True) -> SaddleReport:
    solution = backward_induction(tree, payoff, menu) if solution is None else solution
    a, b = tau_star.stop_depths(tree), gamma_star.stop_depths(tree)
    value = expected_payoff(tree, payoff, menu, a, b, p_star)

    rules, taus = stop_depth_matrix(tree, None, cap=rule_cap)
    cube = PayoffCube(tree, payoff, menu, taus, b[None, :], policy_cap=policy_cap)
    worst_case = np.full(len(taus), np.inf)
    for _, E in cube.blocks():
        np.minimum(worst_case, E[:, 0, :].min(axis=1), out=worst_case)
    tau_dev = float(worst_case.max()) - value
    p2_best, _ = _best_response_min(tree, payoff, menu, a, rule_cap=rule_cap, policy_cap=policy_cap)
    gamma_dev = value - p2_best
    value_gap = abs(value - solution.value)
    max_dev = max(value_gap, tau_dev, gamma_dev, 0.0)
    report = SaddleReport(value, max_dev, value_gap, tau_dev, gamma_dev)
    if raise_on_violation and max_dev > tol:
        raise SaddleViolated(f"saddle property fails by {max_dev}", report)
    return report
