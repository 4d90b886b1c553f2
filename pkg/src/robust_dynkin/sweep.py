"""Seeded random games and the full battery of cross-checks run on each one."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .ambiguity import Kernel, KernelMenu, policy_count
from .gamespec import GameSpec
from .oracle import count_stopping_times, game_values, verify_saddle, verify_tau_star
from .payoff import PayoffSpec, payoff_values, validate_payoff
from .scenario_tree import TimeGrid, additive_tree
from .solver import (
    REGION_TOL,
    StoppingRegion,
    backward_induction,
    backward_induction_grid,
    extract_gamma_star,
    extract_p_star,
    extract_tau_star,
    grid_eligible,
    verify_submartingale,
)

# tau count squared x policies x leaves; keeps one instance well under a second
WORK_BUDGET = 30_000_000
N_ZETA = 5


def _random_kernel(rng, arity: int, label: float) -> Kernel:
    if arity > 1 and rng.random() < 0.25:
        size = int(rng.integers(1, arity))
        support = rng.choice(arity, size=size, replace=False)
    else:
        support = np.arange(arity)
    w = np.zeros(arity)
    w[support] = rng.dirichlet(np.ones(len(support)))
    w[support[-1]] += 1.0 - w.sum()   # exact normalisation
    return Kernel(label, tuple(float(x) for x in w))


def random_game(rng: np.random.Generator, mode: str = "standard", budget: int = WORK_BUDGET) -> GameSpec:
    """Draw ``N`` in {1,2,3}, branching in {2,3}, menus of 1-3 kernels, payoffs in [-5, 5]."""
    N = int(rng.integers(1, 4))
    b = int(rng.integers(2, 4))
    tree = additive_tree(TimeGrid(1.0, N), [1.0, -1.0] if b == 2 else [1.0, 0.0, -1.0])
    n = len(tree)
    draws = rng.uniform(-5.0, 5.0, size=(n, 2))
    draws.sort(axis=1)
    L, U = draws[:, 0].copy(), draws[:, 1].copy()
    if mode == "triplet":
        U[tree.leaves] = L[tree.leaves]
        g = np.zeros(n)
    else:
        g = rng.uniform(-1.0, 1.0, size=n)
    payoff = PayoffSpec.table(L.tolist(), U.tolist(), g.tolist())

    n_tau = count_stopping_times(tree)
    leaves = len(tree.leaves)
    internal = [int(u) for u in tree.internal]
    sizes = None
    for _ in range(20):
        trial = rng.integers(1, 4, size=len(internal))
        if n_tau**2 * int(np.prod(trial)) * leaves <= budget:
            sizes = trial
            break
    if sizes is None:
        sizes = np.ones(len(internal), dtype=int)
        if n_tau**2 * 2 * leaves <= budget:
            sizes[0] = 2
    menus = {u: [_random_kernel(rng, len(tree.children[u]), float(k)) for k in range(int(m))]
             for u, m in zip(internal, sizes)}
    menu = KernelMenu(tree, menus)
    values = payoff_values(payoff, tree)
    validate_payoff(values, tree, mode)
    return GameSpec(tree, payoff, values, menu, mode)


def random_zeta(rng, tree, p: float = 0.3) -> StoppingRegion:
    pick = [int(u) for u in tree.internal if rng.random() < p]
    return StoppingRegion.of(tree, pick)


def _sandwich(solution) -> tuple[float, float]:
    tree = solution.tree
    L, U, v = solution.payoff.L, solution.payoff.U, solution.v
    ok = solution.eligible[tree.depth]
    low = np.where(ok, L - v, -np.inf)
    sandwich = float(max(low.max(), (v - U)[tree.internal].max(initial=-np.inf), 0.0))
    leaves = tree.leaves
    terminal = float(np.abs(v[leaves] - L[leaves]).max())
    return sandwich, terminal


def check_standard(game: GameSpec, rng: np.random.Generator) -> dict:
    """Every solver-vs-oracle comparison on one game.  Returns worst-case numbers."""
    tree, values, menu = game.tree, game.values, game.menu
    sol = backward_induction(tree, values, menu)
    v0 = sol.value
    orc = game_values(tree, values, menu)
    coincidence = max(abs(orc.lower - orc.upper), abs(orc.lower - v0), abs(orc.upper - v0))
    tau = extract_tau_star(sol)
    tau_gap = verify_tau_star(tree, values, menu, tau, solution=sol, raise_on_violation=False)

    submart = verify_submartingale(tree, values, menu, sol, raise_on_violation=False).worst
    for _ in range(N_ZETA):
        zeta = random_zeta(rng, tree)
        submart = min(submart, verify_submartingale(tree, values, menu, sol, zeta,
                                                     raise_on_violation=False).worst)

    sandwich, terminal = _sandwich(sol)
    saddle = verify_saddle(tree, values, menu, tau, extract_gamma_star(sol), extract_p_star(sol),
                           solution=sol, raise_on_violation=False).max_dev

    # dyadic approximations
    N = tree.steps
    full_level = math.ceil(math.log2(N)) if N > 1 else 0
    prev = None
    monotone = 0.0
    grid_oracle = 0.0
    full_grid_gap = 0.0
    for n in range(full_level + 1):
        sn = backward_induction_grid(tree, values, menu, n)
        s_sand, s_term = _sandwich(sn)
        sandwich, terminal = max(sandwich, s_sand), max(terminal, s_term)
        monotone = max(monotone, float((sn.v - sol.v).max()))
        if prev is not None:
            monotone = max(monotone, float((prev.v - sn.v).max()))
        if 2**n >= N:
            full_grid_gap = max(full_grid_gap, float(np.abs(sn.v - sol.v).max()))
        else:
            depths = np.flatnonzero(grid_eligible(tree, n))
            gv = game_values(tree, values, menu, eligible_depths=depths)
            grid_oracle = max(grid_oracle, abs(gv.upper - sn.value), abs(gv.lower - sn.value))
        prev = sn
    return {
        "V0": v0,
        "coincidence_gap": coincidence,
        "tau_star_gap": tau_gap,
        "submart_worst": submart,
        "sandwich_violation": sandwich,
        "terminal_violation": terminal,
        "grid_monotone_violation": max(monotone, 0.0),
        "grid_full_gap": full_grid_gap,
        "grid_oracle_gap": grid_oracle,
        "saddle_dev": saddle,
        "sizes": [int(tree.steps), len(tree), orc.n_tau, orc.n_policies],
    }


def check_triplet(game: GameSpec) -> dict:
    tree, values, menu = game.tree, game.values, game.menu
    sol = backward_induction(tree, values, menu)
    rep = verify_saddle(tree, values, menu, extract_tau_star(sol), extract_gamma_star(sol),
                        extract_p_star(sol), solution=sol, raise_on_violation=False)
    sandwich, terminal = _sandwich(sol)
    return {"V0": sol.value, "saddle_dev": rep.max_dev, "sandwich_violation": sandwich,
            "terminal_violation": terminal}


def _one(seed_seq) -> dict:
    std_seq, trip_seq, zeta_seq = seed_seq.spawn(3)
    std = random_game(np.random.default_rng(std_seq), "standard")
    trip = random_game(np.random.default_rng(trip_seq), "triplet")
    return {"standard": check_standard(std, np.random.default_rng(zeta_seq)),
            "triplet": check_triplet(trip)}


def run_sweep(count: int = 200, seed: int = 42, workers: int = 1) -> dict:
    """Check ``count`` standard and ``count`` triplet-mode games.

    Each instance draws from its own child of ``SeedSequence(seed)``, so the
    results do not depend on ``workers``.
    """
    seqs = np.random.SeedSequence(seed).spawn(count)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            per = list(pool.map(_one, seqs))
    else:
        per = [_one(s) for s in seqs]
    std = [p["standard"] for p in per]
    trip = [p["triplet"] for p in per]

    def worst(rows, key, fn=max):
        return fn(r[key] for r in rows) if rows else 0.0

    return {
        "count": count,
        "seed": seed,
        "worst": {
            "coincidence_gap": worst(std, "coincidence_gap"),
            "tau_star_gap": worst(std, "tau_star_gap"),
            "submart_worst": worst(std, "submart_worst", min),
            "sandwich_violation": max(worst(std, "sandwich_violation"), worst(trip, "sandwich_violation")),
            "terminal_violation": max(worst(std, "terminal_violation"), worst(trip, "terminal_violation")),
            "grid_monotone_violation": worst(std, "grid_monotone_violation"),
            "grid_full_gap": worst(std, "grid_full_gap"),
            "grid_oracle_gap": worst(std, "grid_oracle_gap"),
            "saddle_dev_triplet": worst(trip, "saddle_dev"),
            "saddle_dev_standard": worst(std, "saddle_dev"),
        },
        "instances": per,
    }


def sweep_outcomes(summary: dict, tol_oracle: float, tol_submart: float) -> dict[str, bool]:
    w = summary["worst"]
    return {
        "value_coincidence": w["coincidence_gap"] <= tol_oracle,
        "tau_star_optimality": w["tau_star_gap"] <= tol_oracle,
        "optimal_triplet": w["saddle_dev_triplet"] <= tol_oracle,
        "submartingale": w["submart_worst"] >= -tol_submart,
        "sandwich": w["sandwich_violation"] <= REGION_TOL,
        "terminal_identity": w["terminal_violation"] <= REGION_TOL,
        "grid_monotone": w["grid_monotone_violation"] <= REGION_TOL,
        "grid_full": w["grid_full_gap"] <= REGION_TOL,
        "grid_oracle": w["grid_oracle_gap"] <= tol_oracle,
    }
