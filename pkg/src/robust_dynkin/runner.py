"""Command dispatch behind the ``rdg`` CLI.

:func:`run` returns a plain-JSON report::

    {"command", "spec_digest", "results", "tolerance_outcomes", "ok", "wall_time"}

Everything except ``wall_time`` is a deterministic function of the game,
the seed and the flags.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import time
from dataclasses import dataclass

import numpy as np

from .ambiguity import measure_of, paste_policies, policy_count
from .gamespec import GameSpec
from .oracle import game_values, verify_saddle, verify_tau_star
from .sde_lattice import check_increment_scaling, lipschitz_probe
from .solver import (
    REGION_TOL,
    backward_induction,
    convergence_report,
    extract_gamma_star,
    extract_p_star,
    extract_tau_star,
    reflected_residual,
    verify_submartingale,
)
from .sweep import run_sweep, sweep_outcomes

COMMANDS = ("solve", "oracle", "converge", "paste-check", "sde-check", "sweep")
CSV_COLUMNS = ("node_id", "depth", "L", "U", "g", "cont", "v", "tau_star", "gamma_star")
PASTE_TOL = 1e-12
SCALING_FACTOR = 4.0
LIPSCHITZ_SLACK = 1e-9


@dataclass
class Flags:
    workers: int = 1
    seed: int = 42
    n_max: int | None = None
    count: int | None = None
    dump_values: str | None = None
    all_orders: bool = False
    tol_oracle: float | None = None
    tol_submart: float | None = None


def plain(obj):
    """Recursively convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _tols(game: GameSpec | None, flags: Flags) -> tuple[float, float]:
    base = game.tolerances if game is not None else {"oracle": 1e-9, "submart": 1e-9}
    oracle = flags.tol_oracle if flags.tol_oracle is not None else base["oracle"]
    submart = flags.tol_submart if flags.tol_submart is not None else base["submart"]
    return oracle, submart


def dump_values(path, game: GameSpec, solution) -> None:
    tau = extract_tau_star(solution).nodes
    gamma = extract_gamma_star(solution).nodes
    vals = game.values
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for u in range(len(game.tree)):
            writer.writerow([u, int(game.tree.depth[u]), repr(float(vals.L[u])), repr(float(vals.U[u])),
                             repr(float(vals.g[u])), "" if math.isnan(solution.cont[u]) else repr(float(solution.cont[u])),
                             repr(float(solution.v[u])), int(u in tau), int(u in gamma)])


def _solve(game: GameSpec, flags: Flags):
    _, tol_sub = _tols(game, flags)
    sol = backward_induction(game.tree, game.values, game.menu)
    tau, gamma = extract_tau_star(sol), extract_gamma_star(sol)
    check = verify_submartingale(game.tree, game.values, game.menu, sol, raise_on_violation=False)
    if flags.dump_values:
        dump_values(flags.dump_values, game, sol)
    results = {
        "V0": sol.value,
        "tau_star_depth_histogram": tau.depth_histogram(game.tree),
        "gamma_star_depth_histogram": gamma.depth_histogram(game.tree),
        "p_star": extract_p_star(sol),
        "submartingale_worst": check.worst,
        "reflected_residual": reflected_residual(sol),
    }
    outcomes = {"submartingale": check.worst >= -tol_sub,
                "reflected_recursion": results["reflected_residual"] <= REGION_TOL}
    return results, outcomes


def _oracle(game: GameSpec, flags: Flags):
    tol, _ = _tols(game, flags)
    caps = game.caps
    kw = dict(rule_cap=caps["stopping_times"], policy_cap=caps["policies"])
    tree, vals, menu = game.tree, game.values, game.menu
    sol = backward_induction(tree, vals, menu)
    orc = game_values(tree, vals, menu, workers=flags.workers, triple_cap=caps["triples"], **kw)
    coincidence = max(abs(orc.lower - orc.upper), abs(orc.lower - sol.value), abs(orc.upper - sol.value))
    tau = extract_tau_star(sol)
    tau_gap = verify_tau_star(tree, vals, menu, tau, solution=sol, raise_on_violation=False, **kw)
    saddle = verify_saddle(tree, vals, menu, tau, extract_gamma_star(sol), extract_p_star(sol),
                           solution=sol, raise_on_violation=False, **kw)
    results = {
        "lower": orc.lower,
        "upper": orc.upper,
        "solver_V0": sol.value,
        "coincidence_gap": coincidence,
        "tau_star_gap": tau_gap,
        "saddle_dev": saddle.max_dev,
        "counts": {"stopping_times": orc.n_tau, "policies": orc.n_policies},
    }
    if flags.all_orders:
        results["orders"] = orc.orders
    outcomes = {"value_coincidence": coincidence <= tol, "tau_star_optimality": tau_gap <= tol,
                "saddle": saddle.max_dev <= tol}
    return results, outcomes


def _converge(game: GameSpec, flags: Flags):
    N = game.tree.steps
    n_max = flags.n_max if flags.n_max is not None else (math.ceil(math.log2(N)) if N > 1 else 0)
    rows = convergence_report(game.tree, game.values, game.menu, n_max)
    gaps = [gap for _, _, gap in rows]
    nonneg = all(g >= -REGION_TOL for g in gaps)
    nonincreasing = all(b <= a + REGION_TOL for a, b in zip(gaps, gaps[1:]))
    closed = all(abs(gap) <= REGION_TOL for n, _, gap in rows if 2**n >= N)
    results = {"rows": [{"n": n, "Vn0": vn, "gap": gap} for n, vn, gap in rows]}
    return results, {"gap_nonnegative": nonneg, "gap_nonincreasing": nonincreasing, "gap_closes": closed}


def pasting_formula(tree, menu, base, patches, s) -> np.ndarray:
    """Leaf law of the pasted prior, written out path by path.

    Off the patched sets it is the base law; below a patched node ``a`` it is
    the base probability of reaching ``a`` times the product of the patch
    policy's kernel weights from ``a`` down to the leaf.
    """
    owner = {}
    for j, (nodes, _) in enumerate(patches):
        for a in nodes:
            owner[int(a)] = j
    base_prob = measure_of(tree, menu, base).node_prob
    out = np.empty(len(tree.leaves))
    for i, leaf in enumerate(tree.leaves):
        path = tree.ancestors(int(leaf))
        j = owner.get(path[s]) if s < len(path) else None
        if j is None:
            out[i] = base_prob[leaf]
            continue
        policy = patches[j][1]
        p = base_prob[path[s]]
        for u, child in zip(path[s:-1], path[s + 1:]):
            p *= menu.weights[u][policy[u]][tree.children[u].index(child)]
        out[i] = p
    return out


def random_policy(rng, tree, menu) -> dict[int, int]:
    return {int(u): int(rng.integers(menu.size(int(u)))) for u in tree.internal}


def paste_trial(rng, tree, menu) -> dict:
    """One random paste; returns closure flag and worst deviations."""
    s = int(rng.integers(0, tree.steps))
    level = [int(a) for a in np.flatnonzero(tree.depth == s)]
    chosen = [a for a in level if rng.random() < 0.6] or [level[0]]
    groups = int(rng.integers(1, min(3, len(chosen)) + 1))
    labels = rng.integers(0, groups, size=len(chosen))
    patches = [([a for a, l in zip(chosen, labels) if l == j], random_policy(rng, tree, menu)) for j in range(groups)]
    patches = [p for p in patches if p[0]]
    base = random_policy(rng, tree, menu)
    pasted = paste_policies(tree, base, patches, s)
    closed = all(0 <= pasted.get(int(u), -1) < menu.size(int(u)) for u in tree.internal)
    got = measure_of(tree, menu, pasted)
    want = measure_of(tree, menu, base)
    marginal = float(np.abs(got.node_prob[level] - want.node_prob[level]).max())
    formula = float(np.abs(got.leaf_prob - pasting_formula(tree, menu, base, patches, s)).max())
    return {"closed": closed, "marginal_error": marginal, "conditional_error": formula}


def _paste_check(game: GameSpec, flags: Flags):
    rng = np.random.default_rng(flags.seed)
    count = flags.count if flags.count is not None else 100
    trials = [paste_trial(rng, game.tree, game.menu) for _ in range(count)]
    worst_m = max((t["marginal_error"] for t in trials), default=0.0)
    worst_c = max((t["conditional_error"] for t in trials), default=0.0)
    closed = all(t["closed"] for t in trials)
    results = {"pastes": count, "all_closed": closed, "worst_marginal_error": worst_m,
               "worst_conditional_error": worst_c, "policies": policy_count(game.tree, game.menu)}
    return results, {"closure": closed, "marginals": worst_m <= PASTE_TOL, "conditionals": worst_c <= PASTE_TOL}


def _sde_check(game: GameSpec, flags: Flags):
    if game.sde is None:
        raise ValueError("sde-check needs a game with a 'generator' block")
    spec = dataclasses.replace(game.sde, steps=8)
    rows = check_increment_scaling(spec, [4, 2, 1])
    ratios = [r for _, _, r in rows]
    spread = max(ratios) / min(ratios)
    lip = lipschitz_probe(game.sde, seed=flags.seed)
    results = {"rows": [{"delta": d, "expectation": e, "ratio": r} for d, e, r in rows],
               "ratio_spread": spread, "lipschitz_ratio": lip, "kappa": game.sde.kappa}
    return results, {"scaling_bounded": spread <= SCALING_FACTOR,
                     "lipschitz": lip <= game.sde.kappa * (1 + LIPSCHITZ_SLACK)}


def _sweep(game: GameSpec | None, flags: Flags):
    tol_o, tol_s = _tols(game, flags)
    summary = run_sweep(flags.count if flags.count is not None else 200, flags.seed, flags.workers)
    return summary, sweep_outcomes(summary, tol_o, tol_s)


_DISPATCH = {"solve": _solve, "oracle": _oracle, "converge": _converge,
             "paste-check": _paste_check, "sde-check": _sde_check, "sweep": _sweep}


def run(command: str, game: GameSpec | None, flags: Flags | None = None, spec_digest: str | None = None) -> dict:
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    if game is None and command != "sweep":
        raise ValueError(f"command {command!r} needs a game spec")
    flags = flags or Flags()
    start = time.perf_counter()
    results, outcomes = _DISPATCH[command](game, flags)
    outcomes = {k: bool(v) for k, v in outcomes.items()}
    return {
        "command": command,
        "spec_digest": spec_digest,
        "results": plain(results),
        "tolerance_outcomes": outcomes,
        "ok": all(outcomes.values()),
        "wall_time": time.perf_counter() - start,
    }
