"""Scenario trees and kernel menus from a controlled path-dependent SDE.

One Euler step from a node with path ``w`` under control ``u`` and shock
``xi`` moves the state to::

    w[-1] + b(k, w, u) * dt + u * sqrt(dt) * xi

In *singular* mode (volatility uncertainty) every control value spawns its own
block of children and its kernel charges only that block, so different
controls induce mutually singular laws.  In *dominated* mode the children
are the shock outcomes under a fixed volatility ``sigma`` and each control
``u`` tilts the shock weights so the mean increment shifts by ``u * dt``
(drift uncertainty).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ambiguity import Kernel, KernelMenu, measure_of
from .errors import InvalidControl, SizeLimit, ValidationError
from .scenario_tree import ScenarioTree, TimeGrid, build_tree, max_nodes_default

DRIFT_FAMILIES = ("zero", "constant", "linear", "running_max")


def make_drift(desc: dict) -> Callable[[int, np.ndarray, float], np.ndarray]:
    """Built-in drift families, described by a JSON-friendly dict.

    zero: ``0``; constant: ``value``; linear: ``slope * x + intercept``;
    running_max: ``slope * max(path) + intercept``.  Any family may add
    ``control_slope * u``.  The path is the ``(k+1, d)`` state history.
    """
    family = desc.get("family", "zero")
    if family not in DRIFT_FAMILIES:
        raise ValidationError(f"unknown drift family {family!r}", "generator.sde.drift.family")
    value = float(desc.get("value", 0.0))
    slope = float(desc.get("slope", 0.0))
    intercept = float(desc.get("intercept", 0.0))
    beta = float(desc.get("control_slope", 0.0))

    def drift(k, path, u):
        path = np.atleast_2d(path)
        if family == "zero":
            base = np.zeros(path.shape[1])
        elif family == "constant":
            base = np.full(path.shape[1], value)
        elif family == "linear":
            base = slope * path[-1] + intercept
        else:
            base = slope * path.max(axis=0) + intercept
        return base + beta * u

    return drift


def _shock_table(shocks, d: int):
    if isinstance(shocks, str):
        if shocks == "binary":
            pts, probs = [-1.0, 1.0], [0.5, 0.5]
        elif shocks == "trinomial":
            r3 = math.sqrt(3.0)
            pts, probs = [-r3, 0.0, r3], [1 / 6, 2 / 3, 1 / 6]
        else:
            raise ValidationError(f"unknown shock set {shocks!r}", "generator.sde.shocks")
        # binary order: +1 before -1 reads more naturally for one step
        pts, probs = pts[::-1], probs[::-1]
        combos = list(itertools.product(range(len(pts)), repeat=d))
        values = np.array([[pts[i] for i in c] for c in combos])
        weights = np.array([math.prod(probs[i] for i in c) for c in combos])
        return values, weights
    values = np.atleast_2d(np.asarray(shocks["values"], dtype=float))
    if values.shape[1] != d:
        values = values.reshape(-1, d)
    weights = np.asarray(shocks["probs"], dtype=float)
    if abs(weights.sum() - 1.0) > 1e-12 or np.any(weights < 0):
        raise ValidationError("shock probabilities must be a distribution", "generator.sde.shocks.probs")
    return values, weights


@dataclass
class SdeSpec:
    dim: int = 1
    horizon: float = 1.0
    steps: int = 1
    controls: Sequence[float] = (1.0,)
    kappa: float = 1.0
    drift: dict = field(default_factory=lambda: {"family": "zero"})
    singular: bool = True
    shocks: object = "binary"
    sigma: float = 1.0
    drift_fn: Callable | None = None   # programmatic override of ``drift``

    def __post_init__(self):
        if not self.controls:
            raise ValidationError("at least one control value is required", "generator.sde.controls")
        if not self.kappa > 0:
            raise ValidationError("kappa must be positive", "generator.sde.kappa")
        for i, u in enumerate(self.controls):
            if abs(u) > self.kappa:
                raise InvalidControl(f"|u|={abs(u)} exceeds kappa={self.kappa}", i)
        TimeGrid(self.horizon, self.steps)

    @classmethod
    def from_dict(cls, block: dict) -> "SdeSpec":
        try:
            return cls(
                dim=int(block.get("d", 1)),
                horizon=float(block.get("T", 1.0)),
                steps=int(block["N"]),
                controls=[float(u) for u in block.get("controls", [1.0])],
                kappa=float(block.get("kappa", 1.0)),
                drift=dict(block.get("drift", {"family": "zero"})),
                singular=bool(block.get("singular", True)),
                shocks=block.get("shocks", "binary"),
                sigma=float(block.get("sigma", 1.0)),
            )
        except InvalidControl as exc:
            raise ValidationError(str(exc), f"generator.sde.controls[{exc.witness}]", exc.witness) from exc
        except KeyError as exc:
            raise ValidationError(f"missing field {exc}", "generator.sde") from exc

    def to_dict(self) -> dict:
        return {"d": self.dim, "T": self.horizon, "N": self.steps, "drift": dict(self.drift),
                "controls": list(self.controls), "kappa": self.kappa, "singular": self.singular,
                "shocks": self.shocks, "sigma": self.sigma}

    @property
    def drift_function(self):
        return self.drift_fn if self.drift_fn is not None else make_drift(self.drift)

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.horizon, self.steps)


def _tilted_weights(q, shocks, theta, u):
    w = q * (1.0 + theta * shocks.sum(axis=1))
    if np.any(w < -1e-15):
        raise InvalidControl(f"control {u} is too large for a valid reweighting at this step size", u)
    w = np.clip(w, 0.0, None)
    return w / w.sum()


def build_lattice(spec: SdeSpec, *, max_nodes: int | None = None) -> tuple[ScenarioTree, KernelMenu]:
    grid = spec.grid
    dt = grid.dt
    shocks, q = _shock_table(spec.shocks, spec.dim)
    b = spec.drift_function
    controls = list(spec.controls)
    per_node = len(controls) * len(shocks) if spec.singular else len(shocks)
    cap = max_nodes_default() if max_nodes is None else max_nodes
    total = sum(per_node**k for k in range(spec.steps + 1))
    if total > cap:
        raise SizeLimit(f"lattice would have {total} nodes, above the cap of {cap}")
    sq = math.sqrt(dt)

    if spec.singular:
        def branching(k, path):
            x = path[-1]
            return [x + b(k, path, u) * dt + u * sq * xi for u in controls for xi in shocks]
    else:
        u_ref = 0.0

        def branching(k, path):
            x = path[-1]
            return [x + b(k, path, u_ref) * dt + spec.sigma * sq * xi for xi in shocks]

    tree = build_tree(grid, branching, dim=spec.dim, max_nodes=cap)
    m = len(shocks)
    if spec.singular:
        kernels = []
        for i, u in enumerate(controls):
            w = np.zeros(per_node)
            w[i * m:(i + 1) * m] = q
            kernels.append(Kernel(u, tuple(w)))
    else:
        kernels = [Kernel(u, tuple(_tilted_weights(q, shocks, u * sq / spec.sigma, u))) for u in controls]
    menu = KernelMenu(tree, {int(v): kernels for v in tree.internal})
    return tree, menu


def lipschitz_probe(spec: SdeSpec, pairs: int = 1000, seed: int = 0) -> float:
    """Largest sampled ``|b(t,w,u) - b(t,w',u)| / sup|w - w'|`` over random path pairs."""
    rng = np.random.default_rng(seed)
    b = spec.drift_function
    worst = 0.0
    for _ in range(pairs):
        k = int(rng.integers(0, spec.steps))
        u = float(rng.choice(spec.controls))
        w1 = np.cumsum(rng.normal(size=(k + 1, spec.dim)), axis=0)
        w2 = w1 + rng.normal(size=(k + 1, spec.dim))
        w1[0] = w2[0] = 0.0
        dist = np.abs(w1 - w2).max()
        if dist == 0:
            continue
        worst = max(worst, float(np.abs(b(k, w1, u) - b(k, w2, u)).max() / dist))
    return worst


def check_increment_scaling(spec: SdeSpec, windows: Sequence[int], start: int = 0) -> list[tuple[float, float, float]]:
    """Rows ``(delta, E[max increment over the window], ratio to sqrt(delta))``.

    ``windows`` are window lengths in steps of size ``T/N``; the window opens
    at depth ``start``.  Expectations are exact sums over the lattice under
    each constant-control prior with its own shock weights, and the largest
    one is reported.
    """
    dt = spec.grid.dt
    depth = start + max(windows)
    local = SdeSpec(spec.dim, depth * dt, depth, spec.controls, spec.kappa, spec.drift,
                    spec.singular, spec.shocks, spec.sigma, spec.drift_fn)
    tree, menu = build_lattice(local)
    # running max of |X_r - X_start| along every path, zero before the window opens
    anchor = np.array([tree.ancestor_at(i, start) if tree.depth[i] >= start else i for i in range(len(tree))])
    dist = np.linalg.norm(tree.states - tree.states[anchor], axis=1)
    running = dist.copy()
    for i in range(1, len(tree)):
        p = tree.parent[i]
        if tree.depth[p] >= start:
            running[i] = max(running[i], running[p])
    n_controls = len(spec.controls)
    probs = [measure_of(tree, menu, {int(v): i for v in tree.internal}).node_prob for i in range(n_controls)]
    rows = []
    for w in windows:
        level = tree.depth == start + w
        expectation = max(float(p[level] @ running[level]) for p in probs)
        delta = w * dt
        rows.append((delta, expectation, expectation / math.sqrt(delta)))
    return rows
