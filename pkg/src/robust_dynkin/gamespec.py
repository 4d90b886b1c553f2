"""JSON game descriptions: parsing, validation and serialization.

A game file holds exactly one of

* ``"tree"``: ``{"grid": {"T", "N"}, "nodes": [...]}`` or, as a shorthand,
  ``{"grid": ..., "increments": [[...], ...]}`` for an additive tree;
* ``"generator"``: ``{"sde": {...}}``, expanded by the lattice builder, which
  also supplies the kernel menus;

plus ``"payoff"``, an optional ``"ambiguity"`` block (default: one
equal-weight kernel per node), ``"mode"`` (``standard`` or ``triplet``), an
optional payoff ``"bound"`` for triplet mode, and optional ``"caps"`` and
``"tolerances"``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .ambiguity import DEFAULT_POLICY_CAP, Kernel, KernelMenu
from .errors import DynkinError, ParseError, ValidationError
from .oracle import DEFAULT_RULE_CAP, DEFAULT_TRIPLE_CAP, ORACLE_TOL
from .payoff import PayoffSpec, PayoffValues, payoff_values, validate_payoff
from .scenario_tree import ScenarioTree, TimeGrid, additive_tree
from .sde_lattice import SdeSpec, build_lattice
from .solver import SUBMART_TOL

DEFAULT_CAPS = {"stopping_times": DEFAULT_RULE_CAP, "policies": DEFAULT_POLICY_CAP,
                "triples": DEFAULT_TRIPLE_CAP}
DEFAULT_TOLERANCES = {"oracle": ORACLE_TOL, "submart": SUBMART_TOL}


@dataclass
class GameSpec:
    tree: ScenarioTree
    payoff: PayoffSpec
    values: PayoffValues
    menu: KernelMenu
    mode: str = "standard"
    bound: float | None = None
    sde: SdeSpec | None = None
    caps: dict = field(default_factory=lambda: dict(DEFAULT_CAPS))
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def to_dict(self) -> dict:
        out = {}
        if self.sde is not None:
            out["generator"] = {"sde": self.sde.to_dict()}
        else:
            out["tree"] = self.tree.to_dict()
            out["ambiguity"] = self.menu.to_dict()
        out["payoff"] = payoff_to_dict(self.payoff)
        out["mode"] = self.mode
        if self.bound is not None:
            out["bound"] = self.bound
        out["caps"] = dict(self.caps)
        out["tolerances"] = dict(self.tolerances)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def payoff_to_dict(spec: PayoffSpec) -> dict:
    if spec.kind == "table":
        out = {"kind": "table",
               "L": {str(k): float(v) for k, v in spec.L.items()},
               "U": {str(k): float(v) for k, v in spec.U.items()}}
        if spec.g:
            out["g"] = {str(k): float(v) for k, v in spec.g.items()}
        return out
    return {"kind": spec.kind, "params": dict(spec.params)}


def digest(text: str | bytes) -> str:
    data = text.encode() if isinstance(text, str) else text
    return hashlib.sha256(data).hexdigest()


def _node_key_map(block, path: str, n: int) -> dict[int, float]:
    if not isinstance(block, dict):
        raise ValidationError("expected an object keyed by node id", path)
    out = {}
    for key, value in block.items():
        try:
            node = int(key)
        except ValueError:
            raise ValidationError(f"node id {key!r} is not an integer", path) from None
        if not 0 <= node < n:
            raise ValidationError(f"node id {node} does not exist", f"{path}.{key}", node)
        out[node] = float(value)
    return out


def _parse_payoff(block, tree: ScenarioTree) -> PayoffSpec:
    if not isinstance(block, dict) or "kind" not in block:
        raise ValidationError("payoff block needs a 'kind'", "payoff")
    kind = block["kind"]
    if kind == "table":
        n = len(tree)
        return PayoffSpec("table", {}, _node_key_map(block.get("g", {}), "payoff.g", n),
                          _node_key_map(block.get("L", {}), "payoff.L", n),
                          _node_key_map(block.get("U", {}), "payoff.U", n))
    return PayoffSpec(kind, dict(block.get("params", {})))


def _parse_kernel(raw, u: int, tree: ScenarioTree, path: str) -> Kernel:
    kids = tree.children[u]
    weights = raw.get("weights") if isinstance(raw, dict) else None
    if weights is None:
        raise ValidationError("kernel needs 'weights'", path, u)
    if isinstance(weights, dict):
        w = [0.0] * len(kids)
        for key, value in weights.items():
            child = int(key)
            if child not in kids:
                raise ValidationError(f"node {child} is not a child of node {u}", f"{path}.weights.{key}", u)
            w[kids.index(child)] = float(value)
    else:
        w = [float(x) for x in weights]
    return Kernel(raw.get("label", 0.0), tuple(w))


def _parse_menu(block, tree: ScenarioTree) -> KernelMenu:
    if block is None:
        return KernelMenu.single(tree)
    overrides = {}
    for key, kernels in block.get("menus", {}).items():
        u = int(key)
        if not 0 <= u < len(tree) or tree.is_leaf(u):
            raise ValidationError(f"node {u} is not an internal node", f"ambiguity.menus.{key}", u)
        overrides[u] = [_parse_kernel(k, u, tree, f"ambiguity.menus.{key}[{i}]") for i, k in enumerate(kernels)]
    templates = [Kernel(k.get("label", 0.0), tuple(float(x) for x in k["weights"]))
                 for k in block.get("uniform", [])]
    if not templates and len(overrides) < len(tree.internal):
        missing = next(int(u) for u in tree.internal if int(u) not in overrides)
        raise ValidationError(f"no kernel menu for node {missing}", f"ambiguity.menus.{missing}", missing)
    return KernelMenu.uniform(tree, templates, overrides)


def _parse_tree(block) -> ScenarioTree:
    grid_raw = block.get("grid", {})
    grid = TimeGrid(float(grid_raw.get("T", 1.0)), int(grid_raw["N"]))
    if "nodes" in block:
        return ScenarioTree.from_nodes(grid, block["nodes"])
    if "increments" in block:
        return additive_tree(grid, block["increments"])
    raise ValidationError("tree block needs 'nodes' or 'increments'", "tree")


def spec_from_dict(raw: dict) -> GameSpec:
    if not isinstance(raw, dict):
        raise ValidationError("top level must be an object")
    has_tree, has_gen = "tree" in raw, "generator" in raw
    if has_tree == has_gen:
        raise ValidationError("exactly one of 'tree' or 'generator' is required")
    mode = raw.get("mode", "standard")
    if mode not in ("standard", "triplet"):
        raise ValidationError(f"unknown mode {mode!r}", "mode")
    try:
        sde = None
        if has_tree:
            tree = _parse_tree(raw["tree"])
            menu = _parse_menu(raw.get("ambiguity"), tree)
        else:
            if "sde" not in raw["generator"]:
                raise ValidationError("generator block needs 'sde'", "generator")
            sde = SdeSpec.from_dict(raw["generator"]["sde"])
            tree, menu = build_lattice(sde)
        if "payoff" not in raw:
            raise ValidationError("payoff block is required", "payoff")
        payoff = _parse_payoff(raw["payoff"], tree)
        values = payoff_values(payoff, tree)
        bound = raw.get("bound")
        validate_payoff(values, tree, mode, bound)
    except ValidationError:
        raise
    except DynkinError as exc:
        raise ValidationError(str(exc), witness=exc.witness) from exc
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed field: {exc}") from exc
    caps = dict(DEFAULT_CAPS, **raw.get("caps", {}))
    tols = dict(DEFAULT_TOLERANCES, **raw.get("tolerances", {}))
    return GameSpec(tree, payoff, values, menu, mode, bound, sde, caps, tols)


def parse_spec(text: str | bytes) -> GameSpec:
    try:
        raw = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return spec_from_dict(raw)


def load_spec(path) -> tuple[GameSpec, str]:
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_spec(data), digest(data)
