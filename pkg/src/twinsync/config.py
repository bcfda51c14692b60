"""JSON run configuration: loading, schema checking, and conversion to domain objects."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .costs import CostFunctionSpec, DISTANCES
from .errors import ConfigError, TwinSyncError
from .policies import PolicySpec
from .scenario import ScenarioSpec, make_scenario

_NUM = {"type": "number"}
_POLICY = {
    "oneOf": [
        {"enum": ["prtp", "pptp", "periodic", "never"]},
        {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["prtp", "pptp", "periodic", "never"]},
                "rate": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
    ]
}

SCHEMA = {
    "type": "object",
    "required": ["systems"],
    "properties": {
        "systems": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["Q"],
                "properties": {
                    "name": {"type": "string"},
                    "Q": {"type": "array", "minItems": 2,
                          "items": {"type": "array", "items": _NUM}},
                    "weight": {"type": "number", "minimum": 0},
                    "labels": {"type": "array", "items": _NUM},
                },
                "additionalProperties": False,
            },
        },
        "delta": {"type": "number", "minimum": 0},
        "delta_grid": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
        "lambda_grid": {"type": "array", "minItems": 1,
                        "items": {"type": "number", "exclusiveMinimum": 0}},
        "overlap": {"enum": ["preempt", "parallel"]},
        "initial": {
            "oneOf": [
                {"const": "stationary"},
                {"type": "object", "required": ["fixed"],
                 "properties": {"fixed": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
                 "additionalProperties": False},
            ]
        },
        "policy": _POLICY,
        "policies": {"type": "array", "minItems": 1, "items": _POLICY},
        "costs": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["type"],
                "properties": {
                    "type": {"enum": ["c1", "c2", "c3"]},
                    "distance": {"enum": list(DISTANCES)},
                    "weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
                },
                "additionalProperties": False,
            },
        },
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "replications": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "tau_grid": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
        "t_grid": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
    },
    "additionalProperties": False,
}


@dataclass
class RunConfig:
    scenario: ScenarioSpec
    deltas: list
    lambdas: list
    policies: list
    costs: list
    horizon: float
    replications: int
    seed: int
    tau_grid: list
    t_grid: list
    raw: dict


def _where(err: jsonschema.ValidationError) -> str:
    path = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
    return path.lstrip(".") or "<root>"


def parse_config(data: dict, *, require_grids: bool = False) -> RunConfig:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(f"schema violation at {_where(err)}: {err.message}")
    if require_grids:
        for key in ("delta_grid", "lambda_grid"):
            if not data.get(key):
                raise ConfigError(f"schema violation at {key}: sweep needs a non-empty {key}")

    systems = data["systems"]
    initial = data.get("initial", "stationary")
    if isinstance(initial, dict):
        initial = tuple(initial["fixed"])
    try:
        scenario = make_scenario(
            [s["Q"] for s in systems],
            weights=[s.get("weight", 1.0) for s in systems],
            labels=[s.get("labels") for s in systems],
            names=[s.get("name", f"ps{i + 1}") for i, s in enumerate(systems)],
            delta=data.get("delta", 0.0),
            overlap=data.get("overlap", "preempt"),
            initial=initial,
        )
    except (TwinSyncError, ValueError) as exc:
        raise ConfigError(f"invalid systems: {exc}") from exc

    pol_items = data.get("policies") or ([data["policy"]] if "policy" in data else ["prtp"])
    policies = []
    for item in pol_items:
        if isinstance(item, str):
            policies.append((item, None))
        else:
            policies.append((item["kind"], item.get("rate")))

    try:
        costs = [CostFunctionSpec(c["type"], c.get("weights"), c.get("distance"))
                 for c in data.get("costs", [{"type": "c1"}])]
        for c in costs:
            c.resolved_weights(scenario.K, scenario.weights)
    except (TwinSyncError, ValueError) as exc:
        raise ConfigError(f"invalid costs: {exc}") from exc

    deltas = list(data.get("delta_grid") or [scenario.delta])
    lambdas = list(data.get("lambda_grid") or [])
    return RunConfig(scenario, deltas, lambdas, policies, costs,
                     float(data.get("horizon", 1000.0)), int(data.get("replications", 100)),
                     int(data.get("seed", 0)), list(data.get("tau_grid", [0.1, 0.5, 1.0, 2.0])),
                     list(data.get("t_grid", [0.1 * j for j in range(21)])), data)


def load_config(path, *, require_grids: bool = False) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(data, require_grids=require_grids)


def policy_cells(cfg: RunConfig):
    """Expand configured policies over the lambda grid: yields (label, rate, PolicySpec)."""
    for kind, rate in cfg.policies:
        if kind == "never":
            yield kind, 0.0, PolicySpec.never()
        elif rate is not None:
            yield kind, float(rate), PolicySpec(kind, rate)
        else:
            if not cfg.lambdas:
                raise ConfigError(f"policies[{kind}]: no rate given and no lambda_grid")
            for lam in cfg.lambdas:
                yield kind, float(lam), PolicySpec(kind, lam)
