"""Run configuration: JSON parsing into models, families and solver settings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .credible import RegionConfig, RegionFamily, TrivialFamily, default_posterior_lipschitz
from .errors import MatchPriorError
from .matching import SolverConfig, param_schedule
from .model import Model, model_from_table
from .posterior import PerturbationSystem


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass
class RunConfig:
    """Everything a CLI command needs, resolved from JSON plus flag overrides."""

    model: Model
    family: object
    solver: SolverConfig
    region: RegionConfig | None
    system: PerturbationSystem
    alpha: float
    out_dir: Path
    params: dict = field(default_factory=dict)


EXAMPLE_CONFIG = {
    "grid": {"lo": 0.0, "hi": 1.0, "n": 2048},
    "model": "bernoulli",
    "alpha": 0.1,
    "region": {"kind": "perturbed-ball"},
    "schedule": {"a": 0.02, "epsilon": 0.03},
    "perturbation": {"kind": "trivial"},
    "solver": {"damping": 0.01, "max_iters": 5000, "tol": 5e-3, "restarts": 0},
    "seed": 0,
}


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def build_run_config(data: dict, out_dir, overrides: dict | None = None) -> RunConfig:
    """Resolve a parsed config; ``overrides`` holds non-None CLI flag values."""
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    try:
        return _build(data, Path(out_dir), overrides)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, MatchPriorError) as exc:
        raise ConfigError(f"invalid config: {exc!r}") from exc


def _build(data: dict, out_dir: Path, overrides: dict) -> RunConfig:
    model = model_from_table(data)
    alpha = float(overrides.get("alpha", data.get("alpha", 0.1)))
    region_data = dict(data.get("region", {"kind": "perturbed-ball"}))
    kind = region_data.pop("kind", "perturbed-ball")

    pert = dict(data.get("perturbation", {"kind": "trivial"}))
    schedule = dict(data.get("schedule", {}))
    if "a" in overrides:
        schedule["a"] = overrides["a"]

    params = {"alpha": alpha, "region": kind, "perturbation": pert.get("kind", "trivial")}
    region = None
    system = PerturbationSystem(pert.get("kind", "trivial"), float(pert.get("gamma", 1e-4)))
    if kind == "trivial":
        family = TrivialFamily(alpha)
    else:
        C = region_data.pop("C", None)
        if C is None:
            C = default_posterior_lipschitz(model)
        fields = {"alpha": alpha, "posterior_lipschitz": float(C)}
        if "a" in schedule:
            eps = float(schedule.get("epsilon", 0.03))
            eta, delta, gamma, beta = param_schedule(float(schedule["a"]), alpha, eps, float(C))
            fields.update(eta=eta, delta=delta, gamma=gamma, beta=beta)
            params.update(a=float(schedule["a"]), epsilon=eps)
            if system.kind == "convolution" and "gamma" not in pert:
                system = PerturbationSystem("convolution", gamma)
        for key in ("beta", "delta", "eta", "gamma", "n_z", "bisect_tol"):
            if key in region_data:
                fields[key] = region_data[key]
        region = RegionConfig(kind=kind, **fields)
        family = RegionFamily(region, system)
        params.update(beta=region.beta, delta=region.delta, eta=region.eta, gamma=region.gamma,
                      n_z=region.n_z, C=region.posterior_lipschitz)

    solver_data = dict(data.get("solver", {}))
    if "convention" in solver_data:
        solver_data["plus_convention"] = solver_data.pop("convention")
    for flag, key in (("tol", "tol"), ("max_iters", "max_iters"), ("damping", "damping")):
        if flag in overrides:
            solver_data[key] = overrides[flag]
    seed = int(overrides.get("seed", data.get("seed", 0)))
    solver = SolverConfig(**solver_data, seed=seed,
                          schedule_a=params.get("a"), epsilon=params.get("epsilon"),
                          posterior_map_C=params.get("C"))
    params.update(damping=solver.damping, max_iters=solver.max_iters, tol=solver.tol,
                  convention=solver.plus_convention, grid_n=model.grid.size)
    return RunConfig(model, family, solver, region, system, alpha, out_dir, params)


def with_solver(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, solver=replace(cfg.solver, **changes))
