"""Dominated models on finite sample spaces and their Lipschitz extensions."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyExtensionBase, InvalidDensity, UnboundedLogDensity
from .measure import ParameterGrid, _frozen, slope_quotient

ROW_TOL = 1e-9
INGEST_TOL = 1e-6
DEFAULT_EXTENSION_MARGIN = 1.0


@dataclass(frozen=True, eq=False)
class SampleSpace:
    """Finite sample space with dominating-measure weights ``nu``."""

    labels: tuple
    nu: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        nu = _frozen(self.nu)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "nu", nu)
        if nu.shape != (len(labels),):
            raise ValueError("one nu weight per label is required")
        if np.any(nu <= 0):
            raise ValueError("nu weights must be positive")
        if len(set(labels)) != len(labels):
            raise ValueError("sample labels must be distinct")

    @property
    def size(self) -> int:
        return len(self.labels)

    def distance(self, i: int, j: int) -> float:
        """|x_i - x_j| for numeric labels, otherwise the discrete metric."""
        a, b = self.labels[i], self.labels[j]
        try:
            return abs(float(a) - float(b))
        except (TypeError, ValueError):
            return 0.0 if a == b else 1.0


@dataclass(frozen=True, eq=False)
class Model:
    """Density table ``q[i, j] = q(theta_i, x_j)`` with respect to ``nu``."""

    grid: ParameterGrid
    sample_space: SampleSpace
    q: np.ndarray

    def __post_init__(self):
        q = _frozen(self.q)
        object.__setattr__(self, "q", q)
        if q.shape != (self.grid.size, self.sample_space.size):
            raise ValueError("q must have shape (grid size, sample size)")
        if np.any(q < 0) or not np.all(np.isfinite(q)):
            raise InvalidDensity("densities must be finite and nonnegative")
        rows = q @ self.sample_space.nu
        bad = np.abs(rows - 1.0) > ROW_TOL
        if np.any(bad):
            i = int(np.argmax(bad))
            raise InvalidDensity(f"row {i} integrates to {rows[i]!r}")

    def probabilities(self) -> np.ndarray:
        """P_theta({x}) = q(theta, x) nu(x) as a (grid, sample) array."""
        return self.q * self.sample_space.nu


def bernoulli_model(grid: ParameterGrid) -> Model:
    """Bernoulli model: q(theta, 1) = theta, q(theta, 0) = 1 - theta."""
    if grid.lo < 0 or grid.hi > 1:
        raise DomainError("Bernoulli parameter grid must lie in [0, 1]")
    theta = grid.points
    q = np.column_stack([1.0 - theta, theta])
    if np.any(q == 0):
        warnings.warn("Bernoulli grid touches 0 or 1; log q is unbounded there", stacklevel=2)
    return Model(grid, SampleSpace((0, 1), np.ones(2)), q)


def grid_from_config(cfg: dict) -> ParameterGrid:
    """Build a grid from ``{"lo", "hi", "n"}`` or ``{"points", ["lo", "hi"]}``."""
    if "points" in cfg:
        return ParameterGrid.from_points(cfg["points"], cfg.get("lo"), cfg.get("hi"))
    return ParameterGrid.uniform(float(cfg["lo"]), float(cfg["hi"]), int(cfg["n"]))


def model_from_table(config: dict) -> Model:
    """Validate a parsed model description.

    Accepts ``{"grid": ..., "model": "bernoulli"}`` or
    ``{"grid": ..., "model": "table", "sample_space": {"labels", "nu"}, "q": rows}``.
    Rows within 1e-6 of unit mass are renormalized, others rejected.
    """
    grid = grid_from_config(config["grid"])
    kind = config.get("model", "table")
    if kind == "bernoulli":
        return bernoulli_model(grid)
    if kind != "table":
        raise ValueError(f"unknown model kind {kind!r}")
    space_cfg = config["sample_space"]
    labels = space_cfg["labels"]
    nu = np.asarray(space_cfg.get("nu", np.ones(len(labels))), dtype=float)
    space = SampleSpace(tuple(labels), nu)
    q = np.asarray(config["q"], dtype=float)
    if q.shape != (grid.size, space.size):
        raise ValueError(f"table shape {q.shape} does not match ({grid.size}, {space.size})")
    if np.any(q < 0):
        raise InvalidDensity("densities must be nonnegative")
    rows = q @ nu
    bad = np.abs(rows - 1.0) > INGEST_TOL
    if np.any(bad):
        i = int(np.argmax(bad))
        raise InvalidDensity(f"row {i} integrates to {rows[i]!r}")
    return Model(grid, space, q / rows[:, None])


def mcshane_extend(base_points, values, M: float, target_points, chunk: int = 512) -> np.ndarray:
    """Smallest M-Lipschitz extension: f(x) = min_e f(e) + M |x - e|.

    Values at target points that coincide with base points are copied
    exactly.
    """
    base = np.asarray(base_points, dtype=float)
    vals = np.asarray(values, dtype=float)
    target = np.asarray(target_points, dtype=float)
    if base.size == 0:
        raise EmptyExtensionBase("cannot extend from an empty set")
    order = np.argsort(base)
    base, vals = base[order], vals[order]
    if slope_quotient(base, vals) > M * (1 + 1e-12):
        raise ValueError("M is below the Lipschitz constant of the base values")
    out = np.empty(target.size)
    for start in range(0, target.size, chunk):
        block = target[start : start + chunk]
        cand = vals[None, :] + M * np.abs(block[:, None] - base[None, :])
        out[start : start + chunk] = cand.min(axis=1)
    pos = np.clip(np.searchsorted(base, target), 0, base.size - 1)
    shared = base[pos] == target
    out[shared] = vals[pos[shared]]
    return out


def model_lipschitz_constant(m: Model) -> float:
    """Largest adjacent-point slope of theta -> q(theta, x) over all x."""
    return max(slope_quotient(m.grid.points, m.q[:, j]) for j in range(m.sample_space.size))


def extension_grid(grid: ParameterGrid, margin: float = DEFAULT_EXTENSION_MARGIN) -> ParameterGrid:
    return grid.extended(margin)[0]


def supermodel_extend(m: Model, target: ParameterGrid | None = None) -> Model:
    """Extend ``m`` to a larger parameter grid, keeping rows normalized.

    Each x-slice is extended by McShane with the model's Lipschitz constant,
    then rows are divided by their nu-integral. Rows at the original grid
    points are copied unchanged.
    """
    if np.any(m.q <= 0):
        raise UnboundedLogDensity("supermodel extension needs q > 0 on the grid")
    if target is None:
        target = extension_grid(m.grid)
    idx = m.grid.embedding_in(target)
    lip = model_lipschitz_constant(m)
    qhat = np.column_stack(
        [mcshane_extend(m.grid.points, m.q[:, j], lip, target.points) for j in range(m.sample_space.size)]
    )
    z = qhat @ m.sample_space.nu
    p = qhat / z[:, None]
    p[idx] = m.q
    return Model(target, m.sample_space, p)

