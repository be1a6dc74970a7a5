"""Parameter grids, measures on them, and Wasserstein-1 distances."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, InvalidDensity, UnbalancedTransport

MASS_TOL = 1e-12
DENSITY_TOL = 1e-9
MAX_FLOW_ATOMS = 4096


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ParameterGrid:
    """Ordered quadrature grid on the interval [lo, hi].

    Each point owns a cell of length ``cell_weights[i]``; the cells tile
    [lo, hi]. Distances are Euclidean.
    """

    points: np.ndarray
    cell_weights: np.ndarray
    lo: float
    hi: float

    def __post_init__(self):
        pts = _frozen(self.points)
        wts = _frozen(self.cell_weights)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "cell_weights", wts)
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        if pts.ndim != 1 or pts.shape != wts.shape or pts.size == 0:
            raise ValueError("points and cell_weights must be equal-length 1-D arrays")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if np.any(wts <= 0):
            raise ValueError("cell weights must be positive")
        if pts[0] < self.lo or pts[-1] > self.hi:
            raise ValueError("grid points must lie in [lo, hi]")
        span = self.hi - self.lo
        if abs(math.fsum(wts) - span) > MASS_TOL * max(1.0, span):
            raise ValueError("cell weights must sum to hi - lo")

    @classmethod
    def uniform(cls, lo: float, hi: float, n: int) -> "ParameterGrid":
        """Midpoint grid with ``n`` equal cells."""
        if n < 1 or hi <= lo:
            raise ValueError("need n >= 1 and hi > lo")
        h = (hi - lo) / n
        points = lo + (np.arange(n) + 0.5) * h
        return cls(points, np.full(n, h), lo, hi)

    @classmethod
    def from_points(cls, points, lo: float | None = None, hi: float | None = None):
        """Grid on arbitrary points; cells split at midpoints between neighbours."""
        pts = np.asarray(points, dtype=float)
        lo = float(pts[0]) if lo is None else float(lo)
        hi = float(pts[-1]) if hi is None else float(hi)
        edges = np.concatenate([[lo], 0.5 * (pts[1:] + pts[:-1]), [hi]])
        if pts.size == 1:
            edges = np.array([lo, hi])
        return cls(pts, np.diff(edges), lo, hi)

    @property
    def size(self) -> int:
        return int(self.points.size)

    def same_as(self, other: "ParameterGrid") -> bool:
        return self is other or (
            self.size == other.size
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.cell_weights, other.cell_weights)
        )

    def nearest_index(self, value: float) -> int:
        return int(np.argmin(np.abs(self.points - value)))

    def embedding_in(self, other: "ParameterGrid") -> np.ndarray:
        """Indices of this grid's points inside ``other`` (exact equality).

        Raises ``GridMismatch`` if some point is missing.
        """
        idx = np.searchsorted(other.points, self.points)
        idx = np.clip(idx, 0, other.size - 1)
        if not np.array_equal(other.points[idx], self.points):
            raise GridMismatch("grid is not embedded in the target grid")
        return idx

    def extended(self, margin: float) -> tuple["ParameterGrid", int]:
        """Grid padded by at least ``margin`` on each side.

        Padding cells copy the width of the adjacent edge cell. The original
        points are reused verbatim, so restriction back is bitwise exact.
        Returns the new grid and the index offset of the original points.
        """
        if margin <= 0:
            return self, 0
        h_lo, h_hi = self.cell_weights[0], self.cell_weights[-1]
        k_lo = int(math.ceil(margin / h_lo - 1e-9))
        k_hi = int(math.ceil(margin / h_hi - 1e-9))
        left = self.points[0] - h_lo * np.arange(k_lo, 0, -1)
        right = self.points[-1] + h_hi * np.arange(1, k_hi + 1)
        points = np.concatenate([left, self.points, right])
        weights = np.concatenate([np.full(k_lo, h_lo), self.cell_weights, np.full(k_hi, h_hi)])
        lo = self.lo - k_lo * h_lo
        hi = self.hi + k_hi * h_hi
        return ParameterGrid(points, weights, lo, hi), k_lo


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability masses on the points of a grid."""

    grid: ParameterGrid
    mass: np.ndarray

    def __post_init__(self):
        mass = _frozen(self.mass)
        object.__setattr__(self, "mass", mass)
        if mass.shape != (self.grid.size,):
            raise GridMismatch("mass vector length differs from grid size")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise InvalidDensity("masses must be finite and nonnegative")
        if abs(math.fsum(mass) - 1.0) > MASS_TOL:
            raise InvalidDensity(f"masses sum to {math.fsum(mass)!r}, not 1")

    @classmethod
    def from_weights(cls, grid: ParameterGrid, weights) -> "DiscreteMeasure":
        """Normalize nonnegative weights into a probability measure."""
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0):
            raise InvalidDensity("weights must be nonnegative")
        total = w.sum()
        if not total > 0:
            raise InvalidDensity("weights must have positive total")
        return cls(grid, w / total)

    @classmethod
    def uniform(cls, grid: ParameterGrid) -> "DiscreteMeasure":
        return cls(grid, np.full(grid.size, 1.0 / grid.size))

    @classmethod
    def dirac(cls, grid: ParameterGrid, value: float) -> "DiscreteMeasure":
        """Unit mass at the grid point nearest ``value``."""
        mass = np.zeros(grid.size)
        mass[grid.nearest_index(value)] = 1.0
        return cls(grid, mass)

    def atoms(self) -> list[tuple[float, float]]:
        keep = self.mass > 0
        return list(zip(self.grid.points[keep].tolist(), self.mass[keep].tolist()))

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.mass > 0)


@dataclass(frozen=True, eq=False)
class DensityField:
    """Density values on a grid, integrated with the grid's cell weights."""

    grid: ParameterGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.grid.size,):
            raise GridMismatch("density vector length differs from grid size")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise InvalidDensity("density values must be finite and nonnegative")
        total = float(np.dot(vals, self.grid.cell_weights))
        if abs(total - 1.0) > DENSITY_TOL:
            raise InvalidDensity(f"density integrates to {total!r}, not 1")

    @classmethod
    def from_function(cls, grid: ParameterGrid, func) -> "DensityField":
        """Evaluate ``func`` on the grid and normalize by quadrature."""
        return cls.from_values(grid, func(grid.points))

    @classmethod
    def from_values(cls, grid: ParameterGrid, values) -> "DensityField":
        vals = np.asarray(values, dtype=float)
        total = float(np.dot(vals, grid.cell_weights))
        if not total > 0:
            raise InvalidDensity("density has zero integral")
        return cls(grid, vals / total)

    def masses(self) -> np.ndarray:
        """Quadrature masses, renormalized to sum to one."""
        m = self.values * self.grid.cell_weights
        return m / m.sum()

    def to_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.grid, self.masses())


def masses_of(mu) -> np.ndarray:
    """Probability mass vector of a DiscreteMeasure or DensityField."""
    if isinstance(mu, DensityField):
        return mu.masses()
    return np.asarray(mu.mass)


def _check_same_grid(a, b):
    if not a.grid.same_as(b.grid):
        raise GridMismatch("measures live on different grids")


def w1_1d(a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """Wasserstein-1 distance via the integrated absolute CDF gap."""
    _check_same_grid(a, b)
    gap = np.cumsum(masses_of(a) - masses_of(b))[:-1]
    return float(np.dot(np.abs(gap), np.diff(a.grid.points)))


def total_variation(a, b) -> float:
    _check_same_grid(a, b)
    return 0.5 * float(np.abs(masses_of(a) - masses_of(b)).sum())


def _import_ot():
    # Skip POT's optional GPU/autodiff backends; only numpy arrays are used.
    for key in ("PYTORCH", "JAX", "TENSORFLOW", "CUPY"):
        os.environ.setdefault(f"POT_BACKEND_DISABLE_{key}", "1")
    import ot

    return ot


def w1_flow(a_atoms, b_atoms, metric=None) -> float:
    """Exact optimal transport cost between two finite atom lists.

    Parameters
    ----------
    a_atoms, b_atoms : sequence of (location, mass)
        Locations may be scalars or vectors.
    metric : callable, optional
        ``metric(xs, ys)`` returning the pairwise cost matrix. Defaults to the
        Euclidean distance.
    """
    if len(a_atoms) > MAX_FLOW_ATOMS or len(b_atoms) > MAX_FLOW_ATOMS:
        raise ValueError(f"at most {MAX_FLOW_ATOMS} atoms per side")
    if not a_atoms or not b_atoms:
        raise UnbalancedTransport("empty atom list")
    xa = np.asarray([loc for loc, _ in a_atoms], dtype=float)
    xb = np.asarray([loc for loc, _ in b_atoms], dtype=float)
    wa = np.asarray([m for _, m in a_atoms], dtype=float)
    wb = np.asarray([m for _, m in b_atoms], dtype=float)
    if abs(math.fsum(wa) - math.fsum(wb)) > MASS_TOL:
        raise UnbalancedTransport("atom lists carry different total mass")
    if metric is None:
        xa2 = xa.reshape(len(xa), -1)
        xb2 = xb.reshape(len(xb), -1)
        cost = np.sqrt(((xa2[:, None, :] - xb2[None, :, :]) ** 2).sum(axis=-1))
    else:
        cost = np.asarray(metric(xa, xb), dtype=float)
    # The solver wants exactly equal totals.
    wb = wb * (wa.sum() / wb.sum())
    ot = _import_ot()
    return float(ot.emd2(wa, wb, cost, numItermax=10_000_000))


def fatten_indices(grid: ParameterGrid, subset, eps: float) -> np.ndarray:
    """Indices within distance strictly less than ``eps`` of ``subset``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    sub = np.unique(np.asarray(subset, dtype=int))
    if sub.size == 0:
        return sub
    anchors = grid.points[sub]
    pos = np.searchsorted(anchors, grid.points)
    left = anchors[np.clip(pos - 1, 0, anchors.size - 1)]
    right = anchors[np.clip(pos, 0, anchors.size - 1)]
    dist = np.minimum(np.abs(grid.points - left), np.abs(grid.points - right))
    near = np.flatnonzero(dist < eps)
    return np.union1d(near, sub)


def slope_quotient(points, values) -> float:
    """Largest absolute slope between adjacent points."""
    pts = np.asarray(points, dtype=float)
    vals = np.asarray(values, dtype=float)
    if pts.size < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(vals)) / np.diff(pts)))


def lipschitz_quotient(field) -> float:
    """Adjacent-pair Lipschitz estimate of an AcceptanceField or DensityField."""
    return slope_quotient(field.grid.points, field.values)


def mean_of(mu) -> float:
    return float(np.dot(mu.grid.points, masses_of(mu)))
