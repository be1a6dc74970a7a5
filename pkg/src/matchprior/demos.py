"""Small worked examples where usual credible regions jump under tiny changes."""

from __future__ import annotations

import numpy as np

from .credible import (
    RegionConfig,
    credible_ball,
    hpd_region,
    level_averaged_field,
    relaxed_ball,
    shifted_region,
    support_of,
)
from .measure import DensityField, ParameterGrid


def ball_jump_measure(c: float, grid: ParameterGrid) -> DensityField:
    """(1 - c) Unif[-0.1, 0.1] + c Unif([-11, -10] u [10, 11])."""
    t = np.abs(grid.points)
    vals = np.where(t <= 0.1, (1 - c) / 0.2, 0.0) + np.where((t >= 10) & (t <= 11), c / 2.0, 0.0)
    return DensityField.from_values(grid, vals)


def ball_jump(c_values, alpha: float = 0.5, n: int = 2200) -> list[tuple[float, float]]:
    """Credible-ball radius of the two-scale mixture for each weight c.

    The grid covers [-11, 11] with ``n`` cells; the default cell width 0.01
    puts cell edges on +-0.1 and +-10.
    """
    grid = ParameterGrid.uniform(-11.0, 11.0, n)
    rows = []
    for c in c_values:
        _, radius, _ = credible_ball(ball_jump_measure(float(c), grid), alpha)
        rows.append((float(c), radius))
    return rows


def sine_density(sign: int, c: float, grid: ParameterGrid) -> DensityField:
    return DensityField.from_function(grid, lambda t: 2.0 + sign * c * np.sin(t))


def hpd_flip(c: float = 0.2, alpha: float = 0.5, n: int = 2000):
    """HPD indicators of 2 + c sin and 2 - c sin on [0, 2 pi].

    Returns ``(grid, psi_plus, psi_minus)``.
    """
    grid = ParameterGrid.uniform(0.0, 2 * np.pi, n)
    _, plus = hpd_region(sine_density(+1, c, grid), alpha)
    _, minus = hpd_region(sine_density(-1, c, grid), alpha)
    return grid, plus.psi, minus.psi


def support_hull(grid: ParameterGrid, psi) -> tuple[float, float]:
    """Outer cell edges of the first and last points with psi > 0."""
    idx = np.flatnonzero(np.asarray(psi) > 0)
    if idx.size == 0:
        return (np.nan, np.nan)
    edges = np.concatenate([[grid.lo], grid.lo + np.cumsum(grid.cell_weights)])
    return float(edges[idx[0]]), float(edges[idx[-1] + 1])


def hpd_flip_boundary(c: float) -> float:
    """Left end a of the exact 1/2-level HPD set [a, pi - a] of 2 + c sin.

    Solves 2a = c cos(a) by fixed-point iteration (a contraction for c < 2).
    """
    a = 0.0
    for _ in range(200):
        a = 0.5 * c * np.cos(a)
    return float(a)


def figure1(n: int = 2000, alpha: float = 0.5, beta: float = 4.0, delta: float = 0.25, eta: float = 0.25):
    """Flat posterior on [-1, 1]: usual, relaxed and perturbed credible balls.

    Returns ``(grid, psi_ball, psi_relaxed, psi_perturbed)``.
    """
    grid = ParameterGrid.uniform(-1.0, 1.0, n)
    flat = DensityField.from_values(grid, np.ones(n))
    _, _, ball = credible_ball(flat, alpha)
    relaxed = relaxed_ball(flat, alpha, beta)
    cfg = RegionConfig(kind="perturbed-ball", alpha=alpha, beta=beta, delta=delta, eta=eta)
    averaged = level_averaged_field(flat, "ball", cfg)
    perturbed = shifted_region(averaged, flat, alpha, cfg.bisect_tol)
    return grid, ball.psi, relaxed.psi, perturbed.psi


__all__ = [
    "ball_jump",
    "ball_jump_measure",
    "figure1",
    "hpd_flip",
    "hpd_flip_boundary",
    "sine_density",
    "support_hull",
    "support_of",
]
