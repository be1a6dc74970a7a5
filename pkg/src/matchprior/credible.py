"""Credible regions as acceptance-probability fields.

Usual balls and HPD sets, their Lipschitz relaxations, and the perturbed
regions whose level-averaged field is shifted down to exact credibility.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import CredibilityDeficit, GridMismatch, InvalidDensity, ParameterViolation
from .measure import DensityField, DiscreteMeasure, ParameterGrid, _frozen, masses_of, mean_of, slope_quotient
from .model import Model
from .posterior import (
    PerturbationSystem,
    estimate_posterior_lipschitz,
    perturb_prior,
    perturbed_model,
    posterior,
    posterior_density,
)

MASS_SLACK = 1e-12
REGION_KINDS = ("ball", "hpd", "relaxed-ball", "relaxed-hpd", "perturbed-ball", "perturbed-hpd")


@dataclass(frozen=True, eq=False)
class AcceptanceField:
    """Acceptance probability psi(theta) of a randomized region at level 1 - alpha."""

    grid: ParameterGrid
    psi: np.ndarray
    alpha: float

    def __post_init__(self):
        psi = _frozen(self.psi)
        object.__setattr__(self, "psi", psi)
        if psi.shape != (self.grid.size,):
            raise GridMismatch("field length differs from grid size")
        if np.any(psi < 0) or np.any(psi > 1):
            raise ValueError("acceptance probabilities must lie in [0, 1]")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    @property
    def values(self) -> np.ndarray:
        return self.psi

    def restrict(self, grid: ParameterGrid) -> "AcceptanceField":
        """Field values at the points of an embedded sub-grid."""
        if grid.same_as(self.grid):
            return self
        return AcceptanceField(grid, self.psi[grid.embedding_in(self.grid)], self.alpha)


def credibility(field: AcceptanceField, mu) -> float:
    """Posterior expectation of psi."""
    if not field.grid.same_as(mu.grid):
        raise GridMismatch("field and measure use different grids")
    return float(np.dot(field.psi, masses_of(mu)))


def _as_density(mu) -> DensityField:
    if isinstance(mu, DensityField):
        return mu
    return DensityField(mu.grid, masses_of(mu) / mu.grid.cell_weights)


# --- level inversion -------------------------------------------------------


def _ramp_mass(offsets, weights, t):
    return np.dot(weights, np.clip(t - offsets, 0.0, 1.0))


def least_levels(offsets, weights, targets) -> np.ndarray:
    """Smallest t with sum_i w_i clip(t - c_i, 0, 1) >= target, per target.

    The left side is continuous, nondecreasing and piecewise linear with
    knots at c_i and c_i + 1, so each target is found by locating its knot
    interval and interpolating. One Newton step against a direct sum
    removes prefix-sum cancellation.
    """
    c = np.asarray(offsets, dtype=float)
    w = np.asarray(weights, dtype=float)
    keep = w > 0
    c, w = c[keep], w[keep]
    order = np.argsort(c)
    c, w = c[order], w[order]
    cum_w = np.concatenate([[0.0], np.cumsum(w)])
    cum_wc = np.concatenate([[0.0], np.cumsum(w * c)])

    def ramp(t):
        j1 = np.searchsorted(c, t - 1.0, side="right")
        j2 = np.searchsorted(c, t, side="left")
        return cum_w[j1] + t * (cum_w[j2] - cum_w[j1]) - (cum_wc[j2] - cum_wc[j1]), cum_w[j2] - cum_w[j1]

    knots = np.unique(np.concatenate([c, c + 1.0]))
    at_knots, _ = ramp(knots)
    at_knots = np.maximum.accumulate(at_knots)
    out = []
    for target in np.atleast_1d(np.asarray(targets, dtype=float)):
        k = int(np.searchsorted(at_knots, target, side="left"))
        if k == 0:
            out.append(knots[0])
            continue
        if k >= knots.size:
            out.append(knots[-1])
            continue
        t0, t1, g0, g1 = knots[k - 1], knots[k], at_knots[k - 1], at_knots[k]
        t = t0 + (target - g0) * (t1 - t0) / (g1 - g0) if g1 > g0 else t1
        _, slope = ramp(np.array([t]))
        if slope[0] > 0:
            t_new = t + (target - _ramp_mass(c, w, t)) / slope[0]
            if t0 <= t_new <= t1:
                t = t_new
        out.append(t)
    return np.array(out)


def least_level(offsets, weights, target: float) -> float:
    return float(least_levels(offsets, weights, [target])[0])


def bisect_monotone(func, lo: float, hi: float, target: float, tol: float = 1e-12, increasing: bool = True):
    """Bisection for the boundary of {t : func(t) >= target} on [lo, hi].

    For increasing ``func`` returns the least such t, for decreasing the
    largest.
    """
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        ok = func(mid) >= target
        if increasing == ok:
            hi = mid
        else:
            lo = mid
    return hi if increasing else lo


# --- usual regions ---------------------------------------------------------


def credible_ball(mu, alpha: float):
    """Smallest closed ball around the mean with mass at least 1 - alpha.

    Returns ``(center, radius, field)`` with an indicator field.
    """
    center = mean_of(mu)
    mass = masses_of(mu)
    dist = np.abs(mu.grid.points - center)
    order = np.argsort(dist, kind="stable")
    cum = np.cumsum(mass[order])
    k = min(int(np.searchsorted(cum, 1 - alpha - MASS_SLACK, side="left")), cum.size - 1)
    radius = float(dist[order][k])
    psi = (dist <= radius).astype(float)
    return center, radius, AcceptanceField(mu.grid, psi, alpha)


def hpd_region(mu, alpha: float):
    """Highest-density region with mass at least 1 - alpha.

    Returns ``(level, field)``; every point at the critical density level is
    included.
    """
    rho = _as_density(mu).values
    mass = masses_of(mu)
    order = np.argsort(-rho, kind="stable")
    cum = np.cumsum(mass[order])
    k = min(int(np.searchsorted(cum, 1 - alpha - MASS_SLACK, side="left")), cum.size - 1)
    level = float(rho[order][k])
    psi = (rho >= level).astype(float)
    return level, AcceptanceField(mu.grid, psi, alpha)


# --- relaxed regions -------------------------------------------------------


def _ball_ramp(mu, beta):
    return beta * np.abs(mu.grid.points - mean_of(mu))


def _hpd_ramp(mu, beta):
    density = _as_density(mu)
    if not np.any(density.values > 0):
        raise InvalidDensity("density field is identically zero")
    slope = beta / max(1.0, slope_quotient(density.grid.points, density.values))
    return -slope * density.values, slope


def relaxed_ball(mu, alpha: float, beta: float) -> AcceptanceField:
    """psi = min(1, max(0, r - beta |theta - mean|)) with r set for exact credibility."""
    offsets = _ball_ramp(mu, beta)
    r = least_level(offsets, masses_of(mu), 1 - alpha)
    return AcceptanceField(mu.grid, np.clip(r - offsets, 0.0, 1.0), alpha)


def relaxed_ball_radius(mu, alpha: float, beta: float) -> float:
    """Level r of the relaxed ball."""
    return least_level(_ball_ramp(mu, beta), masses_of(mu), 1 - alpha)


def relaxed_hpd(mu, alpha: float, beta: float) -> AcceptanceField:
    """Density-level ramp of slope beta / max(1, Lip rho), exactly credible."""
    offsets, _ = _hpd_ramp(mu, beta)
    t = least_level(offsets, masses_of(mu), 1 - alpha)
    return AcceptanceField(mu.grid, np.clip(t - offsets, 0.0, 1.0), alpha)


def relaxed_hpd_level(mu, alpha: float, beta: float) -> float:
    """Density level d at which the relaxed HPD field reaches one."""
    offsets, slope = _hpd_ramp(mu, beta)
    t = least_level(offsets, masses_of(mu), 1 - alpha)
    return (1.0 - t) / slope


def trivial_region(alpha: float, grid: ParameterGrid) -> AcceptanceField:
    """Empty set with probability alpha, everything otherwise."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return AcceptanceField(grid, np.full(grid.size, 1.0 - alpha), alpha)


def support_of(field: AcceptanceField, threshold: float = 0.0) -> np.ndarray:
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    return np.flatnonzero(field.psi > threshold)


# --- perturbed regions -----------------------------------------------------


@dataclass(frozen=True)
class RegionConfig:
    """Parameters of a credible-region family.

    ``posterior_lipschitz`` is the constant C of the posterior map used in
    the margin delta * eta - beta * C * gamma; ``None`` means estimate it
    from the model.
    """

    kind: str = "perturbed-ball"
    alpha: float = 0.1
    beta: float = 1.0
    delta: float = 0.05
    eta: float = 0.5
    gamma: float = 1e-4
    n_z: int = 33
    bisect_tol: float = 1e-10
    posterior_lipschitz: float | None = None

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0 < self.delta < self.alpha:
            raise ValueError("delta must lie in (0, alpha)")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if self.n_z < 3:
            raise ValueError("n_z must be at least 3")

    @property
    def base_kind(self) -> str:
        return self.kind.split("-")[-1]

    def margin(self, C: float) -> float:
        """delta * eta - beta * C * gamma; must be positive for perturbed kinds."""
        return self.delta * self.eta - self.beta * C * self.gamma

    def with_lipschitz(self, C: float) -> "RegionConfig":
        return replace(self, posterior_lipschitz=float(C))


@lru_cache(maxsize=16)
def default_posterior_lipschitz(m: Model) -> float:
    return estimate_posterior_lipschitz(m)


def resolve_lipschitz(cfg: RegionConfig, m: Model) -> float:
    if cfg.posterior_lipschitz is not None:
        return cfg.posterior_lipschitz
    return default_posterior_lipschitz(m)


def check_margin(cfg: RegionConfig, C: float) -> float:
    margin = cfg.margin(C)
    if not margin > 0:
        raise ParameterViolation(
            f"delta*eta - beta*C*gamma = {margin:.3g} <= 0 "
            f"(delta={cfg.delta}, eta={cfg.eta}, beta={cfg.beta}, C={C}, gamma={cfg.gamma})"
        )
    return margin


def level_nodes(delta: float, eta: float, n_z: int):
    """Quadrature nodes and weights for the level shift z on [delta*eta, delta].

    The level density is triangular on [eta, 1] with its peak at (eta+1)/2,
    scaled by delta; composite trapezoid weights, normalized to sum to one.
    """
    u = np.linspace(eta, 1.0, n_z)
    shape = np.maximum(0.0, 1.0 - np.abs(2 * u - 1 - eta) / (1 - eta))
    trap = np.full(n_z, 1.0)
    trap[[0, -1]] = 0.5
    weights = trap * shape
    return delta * u, weights / weights.sum()


def _perturbed_posterior(m: Model, prior: DiscreteMeasure, x: int, sys: PerturbationSystem):
    if sys.kind == "trivial":
        return posterior(m, prior, x)
    big = perturbed_model(m, sys.gamma)
    return posterior_density(big, perturb_prior(prior, sys, big.grid), x)


def level_averaged_field(post, base_kind: str, cfg: RegionConfig) -> AcceptanceField:
    """Average of relaxed fields of ``post`` at levels 1 - (alpha - z).

    The shift z runs over [delta*eta, delta] with the triangular level
    density; the result is a field on ``post.grid``.
    """
    if base_kind == "ball":
        offsets = _ball_ramp(post, cfg.beta)
    elif base_kind == "hpd":
        offsets, _ = _hpd_ramp(post, cfg.beta)
    else:
        raise ValueError(f"unknown base kind {base_kind!r}")
    shifts, weights = level_nodes(cfg.delta, cfg.eta, cfg.n_z)
    keep = weights > 0
    shifts, weights = shifts[keep], weights[keep]
    levels = least_levels(offsets, masses_of(post), 1 - (cfg.alpha - shifts))
    psi = weights @ np.clip(levels[:, None] - offsets[None, :], 0.0, 1.0)
    return AcceptanceField(post.grid, np.clip(psi, 0.0, 1.0), cfg.alpha)


def perturbed_acceptance(base_kind: str, m: Model, prior: DiscreteMeasure, x: int, cfg: RegionConfig,
                         sys: PerturbationSystem | None = None) -> AcceptanceField:
    """Level-averaged relaxed field of the perturbed posterior, on ``m.grid``.

    Raises ``ParameterViolation`` unless delta*eta - beta*C*gamma > 0.
    """
    sys = sys or PerturbationSystem()
    check_margin(cfg, resolve_lipschitz(cfg, m))
    post = _perturbed_posterior(m, prior, x, sys)
    return level_averaged_field(post, base_kind, cfg).restrict(m.grid)


def shifted_region(psi_tilde: AcceptanceField, post, alpha: float, tol: float = 1e-10) -> AcceptanceField:
    """max(0, psi_tilde - R) with R from :func:`correction_R`."""
    shift = correction_R(psi_tilde, post, alpha, tol)
    return AcceptanceField(psi_tilde.grid, np.maximum(0.0, psi_tilde.psi - shift), alpha)


def correction_R(psi_tilde: AcceptanceField, post, alpha: float, tol: float = 1e-10) -> float:
    """Largest shift r in [0, 1] keeping Post(max(0, psi - r)) >= 1 - alpha."""
    mass = masses_of(post)
    if not psi_tilde.grid.same_as(post.grid):
        raise GridMismatch("field and posterior use different grids")
    start = float(np.dot(psi_tilde.psi, mass))
    if start < 1 - alpha - tol:
        raise CredibilityDeficit(f"credibility {start!r} is below {1 - alpha!r}")
    t = least_level(-psi_tilde.psi, mass, 1 - alpha)
    return float(min(1.0, max(0.0, -t)))


def perturbed_region(base_kind: str, m: Model, prior: DiscreteMeasure, x: int, cfg: RegionConfig,
                     sys: PerturbationSystem | None = None) -> AcceptanceField:
    """Exactly credible field max(0, psi_tilde - R)."""
    psi_tilde = perturbed_acceptance(base_kind, m, prior, x, cfg, sys)
    return shifted_region(psi_tilde, posterior(m, prior, x), cfg.alpha, cfg.bisect_tol)


# --- families --------------------------------------------------------------


@dataclass(frozen=True)
class TrivialFamily:
    """Acceptance probability 1 - alpha everywhere, whatever the data."""

    alpha: float
    exactly_credible = True

    def __call__(self, m: Model, prior: DiscreteMeasure, x: int) -> AcceptanceField:
        return trivial_region(self.alpha, m.grid)


@dataclass(frozen=True)
class ConstantFamily:
    """Fixed acceptance probability ``value``; credible only if value = 1 - alpha."""

    alpha: float
    value: float = 1.0
    exactly_credible = False

    def __call__(self, m: Model, prior: DiscreteMeasure, x: int) -> AcceptanceField:
        return AcceptanceField(m.grid, np.full(m.grid.size, self.value), self.alpha)


@dataclass(frozen=True)
class RegionFamily:
    """Region family driven by a RegionConfig, applied to each posterior."""

    cfg: RegionConfig
    system: PerturbationSystem = PerturbationSystem()

    @property
    def alpha(self) -> float:
        return self.cfg.alpha

    @property
    def exactly_credible(self) -> bool:
        return self.cfg.kind.startswith(("relaxed", "perturbed"))

    def __call__(self, m: Model, prior: DiscreteMeasure, x: int) -> AcceptanceField:
        kind, cfg = self.cfg.kind, self.cfg
        if kind.startswith("perturbed"):
            return perturbed_region(cfg.base_kind, m, prior, x, cfg, self.system)
        post = posterior(m, prior, x)
        if kind == "relaxed-ball":
            return relaxed_ball(post, cfg.alpha, cfg.beta)
        if kind == "relaxed-hpd":
            return relaxed_hpd(post, cfg.alpha, cfg.beta)
        if kind == "ball":
            return credible_ball(post, cfg.alpha)[2]
        return hpd_region(post, cfg.alpha)[1]
