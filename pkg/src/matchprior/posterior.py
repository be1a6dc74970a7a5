"""Bayes updates, marginals and the convolution system of prior perturbations."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, GridMismatch, PosteriorUndefined
from .measure import DensityField, DiscreteMeasure, ParameterGrid, w1_1d
from .model import Model, supermodel_extend


def triangular_kernel(t):
    """Symmetric triangular density 1 - |t| on [-1, 1]."""
    return np.maximum(0.0, 1.0 - np.abs(t))


KERNEL_LIPSCHITZ = 1.0
KERNEL_SUP = 1.0


@dataclass(frozen=True)
class PerturbationSystem:
    """Map pi -> pi_gamma, either the identity or a triangular-kernel convolution."""

    kind: str = "trivial"
    gamma: float = 1e-4

    def __post_init__(self):
        if self.kind not in ("trivial", "convolution"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @property
    def D(self) -> float:
        """W1 expansion constant of the perturbation (non-expansive)."""
        return 1.0

    @property
    def D_prime(self) -> float:
        """Contract constant gamma^-1 max(Lip g, sup g).

        It bounds sup p_gamma but, as a bound on sup |p_mu - p_nu| / W1, it
        misses a factor 1/gamma; see :attr:`sup_stability_constant`.
        """
        return max(KERNEL_LIPSCHITZ, KERNEL_SUP) / self.gamma

    @property
    def sup_stability_constant(self) -> float:
        """gamma^-1 max(gamma^-1 Lip g, sup g), valid for both sup bounds.

        The scaled kernel gamma^-1 g(t / gamma) is gamma^-2 Lip g Lipschitz.
        """
        return max(KERNEL_LIPSCHITZ / self.gamma, KERNEL_SUP) / self.gamma


def _check_prior_grid(m: Model, prior):
    if not prior.grid.same_as(m.grid):
        raise GridMismatch("prior and model use different grids")


def marginal(m: Model, prior: DiscreteMeasure) -> np.ndarray:
    """P(x) = sum_theta q(theta, x) nu(x) pi(theta) for each sample point."""
    _check_prior_grid(m, prior)
    return prior.mass @ m.probabilities()


def posterior(m: Model, prior: DiscreteMeasure, x: int) -> DiscreteMeasure:
    """Posterior masses proportional to q(theta, x) pi(theta)."""
    _check_prior_grid(m, prior)
    weights = m.q[:, x] * prior.mass
    total = weights.sum()
    if not total > 0:
        raise PosteriorUndefined(f"observation {m.sample_space.labels[x]!r} has zero marginal")
    return DiscreteMeasure(m.grid, weights / total)


def posterior_density(m: Model, prior: DensityField, x: int) -> DensityField:
    """Posterior density proportional to rho(theta) q(theta, x)."""
    _check_prior_grid(m, prior)
    vals = prior.values * m.q[:, x]
    total = float(np.dot(vals, m.grid.cell_weights))
    if not total > 0:
        raise PosteriorUndefined(f"observation {m.sample_space.labels[x]!r} has zero marginal")
    return DensityField(m.grid, vals / total)


def convolution_matrix(source: ParameterGrid, target: ParameterGrid, gamma: float) -> np.ndarray:
    """Kernel matrix K[target, source]; each column integrates to one.

    A column whose kernel misses every target point (gamma below the grid
    spacing) falls back to a point mass on the nearest target cell.
    """
    offsets = (target.points[:, None] - source.points[None, :]) / gamma
    K = triangular_kernel(offsets) / gamma
    col = target.cell_weights @ K
    empty = col <= 0
    if np.any(empty):
        for j in np.flatnonzero(empty):
            i = target.nearest_index(source.points[j])
            K[i, j] = 1.0
        col = target.cell_weights @ K
    return K / col[None, :]


def perturb_prior(prior: DiscreteMeasure, sys: PerturbationSystem, target: ParameterGrid | None = None):
    """Apply the perturbation system.

    The trivial system returns ``prior`` itself. The convolution system
    returns the density of pi * g_gamma on ``target`` (default: the prior
    grid padded by gamma).
    """
    if sys.kind == "trivial":
        return prior
    if target is None:
        target = prior.grid.extended(sys.gamma)[0]
    support = prior.grid.points[prior.mass > 0]
    if support.min() - sys.gamma < target.lo - 1e-12 or support.max() + sys.gamma > target.hi + 1e-12:
        raise DomainError("target grid does not contain the gamma-fattened prior support")
    K = _cached_convolution(prior.grid, target, sys.gamma)
    return DensityField(target, K @ prior.mass)


@lru_cache(maxsize=32)
def _cached_convolution(source: ParameterGrid, target: ParameterGrid, gamma: float) -> np.ndarray:
    K = convolution_matrix(source, target, gamma)
    K.setflags(write=False)
    return K


@lru_cache(maxsize=32)
def perturbed_model(m: Model, gamma: float) -> Model:
    """Supermodel on the gamma-padded grid used with convolution perturbations."""
    target, _ = m.grid.extended(gamma)
    if target is m.grid:
        return m
    return supermodel_extend(m, target)


def restrict_density_masses(field: DensityField, grid: ParameterGrid) -> np.ndarray:
    """Quadrature masses of ``field`` at the points of an embedded sub-grid."""
    idx = grid.embedding_in(field.grid)
    return field.values[idx] * field.grid.cell_weights[idx]


def estimate_posterior_lipschitz(m: Model, n_pairs: int = 64, seed: int = 0) -> float:
    """Empirical Lipschitz constant of the posterior map under W1.

    Ratio max_x W1(post(mu, x), post(nu, x)) / W1(mu, nu) over sampled prior
    pairs: Dirichlet draws plus small local perturbations of them.
    """
    rng = np.random.default_rng(seed)
    n = m.grid.size
    best = 0.0
    for k in range(n_pairs):
        a = rng.dirichlet(np.full(n, 0.5 if k % 2 else 1.0))
        if k % 3 == 2:
            b = a * np.exp(0.05 * rng.standard_normal(n))
        else:
            b = rng.dirichlet(np.full(n, 1.0))
        mu = DiscreteMeasure.from_weights(m.grid, a)
        nu = DiscreteMeasure.from_weights(m.grid, b)
        prior_gap = w1_1d(mu, nu)
        if prior_gap <= 0:
            continue
        for x in range(m.sample_space.size):
            try:
                gap = w1_1d(posterior(m, mu, x), posterior(m, nu, x))
            except PosteriorUndefined:
                continue
            best = max(best, gap / prior_gap)
    return best

