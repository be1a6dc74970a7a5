"""Prior update map and the damped iteration for matching priors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coverage import CoverageReport, z_map
from .credible import RegionConfig
from .errors import DegenerateUpdate, DomainError, ParameterViolation
from .measure import DiscreteMeasure, ParameterGrid, w1_1d
from .model import Model

CONVENTIONS = ("max", "paper-literal-min")


def q_map(m: Model, family, prior: DiscreteMeasure, convention: str = "max",
          report: CoverageReport | None = None) -> DiscreteMeasure:
    """Reweight mass by coverage gap: (pi + z+) / sum(pi + z+).

    Under ``max`` mass is added where coverage falls short. Under
    ``paper-literal-min`` mass is removed there instead; negative masses or a
    nonpositive normalizer raise ``DegenerateUpdate``.
    """
    if report is None:
        report = z_map(m, family, prior)
    bump = report.z_plus(convention)
    if not np.any(bump):
        return prior
    raw = prior.mass + bump
    total = raw.sum()
    if not total > 1e-12:
        raise DegenerateUpdate(f"update normalizer {total!r} is not positive")
    if np.any(raw < 0):
        raise DegenerateUpdate("update produced negative mass")
    return DiscreteMeasure(prior.grid, raw / total)


@dataclass(frozen=True)
class SolverConfig:
    """Settings for :func:`solve_matching`.

    ``schedule_a`` and ``epsilon`` are only validated here (the family is
    built separately, see :func:`schedule_config`). ``restarts`` counts extra
    runs from random priors after a non-converged run.
    """

    damping: float = 0.5
    max_iters: int = 5000
    tol: float = 5e-3
    init: object = "uniform"
    plus_convention: str = "max"
    schedule_a: float | None = None
    epsilon: float | None = None
    posterior_map_C: float | None = None
    restarts: int = 3
    seed: int = 0
    keep_iterates: bool = False

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 0 or self.restarts < 0:
            raise ValueError("max_iters and restarts must be nonnegative")
        if self.plus_convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.plus_convention!r}")
        if not (self.init == "uniform" or isinstance(self.init, DiscreteMeasure)):
            raise ValueError("init must be 'uniform' or a DiscreteMeasure")


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Outcome of the damped iteration.

    ``trace`` has one row per evaluated iterate: its max_z and the W1 length
    of the step taken from it (NaN for the returned iterate).
    """

    prior: DiscreteMeasure
    report: CoverageReport
    trace: np.ndarray
    converged: bool
    iterations: int
    restarts_used: int = 0
    seed: int = 0
    iterates: tuple = ()

    @property
    def max_z(self) -> float:
        return self.report.max_z


def param_schedule(a: float, alpha: float, eps: float, C: float | None = None):
    """(eta, delta, gamma, beta) = (a, a, a**4, 1/a), validated.

    Requires max(1/beta, eta, delta, gamma) < eps < alpha and, when C is
    given, delta*eta - beta*C*gamma > 0.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    eta, delta, gamma, beta = a, a, a**4, 1.0 / a
    largest = max(1.0 / beta, eta, delta, gamma)
    if largest >= alpha:
        raise ParameterViolation(
            f"max(1/beta, eta, delta, gamma) = {largest:g} >= alpha = {alpha:g}: no eps fits between"
        )
    if not largest < eps:
        raise ParameterViolation(f"max(1/beta, eta, delta, gamma) = {largest:g} is not below eps = {eps:g}")
    if not eps < alpha:
        raise ParameterViolation(f"eps = {eps:g} is not below alpha = {alpha:g}")
    if C is not None:
        margin = delta * eta - beta * C * gamma
        if not margin > 0:
            raise ParameterViolation(f"delta*eta - beta*C*gamma = {margin:g} <= 0 for C = {C:g}")
    return eta, delta, gamma, beta


def max_schedule_a(alpha: float, eps: float, C: float) -> float:
    """Supremum of admissible a: the margin a**2 (1 - C a) needs a < 1/C."""
    bound = min(eps, alpha)
    return bound if C <= 0 else min(bound, 1.0 / C)


def schedule_config(a: float, alpha: float, eps: float, C: float, kind: str = "perturbed-ball",
                    n_z: int = 33) -> RegionConfig:
    eta, delta, gamma, beta = param_schedule(a, alpha, eps, C)
    return RegionConfig(kind=kind, alpha=alpha, beta=beta, delta=delta, eta=eta, gamma=gamma,
                        n_z=n_z, posterior_lipschitz=C)


def agd_membership(prior: DiscreteMeasure, a: float, b: float) -> bool:
    """Whether the two edge bands [0, a] and [1 - a, 1] hold at most 1 - b."""
    grid = prior.grid
    if grid.lo < 0 or grid.hi > 1:
        raise DomainError("grid must lie in [0, 1]")
    edge = (grid.points <= a) | (grid.points >= 1 - a)
    return float(prior.mass[edge].sum()) <= 1 - b + 1e-12


def ffin_check(grid: ParameterGrid, min_length: float = 0.01, band: float = 0.01, min_points: int = 1000) -> bool:
    """Whether more than ``min_points`` grid points spread evenly over [0, 1].

    Every interval longer than ``min_length`` must hold a fraction of points
    within a factor (1 - band, 1 + band) of its length. Closed point-to-point
    intervals give the densest configurations and open ones (plus intervals
    reaching 0 or 1) the sparsest, so scanning those settles all intervals.
    """
    if grid.lo < 0 or grid.hi > 1:
        raise DomainError("grid must lie in [0, 1]")
    p = grid.points
    n = p.size
    if n <= min_points:
        return False
    hi_ratio, lo_ratio = 1 + band, 1 - band
    for k in range(0, n):
        span = p[k:] - p[: n - k]
        # densest: closed [p_i, p_{i+k}] holds k + 1 points in length >= span
        dense = (k + 1) / (n * np.maximum(span, min_length))
        if dense.max() >= hi_ratio:
            return False
        if k >= 1:
            # sparsest: open (p_i, p_{i+k}) holds k - 1 points
            long = span > min_length
            if np.any(long) and ((k - 1) / (n * span[long])).min() <= lo_ratio:
                return False
    # intervals touching the ends: [0, p_j) and (p_i, 1]
    counts = np.arange(n)
    for length in (p, 1.0 - p[::-1]):
        long = length > min_length
        if np.any(long) and (counts[long] / (n * length[long])).min() <= lo_ratio:
            return False
    return True


def _random_agd_prior(grid: ParameterGrid, rng: np.random.Generator) -> DiscreteMeasure:
    weights = rng.dirichlet(np.ones(grid.size))
    return DiscreteMeasure.from_weights(grid, weights)


def damped_step(prior: DiscreteMeasure, image: DiscreteMeasure, damping: float) -> DiscreteMeasure:
    return DiscreteMeasure.from_weights(prior.grid, (1 - damping) * prior.mass + damping * image.mass)


def _run(m, family, start, cfg):
    prior = start
    rows, iterates = [], []
    for k in range(cfg.max_iters + 1):
        report = z_map(m, family, prior)
        if cfg.keep_iterates:
            iterates.append(prior)
        if report.max_z <= cfg.tol or k == cfg.max_iters:
            rows.append((report.max_z, np.nan))
            return prior, report, rows, iterates, k
        image = q_map(m, family, prior, cfg.plus_convention, report)
        nxt = damped_step(prior, image, cfg.damping)
        rows.append((report.max_z, w1_1d(prior, nxt)))
        prior = nxt


def solve_matching(m: Model, family, cfg: SolverConfig = SolverConfig()) -> SolveResult:
    """Damped iteration pi <- (1 - damping) pi + damping Q(pi).

    Stops once max_z <= tol. A run that exhausts ``max_iters`` is followed by
    up to ``cfg.restarts`` runs from seeded random priors; the best run (least
    max_z) is returned. Non-convergence is reported, not raised.
    """
    if cfg.schedule_a is not None and cfg.epsilon is not None:
        param_schedule(cfg.schedule_a, family.alpha, cfg.epsilon, cfg.posterior_map_C)
    start = DiscreteMeasure.uniform(m.grid) if cfg.init == "uniform" else cfg.init
    rng = np.random.default_rng(cfg.seed)
    best = None
    for attempt in range(cfg.restarts + 1):
        prior, report, rows, iterates, iters = _run(m, family, start, cfg)
        result = SolveResult(prior, report, np.array(rows, dtype=float).reshape(-1, 2),
                             report.max_z <= cfg.tol, iters, attempt, cfg.seed, tuple(iterates))
        if best is None or result.max_z < best.max_z:
            best = result
        if result.converged:
            break
        start = _random_agd_prior(m.grid, rng)
    return best


def stationarity_gap(m: Model, family, prior: DiscreteMeasure, convention: str = "max") -> float:
    """W1 distance between the prior and its image under the update map."""
    return w1_1d(q_map(m, family, prior, convention), prior)
