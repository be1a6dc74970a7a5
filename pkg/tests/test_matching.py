import numpy as np
import pytest

from conftest import random_prior, sparse_prior
from matchprior.coverage import z_map
from matchprior.credible import ConstantFamily, RegionFamily, TrivialFamily
from matchprior.errors import DegenerateUpdate, DomainError, ParameterViolation
from matchprior.matching import (
    SolverConfig,
    agd_membership,
    damped_step,
    ffin_check,
    max_schedule_a,
    param_schedule,
    q_map,
    schedule_config,
    solve_matching,
    stationarity_gap,
)
from matchprior.measure import DiscreteMeasure, ParameterGrid, w1_1d
from matchprior.model import bernoulli_model

GRID65 = ParameterGrid.uniform(0.0, 1.0, 65)
MODEL65 = bernoulli_model(GRID65)
FAMILY = RegionFamily(schedule_config(0.02, 0.1, 0.03, 1.6))


def _bisect(func, lo, hi, target, increasing):
    """Boundary of {t : func(t) >= target}, least t if increasing else largest."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (func(mid) >= target) == increasing:
            hi = mid
        else:
            lo = mid
    return hi if increasing else lo


def oracle_update(theta, prior, alpha, a, n_z=33):
    """Bernoulli update written from scratch: perturbed relaxed ball, trivial perturbation."""
    beta, delta, eta = 1 / a, a, a
    u = np.linspace(eta, 1, n_z)
    w = np.maximum(0, 1 - np.abs(u - (eta + 1) / 2) / ((1 - eta) / 2))
    w[[0, -1]] *= 0.5
    w /= w.sum()
    like = {0: 1 - theta, 1: theta}
    psi = {}
    for x in (0, 1):
        post = prior * like[x] / np.sum(prior * like[x])
        dist = beta * np.abs(theta - np.sum(post * theta))
        tilde = np.zeros_like(theta)
        for uk, wk in zip(u, w):
            credible = lambda r: np.sum(post * np.clip(r - dist, 0, 1))
            r = _bisect(credible, 0.0, dist.max() + 1, 1 - (alpha - delta * uk), True)
            tilde += wk * np.clip(r - dist, 0, 1)
        shifted = lambda s: np.sum(post * np.maximum(0, tilde - s))
        R = _bisect(shifted, 0.0, 1.0, 1 - alpha, False)
        psi[x] = np.maximum(0, tilde - R)
    z = (1 - alpha) - (psi[0] * like[0] + psi[1] * like[1])
    raw = prior + np.maximum(0, z)
    return raw / raw.sum(), z


def test_q_map_matches_independent_update():
    prior = DiscreteMeasure.uniform(GRID65)
    expected, z = oracle_update(GRID65.points, prior.mass, 0.1, 0.02)
    np.testing.assert_allclose(z_map(MODEL65, FAMILY, prior).z, z, atol=1e-10)
    np.testing.assert_allclose(q_map(MODEL65, FAMILY, prior).mass, expected, atol=1e-10)


def test_q_map_fixed_points(bern257, rng):
    prior = random_prior(bern257.grid, rng)
    assert q_map(bern257, ConstantFamily(0.1, 1.0), prior) is prior
    assert q_map(bern257, TrivialFamily(0.1), prior) is prior
    assert stationarity_gap(bern257, TrivialFamily(0.1), prior) == 0.0


def test_q_map_raises_mass_where_coverage_is_short():
    rng = np.random.default_rng(5)
    for k in range(10):
        prior = random_prior(GRID65, rng, 0.5) if k % 2 else sparse_prior(GRID65, rng, 4)
        rep = z_map(MODEL65, FAMILY, prior)
        image = q_map(MODEL65, FAMILY, prior, report=rep)
        total = 1 + np.maximum(0, rep.z).sum()
        short = rep.z > 0
        assert np.all(image.mass[short] * total > prior.mass[short])
        np.testing.assert_allclose(image.mass[~short] * total, prior.mass[~short], rtol=1e-12)


def test_literal_min_convention_can_degenerate(bern257):
    prior = DiscreteMeasure.uniform(bern257.grid)
    with pytest.raises(DegenerateUpdate):
        q_map(bern257, ConstantFamily(0.1, 1.0), prior, convention="paper-literal-min")


def test_solver_trivial_and_already_matching(bern257, rng):
    res = solve_matching(bern257, TrivialFamily(0.1), SolverConfig())
    assert res.converged and res.iterations == 0
    np.testing.assert_array_equal(res.report.z, 0.0)

    init = random_prior(bern257.grid, rng)
    res = solve_matching(bern257, ConstantFamily(0.1, 1.0), SolverConfig(init=init))
    assert res.converged and res.iterations == 0
    assert res.prior is init
    assert res.trace.shape == (1, 2) and np.isnan(res.trace[0, 1])


def test_trace_matches_fresh_evaluation():
    cfg = SolverConfig(damping=0.05, max_iters=25, tol=1e-9, restarts=0, keep_iterates=True)
    res = solve_matching(MODEL65, FAMILY, cfg)
    assert not res.converged
    assert res.converged == (res.report.max_z <= cfg.tol)
    assert len(res.iterates) == res.trace.shape[0] == 26
    for k, prior in enumerate(res.iterates):
        assert z_map(MODEL65, FAMILY, prior).max_z == pytest.approx(res.trace[k, 0], abs=1e-12)
        if k + 1 < len(res.iterates):
            step = w1_1d(prior, res.iterates[k + 1])
            assert step == pytest.approx(res.trace[k, 1], abs=1e-12)
            image = q_map(MODEL65, FAMILY, prior)
            np.testing.assert_allclose(res.iterates[k + 1].mass, damped_step(prior, image, 0.05).mass, atol=1e-15)


def test_restarts_keep_the_best_run():
    cfg = SolverConfig(damping=0.05, max_iters=10, tol=1e-9, restarts=2, seed=3)
    best = solve_matching(MODEL65, FAMILY, cfg)
    first = solve_matching(MODEL65, FAMILY, SolverConfig(damping=0.05, max_iters=10, tol=1e-9, restarts=0))
    assert best.max_z <= first.max_z
    assert best.seed == 3
    again = solve_matching(MODEL65, FAMILY, cfg)
    np.testing.assert_array_equal(again.prior.mass, best.prior.mass)


def test_solver_config_validation():
    for bad in (dict(damping=0), dict(damping=1.5), dict(tol=0), dict(max_iters=-1),
                dict(plus_convention="abs"), dict(init="random")):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_iterates_stay_in_agd():
    res = solve_matching(MODEL65, FAMILY, SolverConfig(damping=0.05, max_iters=200, tol=1e-9, restarts=0,
                                                       keep_iterates=True))
    for prior in res.iterates:
        assert agd_membership(prior, 0.1, 0.25)
        assert agd_membership(q_map(MODEL65, FAMILY, prior), 0.1, 0.25)


def test_agd_membership_examples():
    grid = ParameterGrid.from_points(np.linspace(0.0, 1.0, 1001))
    assert agd_membership(DiscreteMeasure.uniform(grid), 0.1, 0.5)
    assert not agd_membership(DiscreteMeasure.dirac(grid, 0.0), 0.01, 0.01)
    with pytest.raises(DomainError):
        agd_membership(DiscreteMeasure.uniform(ParameterGrid.uniform(-1, 1, 5)), 0.1, 0.5)


def test_param_schedule_examples():
    assert param_schedule(0.01, 0.1, 0.05) == pytest.approx((0.01, 0.01, 1e-8, 100.0))
    with pytest.raises(ParameterViolation, match="alpha"):
        param_schedule(0.2, 0.1, 0.05)
    with pytest.raises(ParameterViolation, match="eps"):
        param_schedule(0.06, 0.1, 0.05)
    with pytest.raises(ParameterViolation, match="eps"):
        param_schedule(0.01, 0.1, 0.2)
    with pytest.raises(ParameterViolation, match="C"):
        param_schedule(0.04, 0.1, 0.05, C=30.0)
    with pytest.raises(ValueError):
        param_schedule(0.0, 0.1, 0.05)


@pytest.mark.parametrize("alpha, eps, C", [(0.1, 0.03, 1.6), (0.1, 0.05, 40.0), (0.2, 0.15, 10.0)])
def test_largest_admissible_a_matches_scan(alpha, eps, C):
    step = 1e-5
    largest = 0.0
    for a in np.arange(step, alpha, step):
        try:
            param_schedule(float(a), alpha, eps, C)
        except ParameterViolation:
            continue
        largest = float(a)
    assert max_schedule_a(alpha, eps, C) == pytest.approx(largest, abs=2 * step)


def test_ffin_examples():
    assert not ffin_check(ParameterGrid.from_points(np.linspace(0.0, 0.1, 2000), 0.0, 1.0))
    assert not ffin_check(ParameterGrid.uniform(0.0, 1.0, 512))
    assert ffin_check(ParameterGrid.uniform(0.0, 1.0, 10001))
    # a single gap of width 0.02 empties an interval longer than 0.01
    pts = np.linspace(0.0, 1.0, 10001)
    holed = ParameterGrid.from_points(pts[(pts < 0.5) | (pts > 0.52)], 0.0, 1.0)
    assert not ffin_check(holed)
