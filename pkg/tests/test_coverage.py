import csv

import numpy as np
import pytest

from conftest import random_prior, sparse_prior
from matchprior.coverage import (
    CoverageReport,
    acceptance_fields,
    bayes_residual,
    continuity_diagnostic,
    coverage_at,
    is_matching,
    write_coverage_csv,
    z_map,
)
from matchprior.credible import ConstantFamily, RegionConfig, RegionFamily, TrivialFamily, credibility
from matchprior.errors import PosteriorUndefined
from matchprior.matching import schedule_config
from matchprior.measure import DiscreteMeasure, ParameterGrid, total_variation
from matchprior.model import bernoulli_model
from matchprior.posterior import PerturbationSystem, marginal, posterior

SCHEDULED = RegionFamily(schedule_config(0.02, 0.1, 0.03, 1.6))


def test_trivial_family_has_exact_coverage(bern257, rng):
    prior = random_prior(bern257.grid, rng)
    rep = z_map(bern257, TrivialFamily(0.1), prior)
    np.testing.assert_array_equal(rep.z, 0.0)
    np.testing.assert_allclose(rep.coverage, 0.9, atol=1e-15)
    assert coverage_at(bern257, TrivialFamily(0.1), prior, 17) == pytest.approx(0.9, abs=1e-15)
    assert is_matching(rep, tol=0.0)


def test_always_accepting_family(bern257, rng):
    prior = random_prior(bern257.grid, rng)
    rep = z_map(bern257, ConstantFamily(0.1, 1.0), prior)
    np.testing.assert_allclose(rep.coverage, 1.0, atol=1e-15)
    np.testing.assert_allclose(rep.z, -0.1, atol=1e-15)
    assert coverage_at(bern257, ConstantFamily(0.1, 1.0), prior, 3) == pytest.approx(1.0, abs=1e-15)


def test_coverage_at_centre_is_two_term_sum(bern257):
    prior = DiscreteMeasure.uniform(bern257.grid)
    i = 128
    assert bern257.grid.points[i] == pytest.approx(0.5, abs=1e-15)
    psi0 = SCHEDULED(bern257, prior, 0).psi[i]
    psi1 = SCHEDULED(bern257, prior, 1).psi[i]
    expected = 0.5 * psi0 + 0.5 * psi1
    assert coverage_at(bern257, SCHEDULED, prior, i) == pytest.approx(expected, abs=1e-15)
    assert z_map(bern257, SCHEDULED, prior).coverage[i] == pytest.approx(expected, abs=1e-15)


def test_report_invariants(bern257, rng):
    for family in (SCHEDULED, RegionFamily(RegionConfig(kind="ball", alpha=0.1))):
        rep = z_map(bern257, family, random_prior(bern257.grid, rng, 0.5))
        np.testing.assert_allclose(rep.z, 0.9 - rep.coverage, atol=1e-15)
        assert rep.z.min() >= -0.1 - 1e-12 and rep.z.max() <= 0.9 + 1e-12
        assert rep.max_z == rep.z[rep.argmax_theta]
        assert rep.min_z == rep.z.min()


def test_z_plus_conventions():
    grid = ParameterGrid.uniform(0.0, 1.0, 3)
    rep = CoverageReport(grid.points, np.array([0.8, 0.9, 1.0]), np.array([0.1, 0.0, -0.1]), 0.1)
    np.testing.assert_array_equal(rep.z_plus(), [0.1, 0.0, 0.0])
    np.testing.assert_array_equal(rep.z_plus("paper-literal-min"), [0.0, 0.0, -0.1])
    with pytest.raises(ValueError):
        rep.z_plus("abs")
    assert not is_matching(CoverageReport(grid.points, np.zeros(3), np.array([0.05, 0, 0]), 0.1), tol=1e-3)


@pytest.mark.parametrize("family", [
    SCHEDULED,
    RegionFamily(schedule_config(0.02, 0.1, 0.03, 1.6, kind="perturbed-hpd"), PerturbationSystem("convolution", 0.02**4)),
    RegionFamily(RegionConfig(kind="relaxed-ball", alpha=0.1, beta=20.0)),
    RegionFamily(RegionConfig(kind="relaxed-hpd", alpha=0.1, beta=20.0)),
    TrivialFamily(0.1),
])
def test_bayes_identity(bern257, family):
    rng = np.random.default_rng(17)
    for k in range(20):
        prior = random_prior(bern257.grid, rng, 0.5) if k % 2 else sparse_prior(bern257.grid, rng, 5)
        rep = z_map(bern257, family, prior)
        # marginal-weighted posterior rejection, summed over x instead of theta
        P = marginal(bern257, prior)
        direct = sum(P[x] * (0.9 - credibility(family(bern257, prior, x), posterior(bern257, prior, x)))
                     for x in (0, 1) if P[x] > 0)
        assert abs(bayes_residual(rep, prior)) <= 1e-6
        assert bayes_residual(rep, prior) == pytest.approx(direct, abs=1e-12)


def test_undefined_posterior_only_where_harmless():
    grid = ParameterGrid.from_points(np.linspace(0.0, 1.0, 33))
    with pytest.warns(UserWarning):
        m = bernoulli_model(grid)
    prior = DiscreteMeasure.dirac(grid, 0.0)
    fields = acceptance_fields(m, TrivialFamily(0.1), prior)
    assert fields[1] is not None  # trivial family never looks at the posterior
    family = RegionFamily(RegionConfig(kind="relaxed-ball", alpha=0.1, beta=5.0))
    fields = acceptance_fields(m, family, prior)
    assert fields[1] is None
    with pytest.raises(PosteriorUndefined):
        z_map(m, family, prior)

    # with the x = 1 atom impossible everywhere, the undefined posterior is skipped
    zero_grid = ParameterGrid.from_points(np.array([0.0]), 0.0, 0.1)
    with pytest.warns(UserWarning):
        m0 = bernoulli_model(zero_grid)
    rep = z_map(m0, family, DiscreteMeasure.uniform(zero_grid))
    # the relaxed ball of a point mass accepts it with probability 1 - alpha
    np.testing.assert_allclose(rep.coverage, 0.9, atol=1e-15)


def test_continuity_diagnostic(bern257, rng):
    a = sparse_prior(bern257.grid, rng, 6)
    mass = 0.999 * a.mass
    mass[0] += 0.001
    b = DiscreteMeasure.from_weights(bern257.grid, mass)
    out = continuity_diagnostic(bern257, SCHEDULED, a, b)
    assert out["total_variation"] == pytest.approx(total_variation(a, b))
    assert 0 <= out["max_abs_z_change"] <= 1


def test_coverage_csv_round_trip(tmp_path, bern257, rng):
    rep = z_map(bern257, SCHEDULED, random_prior(bern257.grid, rng))
    path = tmp_path / "coverage.csv"
    write_coverage_csv(rep, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["theta", "coverage", "z"]
    data = np.array(rows[1:], dtype=float)
    np.testing.assert_array_equal(data[:, 0], rep.theta)
    np.testing.assert_array_equal(data[:, 1], rep.coverage)
    np.testing.assert_array_equal(data[:, 2], rep.z)
