"""Frequentist coverage of acceptance fields and the coverage-gap map z."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import PosteriorUndefined
from .measure import DiscreteMeasure, _frozen, total_variation
from .model import Model


@dataclass(frozen=True, eq=False)
class CoverageReport:
    """Per-parameter coverage and gap z = (1 - alpha) - coverage."""

    theta: np.ndarray
    coverage: np.ndarray
    z: np.ndarray
    alpha: float

    def __post_init__(self):
        for name in ("theta", "coverage", "z"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def max_z(self) -> float:
        return float(self.z.max())

    @property
    def min_z(self) -> float:
        return float(self.z.min())

    @property
    def argmax_theta(self) -> int:
        return int(np.argmax(self.z))

    def z_plus(self, convention: str = "max") -> np.ndarray:
        """Positive part max(0, z), or min(0, z) under ``paper-literal-min``."""
        if convention == "max":
            return np.maximum(0.0, self.z)
        if convention == "paper-literal-min":
            return np.minimum(0.0, self.z)
        raise ValueError(f"unknown convention {convention!r}")


def acceptance_fields(m: Model, family, prior: DiscreteMeasure) -> list:
    """One field per sample point; ``None`` where the posterior is undefined."""
    fields = []
    for x in range(m.sample_space.size):
        try:
            fields.append(family(m, prior, x))
        except PosteriorUndefined:
            fields.append(None)
    return fields


def _coverage_from_fields(m: Model, fields, alpha: float):
    """Coverage and gap per grid point.

    The gap is summed as sum_x ((1 - alpha) - psi_x) P_theta(x), so a field
    equal to 1 - alpha gives exactly zero.
    """
    probs = m.probabilities()
    cover = np.zeros(m.grid.size)
    gap = np.zeros(m.grid.size)
    for x, field in enumerate(fields):
        if field is None:
            if np.any(probs[:, x] > 0):
                raise PosteriorUndefined(
                    f"posterior undefined at x={m.sample_space.labels[x]!r} but it has positive probability"
                )
            continue
        cover += field.psi * probs[:, x]
        gap += ((1 - alpha) - field.psi) * probs[:, x]
    return cover, gap


def coverage_at(m: Model, family, prior: DiscreteMeasure, theta_index: int) -> float:
    """sum_x psi_x(theta) q(theta, x) nu(x) at one grid point."""
    total = 0.0
    for x in range(m.sample_space.size):
        p = m.q[theta_index, x] * m.sample_space.nu[x]
        if p == 0:
            continue
        total += family(m, prior, x).psi[theta_index] * p
    return total


def z_map(m: Model, family, prior: DiscreteMeasure, fields=None) -> CoverageReport:
    """Coverage gap z at every grid point; fields are computed once per x."""
    if fields is None:
        fields = acceptance_fields(m, family, prior)
    cover, gap = _coverage_from_fields(m, fields, family.alpha)
    return CoverageReport(m.grid.points, cover, gap, family.alpha)


def is_matching(report: CoverageReport, tol: float = 5e-3) -> bool:
    return report.max_z <= tol


def bayes_residual(report: CoverageReport, prior: DiscreteMeasure) -> float:
    """sum_theta pi(theta) z_theta; zero for exactly credible families."""
    return float(np.dot(prior.mass, report.z))


def continuity_diagnostic(m: Model, family, prior: DiscreteMeasure, other: DiscreteMeasure) -> dict:
    """How much the z map moves between two priors, against their TV gap."""
    a = z_map(m, family, prior)
    b = z_map(m, family, other)
    return {
        "total_variation": total_variation(prior, other),
        "max_abs_z_change": float(np.max(np.abs(a.z - b.z))),
    }


def write_coverage_csv(report: CoverageReport, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["theta", "coverage", "z"])
        for row in zip(report.theta, report.coverage, report.z):
            out.writerow([format(float(v), ".17g") for v in row])
