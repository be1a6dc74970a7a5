"""Matching priors for exactly credible randomized regions on gridded parameter spaces."""

from .coverage import CoverageReport, coverage_at, is_matching, z_map
from .credible import (
    AcceptanceField,
    RegionConfig,
    RegionFamily,
    TrivialFamily,
    correction_R,
    credible_ball,
    hpd_region,
    perturbed_acceptance,
    perturbed_region,
    relaxed_ball,
    relaxed_hpd,
    support_of,
    trivial_region,
)
from .matching import (
    SolveResult,
    SolverConfig,
    agd_membership,
    ffin_check,
    param_schedule,
    q_map,
    solve_matching,
)
from .measure import (
    DensityField,
    DiscreteMeasure,
    ParameterGrid,
    fatten_indices,
    lipschitz_quotient,
    mean_of,
    w1_1d,
    w1_flow,
)
from .model import Model, SampleSpace, bernoulli_model, mcshane_extend, model_from_table, supermodel_extend
from .posterior import PerturbationSystem, marginal, perturb_prior, posterior, posterior_density

__all__ = [name for name in dir() if not name.startswith("_")]
