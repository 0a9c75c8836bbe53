"""Redundancy metrics for linear Gaussian factor graphs.

The package measures how redundantly a state estimate is supported by groups
of measurement factors. It provides information-form Gaussian primitives, a
supplemented linear factor graph, the antichain lattice used by partial
information decomposition, two specific-quality metrics with Monte Carlo
redundancy estimators, and a 2D landmark SLAM simulation study that compares
redundancy against worst-case trajectory error.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .gauss import (
    GaussianBelief,
    NotPositiveDefiniteError,
    cholesky_pd,
    check_symmetric,
    conditional_mean_posterior,
    expected_recentred_quadratic,
    logdet_pd,
    mahalanobis_sq,
    schur_complement,
)
from .factor_graph import LinearFactor, SubgraphInfo, SupplementedGraph
from .lattice import (
    Antichain,
    antichain_leq,
    bivariate_atoms,
    enumerate_antichains,
    validate_antichain,
)
from .metrics import (
    QualityKind,
    RedundancyEstimate,
    WbCoefficients,
    WassCoefficients,
    quality,
    quality_info,
    redundancy_mc,
    redundancy_mc_info,
    redundancy_quadrature_1d,
    specific_info_wb,
    specific_wer,
    wb_coefficients,
    wb_coefficients_info,
    wass_coefficients,
    wass_coefficients_info,
)
from .se2 import Pose2, se2_compose, se2_inverse, wrap_angle
from .sim2d import SimConfig, SimWorld, simulate_world
from .alignment import umeyama_align, wc_ate

__all__ = [
    "Antichain",
    "GaussianBelief",
    "LinearFactor",
    "NotPositiveDefiniteError",
    "Pose2",
    "QualityKind",
    "RedundancyEstimate",
    "SimConfig",
    "SimWorld",
    "SubgraphInfo",
    "SupplementedGraph",
    "WassCoefficients",
    "WbCoefficients",
    "antichain_leq",
    "bivariate_atoms",
    "check_symmetric",
    "cholesky_pd",
    "conditional_mean_posterior",
    "enumerate_antichains",
    "expected_recentred_quadratic",
    "logdet_pd",
    "mahalanobis_sq",
    "quality",
    "quality_info",
    "redundancy_mc",
    "redundancy_mc_info",
    "redundancy_quadrature_1d",
    "schur_complement",
    "se2_compose",
    "se2_inverse",
    "simulate_world",
    "specific_info_wb",
    "specific_wer",
    "umeyama_align",
    "validate_antichain",
    "wb_coefficients",
    "wb_coefficients_info",
    "wass_coefficients",
    "wass_coefficients_info",
    "wc_ate",
    "wrap_angle",
]
