"""Specific-quality functions and redundancy estimators.

Two pointwise qualities are supported, both closed-form for linear Gaussian
factor graphs. For a source J with information increment Delta_J over a prior
(mu_B, Lam_B), write Ltilde = Lam_B + Delta_J.

Information quality (specific information):

    S_wb(x) = I(Z_J; X) - 0.5 [tr(M') - ||x - mu_B||^2_M]
    M  = Lam_B - Lam_B Ltilde^-1 Lam_B          (PSD)
    M' = Delta_J Ltilde^-1                       (only its trace is used)

which averages to the mutual information under x ~ prior.

Wasserstein quality (expected reduction of squared estimation error):

    S_wass(x) = tr(N') + ||mu_B - x||^2_N
    N' = Lam_B^-1 - Ltilde^-1 - Ltilde^-1 Delta_J Ltilde^-1   (PSD)
    N  = I - Lam_B Ltilde^-2 Lam_B               (may be indefinite)

which averages to Q_wass = 2 tr(Lam_B^-1 - Ltilde^-1), twice the trace drop
of the covariance.

Redundancy of an antichain alpha is E_x min_{J in alpha} S_J(x) under the
prior, estimated by Monte Carlo (or quadrature in 1-D).
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from .factor_graph import SupplementedGraph
from .gauss import (
    GaussianBelief,
    check_symmetric,
    invert_pd,
    logdet_pd,
    mahalanobis_sq,
    quadratic_form,
)
from .lattice import Antichain

logger = logging.getLogger(__name__)


class QualityKind(enum.Enum):
    """Which specific-quality function a metric uses."""

    WB = "wb"
    WASS = "wass"

    @classmethod
    def parse(cls, text) -> "QualityKind":
        if isinstance(text, cls):
            return text
        try:
            return cls(str(text).lower())
        except ValueError:
            raise ValueError(f"unknown quality kind {text!r}; use 'wb' or 'wass'")


@dataclass(frozen=True, eq=False)
class WbCoefficients:
    """Closed-form pieces of S_wb: constant mi, trace matrix M', quadratic M."""

    mi: float
    M: np.ndarray
    M_prime: np.ndarray


@dataclass(frozen=True, eq=False)
class WassCoefficients:
    """Closed-form pieces of S_wass.

    N_prime is PSD; N is not guaranteed PSD when Lam_B and Delta do not
    commute, so its smallest eigenvalue is recorded rather than enforced.
    """

    N: np.ndarray
    N_prime: np.ndarray
    n_min_eig: float

    @property
    def n_is_psd(self) -> bool:
        scale = max(1.0, float(np.abs(self.N).max()))
        return self.n_min_eig >= -1e-10 * scale


@dataclass(frozen=True)
class RedundancyEstimate:
    """Monte Carlo redundancy estimate with its standard error.

    argmin_counts[i] is how often source i achieved the pointwise minimum
    (ties go to the first, so counts sum to n_samples).
    """

    value: float
    std_error: float
    n_samples: int
    kind: QualityKind
    argmin_counts: tuple[int, ...]


def _delta_and_prior(graph: SupplementedGraph, J: Iterable[int]):
    idx = sorted({int(j) for j in J})
    supp = set(graph.supplemental)
    bad = [j for j in idx if j not in supp]
    if bad:
        raise ValueError(f"J must contain only supplemental factor indices, got {bad}")
    return graph.prior_belief(), graph.stack_subgraph(idx).delta


def wb_coefficients_info(lam_b: np.ndarray, delta: np.ndarray) -> WbCoefficients:
    """Information-quality coefficients from a prior information matrix and Delta."""
    lam_b = check_symmetric(lam_b, name="prior info")
    delta = check_symmetric(delta, name="delta")
    if lam_b.shape != delta.shape:
        raise ValueError("prior info and delta must have matching shapes")
    lam_post = lam_b + delta
    inv_post = invert_pd(lam_post, name="posterior info")
    mi = max(0.5 * (logdet_pd(lam_post) - logdet_pd(lam_b)), 0.0)
    M = lam_b - lam_b @ inv_post @ lam_b
    Mp = delta @ inv_post
    return WbCoefficients(
        mi=mi, M=0.5 * (M + M.T), M_prime=0.5 * (Mp + Mp.T)
    )


def wass_coefficients_info(lam_b: np.ndarray, delta: np.ndarray) -> WassCoefficients:
    """Wasserstein-quality coefficients from a prior information matrix and Delta."""
    lam_b = check_symmetric(lam_b, name="prior info")
    delta = check_symmetric(delta, name="delta")
    if lam_b.shape != delta.shape:
        raise ValueError("prior info and delta must have matching shapes")
    inv_b = invert_pd(lam_b, name="prior info")
    inv_post = invert_pd(lam_b + delta, name="posterior info")
    Np = inv_b - inv_post - inv_post @ delta @ inv_post
    N = np.eye(lam_b.shape[0]) - lam_b @ inv_post @ inv_post @ lam_b
    N = 0.5 * (N + N.T)
    min_eig = float(np.linalg.eigvalsh(N).min())
    if min_eig < -1e-10 * max(1.0, float(np.abs(N).max())):
        # Legal: N is indefinite for some non-commuting (Lam_B, Delta) pairs.
        logger.debug("Wasserstein N matrix not PSD: min eigenvalue %.3e", min_eig)
    return WassCoefficients(N=N, N_prime=0.5 * (Np + Np.T), n_min_eig=min_eig)


def wb_coefficients(graph: SupplementedGraph, J: Iterable[int]) -> WbCoefficients:
    prior, delta = _delta_and_prior(graph, J)
    return wb_coefficients_info(prior.info, delta)


def wass_coefficients(graph: SupplementedGraph, J: Iterable[int]) -> WassCoefficients:
    prior, delta = _delta_and_prior(graph, J)
    return wass_coefficients_info(prior.info, delta)


def specific_info_wb(coeffs: WbCoefficients, mu_b: np.ndarray, x: np.ndarray) -> float:
    """S_wb(x) = mi - 0.5 (tr(M') - ||x - mu_B||^2_M)."""
    dev = np.asarray(x, dtype=float) - np.asarray(mu_b, dtype=float)
    return coeffs.mi - 0.5 * (
        float(np.trace(coeffs.M_prime)) - mahalanobis_sq(dev, coeffs.M)
    )


def specific_wer(coeffs: WassCoefficients, mu_b: np.ndarray, x: np.ndarray) -> float:
    """S_wass(x) = tr(N') + ||mu_B - x||^2_N.

    N may be indefinite, so the quadratic term is evaluated without a PSD
    check and the value can dip below tr(N') for some states.
    """
    dev = np.asarray(mu_b, dtype=float) - np.asarray(x, dtype=float)
    return float(np.trace(coeffs.N_prime)) + quadratic_form(dev, coeffs.N)


def _wb_batch(coeffs: WbCoefficients, mu_b: np.ndarray, X: np.ndarray) -> np.ndarray:
    dev = X - mu_b[None, :]
    quad = np.einsum("ni,ij,nj->n", dev, coeffs.M, dev)
    return coeffs.mi - 0.5 * (np.trace(coeffs.M_prime) - quad)


def _wass_batch(coeffs: WassCoefficients, mu_b: np.ndarray, X: np.ndarray) -> np.ndarray:
    dev = mu_b[None, :] - X
    quad = np.einsum("ni,ij,nj->n", dev, coeffs.N, dev)
    return np.trace(coeffs.N_prime) + quad


def quality_info(lam_b: np.ndarray, delta: np.ndarray, kind: QualityKind) -> float:
    """Source quality Q(J): the prior-average of the specific quality.

    WB gives the mutual information; WASS gives 2 tr(Lam_B^-1 - Ltilde^-1).
    Both are >= 0 and monotone under adding factors to J.
    """
    kind = QualityKind.parse(kind)
    lam_b = check_symmetric(lam_b, name="prior info")
    delta = check_symmetric(delta, name="delta")
    if kind is QualityKind.WB:
        return max(0.5 * (logdet_pd(lam_b + delta) - logdet_pd(lam_b)), 0.0)
    inv_b = invert_pd(lam_b, name="prior info")
    inv_post = invert_pd(lam_b + delta, name="posterior info")
    return max(2.0 * float(np.trace(inv_b) - np.trace(inv_post)), 0.0)


def quality(graph: SupplementedGraph, J: Iterable[int], kind: QualityKind) -> float:
    prior, delta = _delta_and_prior(graph, J)
    return quality_info(prior.info, delta, kind)


def _source_deltas(graph: SupplementedGraph, alpha: Antichain) -> list[np.ndarray]:
    supp = set(graph.supplemental)
    deltas = []
    for src in alpha.sources:
        bad = [j for j in src if j not in supp]
        if bad:
            raise ValueError(
                f"antichain source {sorted(src)} contains non-supplemental "
                f"indices {sorted(bad)}"
            )
        deltas.append(graph.stack_subgraph(src).delta)
    return deltas


def _batch_values(
    kind: QualityKind,
    prior: GaussianBelief,
    deltas: Sequence[np.ndarray],
    X: np.ndarray,
) -> np.ndarray:
    """Specific-quality values per source, shape (n_sources, n_samples)."""
    rows = []
    for delta in deltas:
        if kind is QualityKind.WB:
            c = wb_coefficients_info(prior.info, delta)
            rows.append(_wb_batch(c, prior.mean, X))
        else:
            c = wass_coefficients_info(prior.info, delta)
            rows.append(_wass_batch(c, prior.mean, X))
    return np.vstack(rows)


def redundancy_mc_info(
    prior: GaussianBelief,
    deltas: Sequence[np.ndarray],
    kind: QualityKind,
    n_samples: int = 10_000,
    rng_seed=0,
) -> RedundancyEstimate:
    """Monte Carlo estimate of E_x min_i S_i(x) with x ~ prior.

    One source's delta per antichain element. Deterministic for a fixed seed;
    the standard error is the sample standard deviation over sqrt(n_samples).
    """
    kind = QualityKind.parse(kind)
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    if not deltas:
        raise ValueError("need at least one source delta")
    rng = np.random.default_rng(rng_seed)
    X = prior.sample(rng, n_samples)
    vals = _batch_values(kind, prior, deltas, X)
    mins = vals.min(axis=0)
    which = vals.argmin(axis=0)
    counts = np.bincount(which, minlength=len(deltas))
    return RedundancyEstimate(
        value=float(mins.mean()),
        std_error=float(mins.std(ddof=1) / np.sqrt(n_samples)),
        n_samples=int(n_samples),
        kind=kind,
        argmin_counts=tuple(int(c) for c in counts),
    )


def redundancy_mc(
    graph: SupplementedGraph,
    alpha: Antichain,
    kind: QualityKind,
    n_samples: int = 10_000,
    rng_seed=0,
) -> RedundancyEstimate:
    """Monte Carlo redundancy of an antichain of supplemental index sets."""
    kind = QualityKind.parse(kind)
    deltas = _source_deltas(graph, alpha)
    return redundancy_mc_info(
        graph.prior_belief(), deltas, kind, n_samples=n_samples, rng_seed=rng_seed
    )


def _quadratic_pieces(
    kind: QualityKind, prior: GaussianBelief, deltas: Sequence[np.ndarray]
) -> list[tuple[float, float]]:
    """1-D specific qualities as (constant, quadratic coefficient) pairs.

    S_J(x) = a_J + b_J (x - mu_B)^2 in one dimension for both kinds.
    """
    pieces = []
    for delta in deltas:
        if kind is QualityKind.WB:
            c = wb_coefficients_info(prior.info, delta)
            pieces.append(
                (c.mi - 0.5 * float(np.trace(c.M_prime)), 0.5 * float(c.M[0, 0]))
            )
        else:
            c = wass_coefficients_info(prior.info, delta)
            pieces.append((float(np.trace(c.N_prime)), float(c.N[0, 0])))
    return pieces


def redundancy_quadrature_1d_info(
    prior: GaussianBelief,
    deltas: Sequence[np.ndarray],
    kind: QualityKind,
) -> float:
    """Adaptive-quadrature redundancy for 1-D states (reference oracle).

    Integrates min_J S_J(x) against the prior density over mu +/- 15 sigma,
    passing the crossing points of the quadratic pieces as breakpoints.
    """
    kind = QualityKind.parse(kind)
    if prior.dim != 1:
        raise ValueError("quadrature reference only supports 1-D states")
    if not deltas:
        raise ValueError("need at least one source delta")
    pieces = _quadratic_pieces(kind, prior, deltas)
    mu = float(prior.mean[0])
    sigma = 1.0 / np.sqrt(float(prior.info[0, 0]))
    lo, hi = mu - 15.0 * sigma, mu + 15.0 * sigma

    # Pieces intersect where (a_i - a_j) + (b_i - b_j) t^2 = 0, t = x - mu.
    points = []
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            da = pieces[i][0] - pieces[j][0]
            db = pieces[i][1] - pieces[j][1]
            if abs(db) > 1e-300:
                t2 = -da / db
                if t2 > 0:
                    t = float(np.sqrt(t2))
                    for cand in (mu - t, mu + t):
                        if lo < cand < hi:
                            points.append(cand)

    a = np.array([p[0] for p in pieces])
    b = np.array([p[1] for p in pieces])
    norm = 1.0 / (sigma * np.sqrt(2.0 * np.pi))

    def integrand(x: float) -> float:
        t2 = (x - mu) ** 2
        s = (a + b * t2).min()
        return s * norm * np.exp(-0.5 * t2 / sigma**2)

    val, _ = integrate.quad(
        integrand, lo, hi, points=sorted(set(points)) or None,
        epsabs=1e-9, epsrel=1e-9, limit=400,
    )
    return float(val)


def redundancy_quadrature_1d(
    graph: SupplementedGraph, alpha: Antichain, kind: QualityKind
) -> float:
    if graph.state_dim != 1:
        raise ValueError("quadrature reference only supports 1-D states")
    deltas = _source_deltas(graph, alpha)
    return redundancy_quadrature_1d_info(graph.prior_belief(), deltas, QualityKind.parse(kind))


def redundancy_report(
    graph: SupplementedGraph,
    alpha: Antichain,
    kind: QualityKind,
    n_samples: int = 10_000,
    rng_seed=0,
) -> dict:
    """JSON-ready record for one evaluated antichain.

    Contains the kind, the antichain's sources, the Monte Carlo estimate with
    its standard error and sample count, and each source's quality.
    """
    kind = QualityKind.parse(kind)
    est = redundancy_mc(graph, alpha, kind, n_samples=n_samples, rng_seed=rng_seed)
    return {
        "kind": kind.value,
        "antichain": [sorted(src) for src in alpha.sources],
        "value": est.value,
        "std_error": est.std_error,
        "n_samples": est.n_samples,
        "per_source_quality": [
            quality(graph, src, kind) for src in alpha.sources
        ],
    }
