"""Dense symmetric-matrix helpers and information-form Gaussian beliefs.

Everything downstream (factor graphs, redundancy metrics, the SLAM pipeline)
funnels its linear algebra through this module so that symmetry and positive
definiteness are checked in one place.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Smallest Cholesky pivot accepted before a matrix is declared numerically
# indefinite, and the relative tolerance for symmetry validation.
PIVOT_TOL = 1e-10
SYM_RTOL = 1e-10

# Relative eigenvalue tolerance for "is PSD" checks on quadratic-form weights.
PSD_TOL = 1e-8


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a matrix required to be PD fails its Cholesky check.

    Carries the order of the first non-positive leading minor so callers can
    report which pivot failed.
    """

    def __init__(self, name: str, minor: int, pivot: float | None = None):
        self.name = name
        self.minor = minor
        self.pivot = pivot
        detail = f" (pivot {pivot:.3e})" if pivot is not None else ""
        super().__init__(
            f"{name} is not positive definite: leading minor of order "
            f"{minor} is not positive{detail}"
        )


def check_symmetric(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate that M is square and symmetric, return the symmetrized copy.

    Symmetry is required within SYM_RTOL relative to the largest entry; the
    returned array is 0.5 * (M + M.T) so later Cholesky calls see an exactly
    symmetric matrix.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    scale = max(1.0, float(np.abs(M).max()) if M.size else 1.0)
    skew = float(np.abs(M - M.T).max()) if M.size else 0.0
    if skew > SYM_RTOL * scale:
        raise ValueError(
            f"{name} is not symmetric: max |M - M.T| = {skew:.3e} "
            f"exceeds {SYM_RTOL:.1e} * {scale:.3e}"
        )
    return 0.5 * (M + M.T)


def _first_bad_minor(M: np.ndarray) -> int:
    """Order of the first leading principal minor that is not positive."""
    for k in range(1, M.shape[0] + 1):
        try:
            L = np.linalg.cholesky(M[:k, :k])
        except np.linalg.LinAlgError:
            return k
        if np.diagonal(L).min() <= PIVOT_TOL:
            return k
    return M.shape[0]


def cholesky_pd(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of a symmetric PD matrix.

    Raises NotPositiveDefiniteError naming the offending leading minor when
    the factorization fails or produces a pivot at or below PIVOT_TOL.
    """
    M = check_symmetric(M, name=name)
    try:
        L = scipy.linalg.cholesky(M, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        raise NotPositiveDefiniteError(name, _first_bad_minor(M)) from None
    piv = float(np.diagonal(L).min())
    if piv <= PIVOT_TOL:
        k = int(np.argmin(np.diagonal(L))) + 1
        raise NotPositiveDefiniteError(name, k, pivot=piv)
    return L


def logdet_pd(M: np.ndarray, name: str = "matrix") -> float:
    """log det M for symmetric PD M, via Cholesky (never the raw determinant)."""
    L = cholesky_pd(M, name=name)
    return float(2.0 * np.sum(np.log(np.diagonal(L))))


def invert_pd(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Explicit inverse of a symmetric PD matrix (dims here are small)."""
    L = cholesky_pd(M, name=name)
    inv = scipy.linalg.cho_solve((L, True), np.eye(M.shape[0]), check_finite=False)
    return 0.5 * (inv + inv.T)


def solve_pd(M: np.ndarray, b: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Solve M x = b for symmetric PD M."""
    L = cholesky_pd(M, name=name)
    return scipy.linalg.cho_solve((L, True), b, check_finite=False)


def quadratic_form(v: np.ndarray, M: np.ndarray) -> float:
    """v.T M v with no definiteness check; may be negative for indefinite M."""
    v = np.asarray(v, dtype=float)
    return float(v @ M @ v)


def mahalanobis_sq(v: np.ndarray, M: np.ndarray) -> float:
    """Squared Mahalanobis norm v.T M v for PSD weight M.

    M is eigenvalue-checked: a negative eigenvalue beyond PSD_TOL (relative)
    is an error. Tiny negative results from roundoff are clamped to 0.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    M = check_symmetric(M, name="weight")
    if v.shape[0] != M.shape[0]:
        raise ValueError(f"vector dim {v.shape[0]} != weight dim {M.shape[0]}")
    w = np.linalg.eigvalsh(M)
    scale = max(1.0, float(np.abs(w).max()))
    if w.min() < -PSD_TOL * scale:
        raise ValueError(
            f"weight matrix has negative eigenvalue {w.min():.3e}, not PSD"
        )
    return max(quadratic_form(v, M), 0.0)


def schur_complement(M: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Marginal information matrix: Schur complement onto the kept indices.

    For an information matrix partitioned over (keep, drop) index sets this is
    M_kk - M_kd M_dd^-1 M_dk, which is the information of the marginal over
    the kept variables. The dropped block must be PD.
    """
    M = check_symmetric(M, name="information matrix")
    keep = np.asarray(keep, dtype=int)
    drop = np.setdiff1d(np.arange(M.shape[0]), keep)
    if drop.size == 0:
        return M.copy()
    A = M[np.ix_(keep, keep)]
    B = M[np.ix_(keep, drop)]
    D = M[np.ix_(drop, drop)]
    out = A - B @ solve_pd(D, B.T, name="marginalized block")
    return 0.5 * (out + out.T)


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    """Gaussian in information form: mean vector and PD information matrix."""

    mean: np.ndarray
    info: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        if mean.ndim != 1:
            raise ValueError(f"mean must be 1-D, got shape {mean.shape}")
        info = check_symmetric(self.info, name="info")
        if info.shape[0] != mean.shape[0]:
            raise ValueError(
                f"mean dim {mean.shape[0]} != info dim {info.shape[0]}"
            )
        chol = cholesky_pd(info, name="info")
        mean = mean.copy()
        mean.setflags(write=False)
        info.setflags(write=False)
        chol.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "info", info)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of the information matrix."""
        return self._chol

    def logdet_info(self) -> float:
        return float(2.0 * np.sum(np.log(np.diagonal(self._chol))))

    def cov(self) -> np.ndarray:
        """Materialized covariance (inverse information)."""
        inv = scipy.linalg.cho_solve(
            (self._chol, True), np.eye(self.dim), check_finite=False
        )
        return 0.5 * (inv + inv.T)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw `count` samples, shape (count, dim).

        With info = L L.T, a draw is mean + L^-T eps for standard normal eps;
        this avoids forming the covariance.
        """
        if count < 1:
            raise ValueError("count must be >= 1")
        eps = rng.standard_normal((self.dim, count))
        dev = scipy.linalg.solve_triangular(
            self._chol, eps, lower=True, trans="T", check_finite=False
        )
        return self.mean[None, :] + dev.T


def conditional_mean_posterior(
    belief_b: GaussianBelief, delta: np.ndarray, x: np.ndarray
) -> np.ndarray:
    """Conditional expectation of the posterior mean given the true state x.

    Measurements drawn from state x update the prior (mu_B, Lam_B) through an
    information increment Delta; averaging over the measurement noise,

        E(mu_post | x) = (Lam_B + Delta)^-1 (Lam_B mu_B + Delta x).

    The result is affine in x.
    """
    delta = check_symmetric(delta, name="delta")
    x = np.asarray(x, dtype=float).reshape(-1)
    if delta.shape[0] != belief_b.dim or x.shape[0] != belief_b.dim:
        raise ValueError("delta/x dimension mismatch with prior belief")
    lam_post = belief_b.info + delta
    rhs = belief_b.info @ belief_b.mean + delta @ x
    return solve_pd(lam_post, rhs, name="posterior info")


def expected_recentred_quadratic(
    belief_b: GaussianBelief,
    delta: np.ndarray,
    T: np.ndarray,
    m: np.ndarray,
    x: np.ndarray,
) -> float:
    """E(||mu_post + m||_T^2 | x) for PSD weight T and offset m.

    The posterior mean under measurements from state x is Gaussian with the
    conditional mean above and covariance Ltilde^-1 Delta Ltilde^-1, so

        E = tr(T Ltilde^-1 Delta Ltilde^-1) + ||E(mu_post|x) + m||_T^2

    with Ltilde = Lam_B + Delta.
    """
    delta = check_symmetric(delta, name="delta")
    T = check_symmetric(T, name="T")
    m = np.asarray(m, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    d = belief_b.dim
    if not (delta.shape[0] == T.shape[0] == m.shape[0] == x.shape[0] == d):
        raise ValueError("argument dimension mismatch with prior belief")
    lam_post = belief_b.info + delta
    inv_post = invert_pd(lam_post, name="posterior info")
    trace_term = float(np.trace(T @ inv_post @ delta @ inv_post))
    cond_mean = inv_post @ (belief_b.info @ belief_b.mean + delta @ x)
    return trace_term + mahalanobis_sq(cond_mean + m, T)
