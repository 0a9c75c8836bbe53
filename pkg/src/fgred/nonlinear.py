"""Nonlinear SLAM factor graph, Gauss-Newton, and linearization.

Variables are keyed ("x", i) for poses (dim 3) and ("l", s) for landmarks
(dim 2). Factors expose a residual r(v) = h(v) - z and the Jacobians of h at
v; Gauss-Newton whitens both with the Cholesky factor of the measurement
precision and iterates linearize-solve-retract with additive updates (pose
angles re-wrapped).

Linearizing a factor at v0 yields the linear Gaussian factor with A = H and
z_eff = H v0 - r(v0), so factors that are already linear round-trip exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .factor_graph import LinearFactor, SupplementedGraph
from .gauss import GaussianBelief, NotPositiveDefiniteError, cholesky_pd, schur_complement, solve_pd
from .se2 import Pose2, se2_compose, wrap_angle
from .sim2d import N_LANDMARKS, SimConfig, SimWorld

VarKey = tuple[str, int]

# Floor applied to measurement variances so noiseless worlds still produce
# finite factor precisions; with exact measurements the MAP is exact anyway.
VAR_FLOOR = 1e-12

# Weak anchor prior keeping the gauge fixed without dominating the estimate.
ANCHOR_SIGMA = 0.3

Values = Mapping[VarKey, np.ndarray]


def _theta_indices(var: VarKey) -> tuple[int, ...]:
    return (2,) if var[0] == "x" else ()


@dataclass(frozen=True, eq=False)
class PriorFactor:
    """Direct observation of one pose in (x, y, theta) coordinates."""

    var: VarKey
    measurement: np.ndarray
    gamma: np.ndarray

    @property
    def vars(self) -> tuple[VarKey, ...]:
        return (self.var,)

    def residual(self, values: Values) -> np.ndarray:
        v = np.asarray(values[self.var], dtype=float)
        r = v - np.asarray(self.measurement, dtype=float)
        r[2] = wrap_angle(r[2])
        return r

    def jacobians(self, values: Values) -> tuple[np.ndarray, ...]:
        return (np.eye(3),)


@dataclass(frozen=True, eq=False)
class OdometryFactor:
    """Relative-pose measurement h(X_a, X_b) = coords(X_a^-1 X_b)."""

    var_from: VarKey
    var_to: VarKey
    measurement: np.ndarray
    gamma: np.ndarray

    @property
    def vars(self) -> tuple[VarKey, ...]:
        return (self.var_from, self.var_to)

    def _relative(self, values: Values) -> np.ndarray:
        x1, y1, t1 = values[self.var_from]
        x2, y2, t2 = values[self.var_to]
        c, s = np.cos(t1), np.sin(t1)
        dx, dy = x2 - x1, y2 - y1
        return np.array([c * dx + s * dy, -s * dx + c * dy, wrap_angle(t2 - t1)])

    def residual(self, values: Values) -> np.ndarray:
        r = self._relative(values) - np.asarray(self.measurement, dtype=float)
        r[2] = wrap_angle(r[2])
        return r

    def jacobians(self, values: Values) -> tuple[np.ndarray, ...]:
        x1, y1, t1 = values[self.var_from]
        x2, y2, _ = values[self.var_to]
        c, s = np.cos(t1), np.sin(t1)
        dx, dy = x2 - x1, y2 - y1
        h_x = c * dx + s * dy
        h_y = -s * dx + c * dy
        j_from = np.array(
            [[-c, -s, h_y], [s, -c, -h_x], [0.0, 0.0, -1.0]]
        )
        j_to = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
        return (j_from, j_to)


@dataclass(frozen=True, eq=False)
class RangeBearingFactor:
    """Range and body-frame bearing from a pose to a landmark."""

    pose_var: VarKey
    landmark_var: VarKey
    measurement: np.ndarray
    gamma: np.ndarray

    @property
    def vars(self) -> tuple[VarKey, ...]:
        return (self.pose_var, self.landmark_var)

    def _geometry(self, values: Values):
        x, y, t = values[self.pose_var]
        lx, ly = values[self.landmark_var]
        dx, dy = lx - x, ly - y
        q = dx * dx + dy * dy
        return x, y, t, dx, dy, q, np.sqrt(q)

    def residual(self, values: Values) -> np.ndarray:
        _, _, t, dx, dy, _, d = self._geometry(values)
        z = np.asarray(self.measurement, dtype=float)
        return np.array(
            [d - z[0], wrap_angle(np.arctan2(dy, dx) - t - z[1])]
        )

    def jacobians(self, values: Values) -> tuple[np.ndarray, ...]:
        _, _, _, dx, dy, q, d = self._geometry(values)
        if d < 1e-12:
            raise ValueError("degenerate range-bearing geometry: zero distance")
        j_pose = np.array(
            [[-dx / d, -dy / d, 0.0], [dy / q, -dx / q, -1.0]]
        )
        j_lm = np.array([[dx / d, dy / d], [-dy / q, dx / q]])
        return (j_pose, j_lm)


@dataclass(frozen=True)
class NonlinearGraph:
    """Factor list plus variable ordering, base set, and source groups."""

    variables: tuple[VarKey, ...]
    dims: dict
    factors: tuple
    base: frozenset[int]
    sources: dict

    def var_dim(self, var: VarKey) -> int:
        return self.dims[var]

    def touched_vars(self, subset: Iterable[int]) -> tuple[VarKey, ...]:
        """Variables touched by the subset's factors, in graph order."""
        touched = set()
        for j in subset:
            touched.update(self.factors[j].vars)
        return tuple(v for v in self.variables if v in touched)


@dataclass(frozen=True)
class GaussNewtonResult:
    values: dict
    converged: bool
    n_iters: int
    max_update: float


def _offsets(variables: Sequence[VarKey], dims: Mapping) -> tuple[dict, int]:
    off, total = {}, 0
    for v in variables:
        off[v] = total
        total += dims[v]
    return off, total


def solve_gauss_newton(
    graph: NonlinearGraph,
    subset: Iterable[int],
    init: Values,
    max_iters: int = 50,
    tol: float = 1e-8,
) -> GaussNewtonResult:
    """Gauss-Newton over the variables touched by `subset`.

    The subset must include the base factors so the normal equations are
    well posed. Non-convergence within max_iters is reported through the
    flag, never raised; a singular step also just flags failure.
    """
    subset = tuple(sorted({int(j) for j in subset}))
    if not graph.base <= set(subset):
        raise ValueError("subset must include every base factor")
    solve_vars = graph.touched_vars(subset)
    off, total = _offsets(solve_vars, graph.dims)
    values = {k: np.array(v, dtype=float) for k, v in init.items()}
    for v in solve_vars:
        if v not in values:
            raise ValueError(f"initial values missing variable {v}")

    whitened = []
    rows_total = 0
    for j in subset:
        f = graph.factors[j]
        Lt = cholesky_pd(f.gamma, name="gamma").T
        whitened.append((f, Lt))
        rows_total += Lt.shape[0]

    max_update = np.inf
    for it in range(1, max_iters + 1):
        J = np.zeros((rows_total, total))
        r = np.zeros(rows_total)
        row = 0
        for f, Lt in whitened:
            k = Lt.shape[0]
            r[row : row + k] = Lt @ f.residual(values)
            for var, jac in zip(f.vars, f.jacobians(values)):
                if var in off:
                    J[row : row + k, off[var] : off[var] + graph.dims[var]] = Lt @ jac
            row += k
        H = J.T @ J
        g = J.T @ r
        try:
            delta = solve_pd(0.5 * (H + H.T), -g, name="normal equations")
        except NotPositiveDefiniteError:
            return GaussNewtonResult(values, False, it, float("nan"))
        for var in solve_vars:
            d = graph.dims[var]
            values[var] = values[var] + delta[off[var] : off[var] + d]
            for t_idx in _theta_indices(var):
                values[var][t_idx] = wrap_angle(values[var][t_idx])
        max_update = float(np.abs(delta).max()) if delta.size else 0.0
        if max_update < tol:
            return GaussNewtonResult(values, True, it, max_update)
    return GaussNewtonResult(values, False, max_iters, max_update)


def stacked_state(
    graph: NonlinearGraph, values: Values, variables: Sequence[VarKey] | None = None
) -> np.ndarray:
    """Concatenate variable values into one vector in graph order."""
    variables = tuple(variables) if variables is not None else graph.variables
    return np.concatenate([np.asarray(values[v], dtype=float) for v in variables])


def linearize_factor(
    factor,
    values: Values,
    variables: Sequence[VarKey],
    off: Mapping,
    dims: Mapping,
    state_dim: int,
) -> LinearFactor:
    """First-order linear Gaussian surrogate of `factor` at `values`.

    A is the Jacobian embedded in the stacked state; the effective
    measurement is z_eff = A v0 - r(v0) so the surrogate's residual matches
    the true residual to first order at the linearization point.
    """
    r = factor.residual(values)
    A = np.zeros((r.shape[0], state_dim))
    args = []
    for var, jac in zip(factor.vars, factor.jacobians(values)):
        if var not in off:
            raise ValueError(f"factor touches {var}, outside the state")
        A[:, off[var] : off[var] + dims[var]] = jac
        args.extend(range(off[var], off[var] + dims[var]))
    v0 = np.concatenate([np.asarray(values[v], dtype=float) for v in variables])
    z_eff = A @ v0 - r
    return LinearFactor(A=A, z=z_eff, gamma=factor.gamma, args=tuple(args))


def linearize_to_lfg(
    graph: NonlinearGraph,
    values: Values,
    subset: Iterable[int] | None = None,
) -> SupplementedGraph:
    """Linearize a (subset of a) nonlinear graph into a SupplementedGraph.

    The stacked state is scalar-blocked (var_dim = 1), covering the
    variables touched by the subset in graph order. The base/supplemental
    split is preserved. Construction fails if the included base factors do
    not determine the included variables, e.g. a subset whose landmark is
    only seen by supplemental factors; marginalize such variables first
    (see pose_information_system).
    """
    subset = (
        tuple(range(len(graph.factors)))
        if subset is None
        else tuple(sorted({int(j) for j in subset}))
    )
    variables = graph.touched_vars(subset)
    off, total = _offsets(variables, graph.dims)
    lin = [
        linearize_factor(graph.factors[j], values, variables, off, graph.dims, total)
        for j in subset
    ]
    base_pos = [k for k, j in enumerate(subset) if j in graph.base]
    return SupplementedGraph(factors=lin, base=base_pos, n_vars=total, var_dim=1)


def pose_information_system(
    graph: NonlinearGraph,
    base_values: Values,
    source_values: Mapping[int, Values],
) -> tuple[GaussianBelief, dict]:
    """Pose-marginal information forms for redundancy evaluation.

    The base factors (anchor + odometry) are linearized at `base_values` to
    give the prior belief over the stacked poses. Each source's
    range-bearing factors are linearized at `source_values[s]` over
    (poses + its landmark) and the landmark block is Schur-marginalized,
    leaving an information increment Delta_s over the poses alone. Callers
    that compare sources against the prior should keep the pose entries of
    every linearization point equal, otherwise the gauge-like directions of
    the deltas are misaligned with the prior's weak directions.
    """
    pose_vars = tuple(v for v in graph.variables if v[0] == "x")
    off, pose_dim = _offsets(pose_vars, graph.dims)

    lam_b = np.zeros((pose_dim, pose_dim))
    rhs = np.zeros(pose_dim)
    for j in sorted(graph.base):
        lf = linearize_factor(
            graph.factors[j], base_values, pose_vars, off, graph.dims, pose_dim
        )
        lam_b += lf.information()
        rhs += lf.weighted_rhs()
    lam_b = 0.5 * (lam_b + lam_b.T)
    prior = GaussianBelief(mean=solve_pd(lam_b, rhs, name="base information"), info=lam_b)

    deltas = {}
    for s, vals in source_values.items():
        state = pose_vars + (("l", s),)
        s_off, s_dim = _offsets(state, graph.dims)
        delta_full = np.zeros((s_dim, s_dim))
        for j in sorted(graph.sources[s]):
            lf = linearize_factor(graph.factors[j], vals, state, s_off, graph.dims, s_dim)
            delta_full += lf.information()
        deltas[s] = schur_complement(
            0.5 * (delta_full + delta_full.T), np.arange(pose_dim)
        )
    return prior, deltas


def _floored_precision(cov: np.ndarray) -> np.ndarray:
    """Invert a measurement covariance, flooring eigenvalues at VAR_FLOOR."""
    cov = np.asarray(cov, dtype=float)
    w, V = np.linalg.eigh(0.5 * (cov + cov.T))
    w = np.clip(w, VAR_FLOOR, None)
    return V @ np.diag(1.0 / w) @ V.T


def build_nonlinear_graph(world: SimWorld, config: SimConfig | None = None) -> NonlinearGraph:
    """SLAM graph for a simulated world.

    Base factors: a weak anchor prior on X_0 (measurement = true initial
    pose, sigma = ANCHOR_SIGMA per component) and one odometry factor per
    step. Supplemental factors: n range-bearing measurements per landmark,
    grouped into one source per landmark. Range precisions use the measured
    range (the quantity the robot has), floored away from zero.
    """
    config = config or world.config
    n = config.n_poses
    variables = tuple(("x", i) for i in range(n + 1)) + tuple(
        ("l", s) for s in range(N_LANDMARKS)
    )
    dims = {v: (3 if v[0] == "x" else 2) for v in variables}

    factors = [
        PriorFactor(
            var=("x", 0),
            measurement=world.truth_poses[0].as_array(),
            gamma=np.eye(3) / ANCHOR_SIGMA**2,
        )
    ]
    odom_gamma = _floored_precision(config.sigma_odom_arr())
    for i in range(1, n + 1):
        factors.append(
            OdometryFactor(
                var_from=("x", i - 1),
                var_to=("x", i),
                measurement=world.odometry[i - 1].as_array(),
                gamma=odom_gamma,
            )
        )
    sources = {}
    for s in range(N_LANDMARKS):
        start = len(factors)
        for i in range(1, n + 1):
            r_meas, b_meas = world.rb_measurements[s, i - 1]
            r_eff = max(float(r_meas), 1e-3)
            gamma = np.diag(
                [
                    1.0 / max(config.range_var_coeff * r_eff**2, VAR_FLOOR),
                    1.0 / max(config.bearing_var, VAR_FLOOR),
                ]
            )
            factors.append(
                RangeBearingFactor(
                    pose_var=("x", i),
                    landmark_var=("l", s),
                    measurement=np.array([r_meas, b_meas]),
                    gamma=gamma,
                )
            )
        sources[s] = frozenset(range(start, start + n))

    return NonlinearGraph(
        variables=variables,
        dims=dims,
        factors=tuple(factors),
        base=frozenset(range(n + 1)),
        sources=sources,
    )


def dead_reckoning_init(world: SimWorld) -> dict:
    """Initial values: integrate odometry from the anchor measurement."""
    poses = [Pose2.from_array(world.truth_poses[0].as_array())]
    for z in world.odometry:
        poses.append(se2_compose(poses[-1], z))
    return {("x", i): p.as_array() for i, p in enumerate(poses)}


def triangulate_landmark(world: SimWorld, s: int, pose_values: Values) -> np.ndarray:
    """Seed a landmark from its first range-bearing measurement."""
    r, b = world.rb_measurements[s, 0]
    x, y, t = np.asarray(pose_values[("x", 1)], dtype=float)
    heading = t + b
    return np.array([x + r * np.cos(heading), y + r * np.sin(heading)])
