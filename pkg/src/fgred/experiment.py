"""Batch simulation study: redundancy versus worst-case trajectory error.

Each simulation draws a world, solves the base (anchor + odometry) problem
and one SLAM problem per landmark source, linearizes around those solutions,
Schur-marginalizes the landmarks, and evaluates both redundancy metrics on
the pose-marginal information forms. Worst-case trajectory error and
trajectory-to-landmark distances are recorded alongside.

Per-simulation seeds are derived from the root seed and the simulation id
only, so results are independent of worker count and scheduling.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from . import __version__
from .alignment import wc_ate
from .gauss import GaussianBelief
from .metrics import QualityKind, quality_info, redundancy_mc_info
from .nonlinear import (
    build_nonlinear_graph,
    dead_reckoning_init,
    pose_information_system,
    solve_gauss_newton,
    triangulate_landmark,
)
from .sim2d import N_LANDMARKS, SimConfig, SimWorld, simulate_world
from .svgplot import scatter_svg

RECORD_COLUMNS = [
    "sim_id",
    "r_wb",
    "r_wb_se",
    "r_wass",
    "r_wass_se",
    "q_wb_0",
    "q_wb_1",
    "q_wass_0",
    "q_wass_1",
    "wc_ate",
    "mean_dist_0",
    "mean_dist_1",
    "converged_0",
    "converged_1",
]

# Fixed internal seed for permutation tests: p-values are part of the
# deterministic output and must not depend on worker count or call order.
_PERMUTATION_SEED = 715517
MIN_VALID_FOR_CORRELATION = 30


@dataclass(frozen=True)
class ExperimentConfig:
    """Batch parameters wrapping a base simulation config.

    The sim config's own seed field is ignored; each simulation gets a seed
    derived from (root_seed, sim_id).
    """

    sim: SimConfig = field(default_factory=SimConfig)
    n_sims: int = 500
    mc_samples: int = 10_000
    root_seed: int = 0

    def __post_init__(self):
        if self.n_sims < 1:
            raise ValueError("n_sims must be >= 1")
        if self.mc_samples < 100:
            raise ValueError("mc_samples must be >= 100")

    def to_dict(self) -> dict:
        return {
            "sim": self.sim.to_dict(),
            "n_sims": self.n_sims,
            "mc_samples": self.mc_samples,
            "root_seed": self.root_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - {"sim", "n_sims", "mc_samples", "root_seed"}
        if unknown:
            raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
        kwargs = {k: data[k] for k in ("n_sims", "mc_samples", "root_seed") if k in data}
        if "sim" in data:
            kwargs["sim"] = SimConfig.from_dict(data["sim"])
        return cls(**kwargs)


@dataclass
class SimRecord:
    """Per-simulation outcome row. Failed rows carry NaNs and a reason."""

    sim_id: int
    r_wb: float = math.nan
    r_wb_se: float = math.nan
    r_wass: float = math.nan
    r_wass_se: float = math.nan
    q_wb: tuple = (math.nan,) * N_LANDMARKS
    q_wass: tuple = (math.nan,) * N_LANDMARKS
    wc_ate: float = math.nan
    mean_dist: tuple = (math.nan,) * N_LANDMARKS
    converged: tuple = (False,) * N_LANDMARKS
    failed: bool = False
    fail_reason: str = ""

    def is_usable(self) -> bool:
        vals = [self.r_wb, self.r_wass, self.wc_ate, *self.mean_dist]
        return not self.failed and all(math.isfinite(v) for v in vals)

    def csv_row(self) -> list[str]:
        cells = [
            str(self.sim_id),
            repr(float(self.r_wb)),
            repr(float(self.r_wb_se)),
            repr(float(self.r_wass)),
            repr(float(self.r_wass_se)),
            repr(float(self.q_wb[0])),
            repr(float(self.q_wb[1])),
            repr(float(self.q_wass[0])),
            repr(float(self.q_wass[1])),
            repr(float(self.wc_ate)),
            repr(float(self.mean_dist[0])),
            repr(float(self.mean_dist[1])),
            str(int(self.converged[0])),
            str(int(self.converged[1])),
        ]
        return cells


def world_seed(root_seed: int, sim_id: int) -> int:
    """Deterministic per-simulation world seed."""
    ss = np.random.SeedSequence([int(root_seed), int(sim_id), 0])
    return int(ss.generate_state(1, np.uint64)[0])


def mc_seed(root_seed: int, sim_id: int) -> int:
    """Deterministic per-simulation Monte Carlo seed."""
    ss = np.random.SeedSequence([int(root_seed), int(sim_id), 1])
    return int(ss.generate_state(1, np.uint64)[0])


def simulate_batch_world(config: ExperimentConfig, sim_id: int) -> SimWorld:
    """The world that run_single(config, sim_id) would analyze."""
    return simulate_world(replace(config.sim, seed=world_seed(config.root_seed, sim_id)))


@dataclass(frozen=True)
class SlamSolution:
    """Solved base and per-source problems for one world."""

    graph: object
    base_result: object
    source_results: dict
    prior: GaussianBelief
    deltas: dict


def solve_world(world: SimWorld) -> SlamSolution:
    """Solve base + per-source SLAM and build pose-marginal info forms."""
    graph = build_nonlinear_graph(world)
    init = dead_reckoning_init(world)
    base_res = solve_gauss_newton(graph, sorted(graph.base), init)

    source_results = {}
    metric_values = {}
    for s in range(N_LANDMARKS):
        subset = sorted(graph.base | graph.sources[s])
        init_s = {k: np.array(v) for k, v in base_res.values.items()}
        init_s[("l", s)] = triangulate_landmark(world, s, base_res.values)
        source_results[s] = solve_gauss_newton(graph, subset, init_s)
        # Shared pose linearization point across sources: keeps the gauge
        # null spaces of all Delta_s aligned with the base prior's, so the
        # information comparison reflects measurement content, not
        # linearization-point mismatch. Only the landmark estimate is taken
        # from the per-source solve.
        vals = {k: np.array(v) for k, v in base_res.values.items()}
        vals[("l", s)] = np.array(source_results[s].values[("l", s)])
        metric_values[s] = vals

    prior, deltas = pose_information_system(graph, base_res.values, metric_values)
    return SlamSolution(
        graph=graph,
        base_result=base_res,
        source_results=source_results,
        prior=prior,
        deltas=deltas,
    )


def run_single(config: ExperimentConfig, sim_id: int) -> SimRecord:
    """One full simulation -> record. Exceptions become a failed record."""
    try:
        world = simulate_batch_world(config, sim_id)
        sol = solve_world(world)
        delta_list = [sol.deltas[s] for s in range(N_LANDMARKS)]
        seed = mc_seed(config.root_seed, sim_id)

        est_wb = redundancy_mc_info(
            sol.prior, delta_list, QualityKind.WB, config.mc_samples, seed
        )
        est_wass = redundancy_mc_info(
            sol.prior, delta_list, QualityKind.WASS, config.mc_samples, seed
        )
        q_wb = tuple(
            quality_info(sol.prior.info, d, QualityKind.WB) for d in delta_list
        )
        q_wass = tuple(
            quality_info(sol.prior.info, d, QualityKind.WASS) for d in delta_list
        )

        truth_xy = np.array([[p.x, p.y] for p in world.truth_poses])
        n_all = len(world.truth_poses)
        trajectories = [
            np.array(
                [sol.source_results[s].values[("x", i)][:2] for i in range(n_all)]
            )
            for s in range(N_LANDMARKS)
        ]
        wc = wc_ate(truth_xy, trajectories)
        dists = world.landmark_distances().mean(axis=1)
        base_ok = sol.base_result.converged
        return SimRecord(
            sim_id=sim_id,
            r_wb=est_wb.value,
            r_wb_se=est_wb.std_error,
            r_wass=est_wass.value,
            r_wass_se=est_wass.std_error,
            q_wb=q_wb,
            q_wass=q_wass,
            wc_ate=wc,
            mean_dist=tuple(float(d) for d in dists),
            converged=tuple(
                bool(base_ok and sol.source_results[s].converged)
                for s in range(N_LANDMARKS)
            ),
        )
    except Exception as exc:  # per-sim failures must never abort the batch
        return SimRecord(
            sim_id=sim_id,
            failed=True,
            fail_reason=f"{type(exc).__name__}: {exc}",
        )


def _run_single_packed(args) -> SimRecord:
    config, sim_id = args
    return run_single(config, sim_id)


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> list[SimRecord]:
    """Run the whole batch; output is identical for any worker count."""
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    if jobs == 1:
        records = [run_single(config, i) for i in range(config.n_sims)]
    else:
        tasks = [(config, i) for i in range(config.n_sims)]
        chunk = max(1, config.n_sims // (4 * jobs))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_single_packed, tasks, chunksize=chunk))
    records.sort(key=lambda r: r.sim_id)
    return records


def _spearman_with_permutation(
    x: np.ndarray, y: np.ndarray, n_shuffles: int = 10_000
) -> dict:
    """Spearman rho with a one-sided (negative) permutation p-value.

    Constant inputs make the correlation undefined: reported as NaN with the
    degenerate flag set, never silently dropped.
    """
    if np.unique(x).size < 2 or np.unique(y).size < 2:
        return {"rho": math.nan, "p_value": math.nan, "degenerate": True}
    rx = stats.rankdata(x)
    ry = stats.rankdata(y)
    rx = (rx - rx.mean()) / rx.std()
    ry = (ry - ry.mean()) / ry.std()
    n = rx.shape[0]
    rho = float(rx @ ry / n)
    rng = np.random.default_rng(_PERMUTATION_SEED)
    hits = 0
    for _ in range(n_shuffles):
        rho_perm = rx @ rng.permutation(ry) / n
        if rho_perm <= rho:
            hits += 1
    p = (1 + hits) / (1 + n_shuffles)
    return {"rho": rho, "p_value": float(p), "degenerate": False}


def _quartile_medians(r_values: np.ndarray, scores: np.ndarray) -> list[float]:
    """Median score within each quartile of r_values, lowest quartile first."""
    edges = np.quantile(r_values, [0.25, 0.5, 0.75])
    groups = np.digitize(r_values, edges, right=True)
    out = []
    for g in range(4):
        sel = scores[groups == g]
        out.append(float(np.median(sel)) if sel.size else math.nan)
    return out


def correlation_report(
    records: Sequence[SimRecord], n_shuffles: int = 10_000
) -> dict:
    """Summary statistics for a batch of records.

    Needs at least MIN_VALID_FOR_CORRELATION usable records. WC-ATE is
    z-scored within the batch before quartile medians are taken.
    """
    valid = [r for r in records if r.is_usable()]
    n_valid = len(valid)
    if n_valid < MIN_VALID_FOR_CORRELATION:
        raise ValueError(
            f"correlation analysis needs >= {MIN_VALID_FOR_CORRELATION} usable "
            f"records, got {n_valid}"
        )
    r_wb = np.array([r.r_wb for r in valid])
    r_wass = np.array([r.r_wass for r in valid])
    wc = np.array([r.wc_ate for r in valid])
    max_dist = np.array([max(r.mean_dist) for r in valid])

    wc_std = wc.std()
    wc_z = (wc - wc.mean()) / wc_std if wc_std > 0 else np.zeros_like(wc)

    return {
        "n_records": len(records),
        "n_failed": sum(1 for r in records if r.failed),
        "n_valid": n_valid,
        "spearman_rwass_wcate": _spearman_with_permutation(r_wass, wc, n_shuffles),
        "spearman_rwb_wcate": _spearman_with_permutation(r_wb, wc, n_shuffles),
        "spearman_r_dist": {
            "wass": _spearman_with_permutation(r_wass, max_dist, n_shuffles),
            "wb": _spearman_with_permutation(r_wb, max_dist, n_shuffles),
        },
        "quartile_medians": {
            "wass": _quartile_medians(r_wass, wc_z),
            "wb": _quartile_medians(r_wb, wc_z),
        },
    }


def _jsonify(obj):
    """Replace NaN/inf with None recursively so the JSON stays strict."""
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (int, np.integer, str, bool)) or obj is None:
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_records_csv(records: Sequence[SimRecord], path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for rec in sorted(records, key=lambda r: r.sim_id):
            writer.writerow(rec.csv_row())


def read_records_csv(path) -> list[SimRecord]:
    """Parse records.csv back; rows with non-finite key metrics are failed."""
    records = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != RECORD_COLUMNS:
            raise ValueError(f"unexpected records.csv header: {header}")
        for row in reader:
            if len(row) != len(RECORD_COLUMNS):
                raise ValueError(f"records.csv row has {len(row)} cells")
            rec = SimRecord(
                sim_id=int(row[0]),
                r_wb=float(row[1]),
                r_wb_se=float(row[2]),
                r_wass=float(row[3]),
                r_wass_se=float(row[4]),
                q_wb=(float(row[5]), float(row[6])),
                q_wass=(float(row[7]), float(row[8])),
                wc_ate=float(row[9]),
                mean_dist=(float(row[10]), float(row[11])),
                converged=(bool(int(row[12])), bool(int(row[13]))),
            )
            rec.failed = not rec.is_usable()
            records.append(rec)
    return records


def emit_outputs(
    records: Sequence[SimRecord],
    summary: dict,
    out_dir,
    config: ExperimentConfig | None = None,
) -> dict:
    """Write records.csv, summary.json and the two scatter figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "records": out / "records.csv",
        "summary": out / "summary.json",
        "wcate_plot": out / "redundancy-vs-wcate.svg",
        "distance_plot": out / "redundancy-vs-distance.svg",
    }
    write_records_csv(records, paths["records"])
    paths["summary"].write_text(
        json.dumps(_jsonify(summary), indent=2, sort_keys=True) + "\n"
    )

    valid = [r for r in records if r.is_usable()]
    r_wb = [r.r_wb for r in valid]
    r_wass = [r.r_wass for r in valid]
    wc = [r.wc_ate for r in valid]
    dist = [max(r.mean_dist) for r in valid]
    scatter_svg(
        paths["wcate_plot"],
        [
            ("information", r_wb, wc, "#1f77b4"),
            ("wasserstein", r_wass, wc, "#d62728"),
        ],
        xlabel="redundancy",
        ylabel="worst-case ATE [m^2]",
        title="Redundancy vs worst-case trajectory error",
    )
    scatter_svg(
        paths["distance_plot"],
        [
            ("information", r_wb, dist, "#1f77b4"),
            ("wasserstein", r_wass, dist, "#d62728"),
        ],
        xlabel="redundancy",
        ylabel="max mean landmark distance [m]",
        title="Redundancy vs landmark distance",
    )
    if config is not None:
        provenance = {"config": config.to_dict(), "version": __version__}
        (out / "experiment-config.json").write_text(
            json.dumps(provenance, indent=2, sort_keys=True) + "\n"
        )
        paths["config"] = out / "experiment-config.json"
    return paths
