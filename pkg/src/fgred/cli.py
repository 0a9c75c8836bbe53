"""Command line interface.

Subcommands:
  simulate   draw the batch's worlds and write them as JSON
  analyze    run the full study: solve, measure redundancy, correlate, plot
  report     rebuild summary.json and figures from an existing records.csv
  oracle     run slow reference cross-checks of the closed-form metrics

Exit codes: 0 success, 1 invalid config or arguments, 2 I/O failure,
3 more than 20% of simulations failed.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .experiment import (
    ExperimentConfig,
    correlation_report,
    emit_outputs,
    read_records_csv,
    run_experiment,
    simulate_batch_world,
)
from .gauss import GaussianBelief
from .metrics import (
    QualityKind,
    quality_info,
    redundancy_mc_info,
    redundancy_quadrature_1d_info,
)

FAILED_FRACTION_LIMIT = 0.2

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_TOO_MANY_FAILURES = 3


def _load_config(path: str | None, seed: int | None) -> ExperimentConfig:
    if path is None:
        config = ExperimentConfig()
    else:
        try:
            raw = Path(path).read_text()
        except OSError as exc:
            raise _IOFail(f"cannot read config {path}: {exc}") from exc
        try:
            config = ExperimentConfig.from_dict(json.loads(raw))
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            raise ValueError(f"invalid config {path}: {exc}") from exc
    if seed is not None:
        config = ExperimentConfig.from_dict(
            {**config.to_dict(), "root_seed": int(seed)}
        )
    return config


class _IOFail(RuntimeError):
    pass


def _cmd_simulate(args) -> int:
    config = _load_config(args.config, args.seed)
    out = Path(args.out) / "worlds"
    try:
        out.mkdir(parents=True, exist_ok=True)
        for i in range(config.n_sims):
            world = simulate_batch_world(config, i)
            world.save_json(out / f"sim_{i:04d}.json")
        manifest = {
            "n_sims": config.n_sims,
            "root_seed": config.root_seed,
            "sim": config.sim.to_dict(),
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    except OSError as exc:
        raise _IOFail(str(exc)) from exc
    print(f"wrote {config.n_sims} worlds to {out}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    config = _load_config(args.config, args.seed)
    records = run_experiment(config, jobs=args.jobs)
    n_failed = sum(1 for r in records if r.failed)
    try:
        summary = correlation_report(records)
    except ValueError:
        summary = {
            "n_records": len(records),
            "n_failed": n_failed,
            "n_valid": sum(1 for r in records if r.is_usable()),
            "note": "too few usable records for correlation analysis",
        }
    try:
        paths = emit_outputs(records, summary, args.out, config=config)
    except OSError as exc:
        raise _IOFail(str(exc)) from exc
    print(f"{len(records)} simulations, {n_failed} failed")
    for name, p in paths.items():
        print(f"  {name}: {p}")
    if n_failed > FAILED_FRACTION_LIMIT * len(records):
        print(
            f"error: {n_failed}/{len(records)} simulations failed "
            f"(> {FAILED_FRACTION_LIMIT:.0%})",
            file=sys.stderr,
        )
        return EXIT_TOO_MANY_FAILURES
    return EXIT_OK


def _cmd_report(args) -> int:
    records_path = Path(args.out) / "records.csv"
    try:
        records = read_records_csv(records_path)
    except OSError as exc:
        raise _IOFail(f"cannot read {records_path}: {exc}") from exc
    summary = correlation_report(records)
    try:
        paths = emit_outputs(records, summary, args.out)
    except OSError as exc:
        raise _IOFail(str(exc)) from exc
    for name, p in paths.items():
        print(f"  {name}: {p}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    """Cross-check Monte Carlo redundancy against 1-D quadrature."""
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    n_cases = 12
    n_samples = 40_000
    failures = 0
    for case in range(n_cases):
        lam_b = np.array([[float(rng.uniform(0.2, 3.0))]])
        mu = np.array([float(rng.normal(0.0, 2.0))])
        prior = GaussianBelief(mean=mu, info=lam_b)
        k = int(rng.integers(1, 4))
        deltas = [
            np.array([[float(rng.uniform(0.05, 4.0))]]) for _ in range(k)
        ]
        for kind in (QualityKind.WB, QualityKind.WASS):
            mc = redundancy_mc_info(prior, deltas, kind, n_samples, rng_seed=case)
            ref = redundancy_quadrature_1d_info(prior, deltas, kind)
            err = abs(mc.value - ref)
            tol = 3.0 * mc.std_error + 1e-9
            ok = err <= tol
            failures += 0 if ok else 1
            status = "PASS" if ok else "FAIL"
            print(
                f"[{status}] case {case:2d} {kind.value:4s}: "
                f"mc={mc.value:.6f} quad={ref:.6f} |diff|={err:.2e} tol={tol:.2e}"
            )
            if kind is QualityKind.WB and k == 1:
                q = quality_info(lam_b, deltas[0], kind)
                ok_q = abs(ref - q) < 1e-6
                failures += 0 if ok_q else 1
                print(
                    f"[{'PASS' if ok_q else 'FAIL'}] case {case:2d} "
                    f"self-redundancy: quad={ref:.6f} quality={q:.6f}"
                )
    if failures:
        print(f"{failures} oracle checks failed", file=sys.stderr)
        return 1
    print("all oracle checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fgred",
        description="Redundancy metrics for linear Gaussian factor graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (
        ("simulate", _cmd_simulate, "generate simulation worlds as JSON"),
        ("analyze", _cmd_analyze, "run the redundancy vs error study"),
        ("report", _cmd_report, "rebuild summary and figures from records.csv"),
        ("oracle", _cmd_oracle, "run reference cross-checks of the metrics"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=str, default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="override root seed")
        p.add_argument("--out", type=str, default="out", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _IOFail as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
