"""Command-line front end.

Subcommands: ``fit`` (solve one series and write the result bundle),
``simulate`` (write a synthetic series plus its ground truth),
``select`` (grid search under a tuning criterion), ``metrics``
(score an estimate bundle against a truth bundle), ``timing``
(wall-time sweeps).  Exit status 0 on success, 1 on computation errors,
2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .adaptive import AdaptiveParams, two_stage_fit, uniform_weights
from .admm import admm_solve
from .core import PenaltySpec, Segmentation
from .experiments import timing_sweep
from .io import (
    bundle_from_fit,
    ingest_csv,
    read_bundle,
    rolling_proxy,
    segmentation_from_bundle,
    write_bundle,
    write_diagnostics_csv,
    write_series_csv,
)
from .segmentation import (
    extract_changepoints,
    f1_and_accuracy,
    hausdorff,
    rmse,
    support_mask,
)
from .selection import CRITERIA, TuningGrid, grid_search, scores_to_csv
from .synth import Scenario, extra_samples, make_scenario

_SETTING_NAMES = {"1": "I", "2": "II", "3": "III"}


def _report_dict(report) -> dict:
    return {
        "iterations": report.iterations,
        "terminated_by": report.terminated_by,
        "final_gap": report.final_gap,
        "final_dfeas": report.final_dfeas,
        "primal_objective": report.primal_objective,
        "dual_objective": report.dual_objective,
        "wall_time": report.wall_time,
    }


def _sidecar(path: str, suffix: str) -> str:
    base = path[:-5] if path.endswith(".json") else path
    return base + suffix


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="first-stage fusion level; enables the adaptive two-stage fit")
    p.add_argument("--lambda1", type=float, default=None)
    p.add_argument("--lambda2", type=float, default=None)
    p.add_argument("--mu1", type=float, default=0.8)
    p.add_argument("--mu2", type=float, default=1.5)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=20000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covseg",
        description="Joint change-point detection and sparse covariance estimation.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    fit = sub.add_parser("fit", help="fit one series and write a result bundle")
    fit.add_argument("--input", required=True)
    fit.add_argument("--output", required=True)
    fit.add_argument("--mode", choices=("prices", "returns"), default="returns")
    fit.add_argument("--has-header", action="store_true")
    _add_solver_flags(fit)
    fit.add_argument("--threads", type=int, default=1)

    sim = sub.add_parser("simulate", help="write a synthetic series and its truth")
    sim.add_argument("--output", required=True)
    sim.add_argument("--setting", choices=("1", "2", "3"), default="1")
    sim.add_argument("--T", type=int, required=True)
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--m", type=int, default=0)
    sim.add_argument("--seed", type=int, default=0)

    sel = sub.add_parser("select", help="grid search under a tuning criterion")
    sel.add_argument("--input", required=True)
    sel.add_argument("--output", required=True)
    sel.add_argument("--mode", choices=("prices", "returns"), default="returns")
    sel.add_argument("--has-header", action="store_true")
    sel.add_argument("--criterion", choices=CRITERIA, default="hbic")
    sel.add_argument("--grid-file", default=None)
    sel.add_argument("--truth", default=None,
                     help="truth bundle (required by the oracle criterion)")
    sel.add_argument("--non-adaptive", action="store_true")
    sel.add_argument("--held-out", type=int, default=1,
                     help="held-out batches for lossval (synthetic truth only)")
    _add_solver_flags(sel)
    sel.add_argument("--seed", type=int, default=0)
    sel.add_argument("--threads", type=int, default=1)

    met = sub.add_parser("metrics", help="score an estimate against a truth bundle")
    met.add_argument("--input", required=True, help="estimate bundle")
    met.add_argument("--truth", required=True, help="truth bundle")
    met.add_argument("--output", required=True)

    tim = sub.add_parser("timing", help="wall-time sweep along one axis")
    tim.add_argument("--output", required=True)
    tim.add_argument("--axis", choices=("lambda", "lambda_pair", "T", "p"), default="T")
    tim.add_argument("--values", required=True, help="comma-separated axis values")
    tim.add_argument("--setting", choices=("1", "2", "3"), default="1")
    tim.add_argument("--T", type=int, default=200)
    tim.add_argument("--p", type=int, default=10)
    tim.add_argument("--m", type=int, default=1)
    tim.add_argument("--reps", type=int, default=10)
    tim.add_argument("--seed", type=int, default=0)
    tim.add_argument("--tol", type=float, default=1e-3)
    tim.add_argument("--threads", type=int, default=1)

    return parser


def _fit_defaults(args, p: int) -> tuple:
    l1 = args.lambda1 if args.lambda1 is not None else 5e-5 * p
    l2 = args.lambda2 if args.lambda2 is not None else 0.05 * p
    return l1, l2


def cmd_fit(args) -> int:
    series = ingest_csv(args.input, has_header=args.has_header,
                        returns_mode=(args.mode == "returns"))
    l1, l2 = _fit_defaults(args, series.p)
    spec = PenaltySpec(lambda1=l1, lambda2=l2, epsilon=args.epsilon, beta=args.beta)
    params = AdaptiveParams.for_length(series.T, mu1=args.mu1, mu2=args.mu2)
    reports = []
    if args.lam is not None:
        stage1, result = two_stage_fit(
            series, args.lam, l1, l2, params=params, spec=spec,
            tol=args.tol, max_iter=args.max_iter,
        )
        reports.append(_report_dict(stage1.report))
    else:
        result = admm_solve(series, spec, uniform_weights(series.T, series.p),
                            tol=args.tol, max_iter=args.max_iter)
    reports.append(_report_dict(result.report))

    seg = extract_changepoints(result.theta, d_blocks=result.d)
    bundle = bundle_from_fit(
        seg, result.v, result.upsilon, reports,
        parameters={
            "lambda": args.lam, "lambda1": l1, "lambda2": l2,
            "mu1": args.mu1, "mu2": args.mu2, "beta": args.beta,
            "epsilon": args.epsilon, "tol": args.tol, "max_iter": args.max_iter,
            "mode": args.mode,
        },
    )
    write_bundle(bundle, args.output)
    write_diagnostics_csv(result.theta, rolling_proxy(series),
                          _sidecar(args.output, ".diagnostics.csv"))
    return 0


def _truth_bundle(truth, scenario: Scenario) -> dict:
    seg = truth.segmentation
    blocks, supports = [], []
    for (start, end), cov, supp in zip(seg.block_bounds(), truth.sigmas, truth.supports):
        blocks.append(
            {"start": start, "end": end, "covariance": [float(x) for x in cov.ravel()]}
        )
        supports.append(sorted([u, v] for u, v in supp))
    return {
        "schema_version": {"major": 1, "minor": 0},
        "p": scenario.p,
        "T": scenario.T,
        "changepoints": list(truth.breakpoints),
        "blocks": blocks,
        "support_per_block": supports,
        "solve_reports": [],
        "parameters": {
            "setting": scenario.setting, "T": scenario.T, "p": scenario.p,
            "m_star": scenario.m_star, "kappa": scenario.kappa, "seed": scenario.seed,
        },
    }


def cmd_simulate(args) -> int:
    scenario = Scenario(setting=_SETTING_NAMES[args.setting], T=args.T, p=args.p,
                        m_star=args.m, seed=args.seed)
    truth, series = make_scenario(scenario)
    write_series_csv(series, args.output)
    write_bundle(_truth_bundle(truth, scenario), args.output + ".truth.json")
    return 0


def _load_grid(path, p: int) -> TuningGrid:
    if path is None:
        return TuningGrid.desk_default(p)
    with open(path) as fh:
        raw = json.load(fh)
    lambdas = raw.get("lambdas") or [0.05 * p]
    if "pairs" in raw:
        pairs = [tuple(pr) for pr in raw["pairs"]]
    else:
        pairs = [(a, b) for a in raw["lambda1"] for b in raw["lambda2"]]
    return TuningGrid(lambdas=tuple(lambdas), pairs=tuple(pairs))


def cmd_select(args) -> int:
    series = ingest_csv(args.input, has_header=args.has_header,
                        returns_mode=(args.mode == "returns"))
    grid = _load_grid(args.grid_file, series.p)
    params = AdaptiveParams.for_length(series.T, mu1=args.mu1, mu2=args.mu2)
    spec = PenaltySpec(lambda1=1.0, lambda2=1.0, epsilon=args.epsilon, beta=args.beta)

    truth_dict, held_out = None, None
    if args.criterion == "optimal":
        if args.truth is None:
            raise ValueError("the oracle criterion requires --truth")
        tb = read_bundle(args.truth)
        tseg = segmentation_from_bundle(tb)
        truth_dict = {"breakpoints": tseg.breakpoints, "path": tseg.expand_path()}
    if args.criterion == "lossval":
        if args.truth is None:
            raise ValueError("lossval requires --truth to draw held-out batches")
        tb = read_bundle(args.truth)
        tseg = segmentation_from_bundle(tb)
        from .synth import GroundTruth

        truth = GroundTruth(
            breakpoints=tseg.breakpoints, sigmas=tseg.block_covs,
            path=tseg.expand_path(), supports=(),
        )
        held_out = extra_samples(truth, args.held_out, args.seed)

    result = grid_search(
        series, grid, args.criterion, params=params, spec_template=spec,
        truth=truth_dict, held_out=held_out, adaptive=not args.non_adaptive,
        tol=args.tol, max_iter=args.max_iter,
    )
    best = result.best.result
    seg = extract_changepoints(best.theta, d_blocks=best.d)
    bundle = bundle_from_fit(
        seg, best.v, best.upsilon, [_report_dict(best.report)],
        parameters={
            "criterion": args.criterion, "lambda": result.best.lam,
            "lambda1": result.best.lambda1, "lambda2": result.best.lambda2,
            "mu1": args.mu1, "mu2": args.mu2, "beta": args.beta,
            "epsilon": args.epsilon, "tol": args.tol, "max_iter": args.max_iter,
        },
    )
    write_bundle(bundle, args.output)
    scores_to_csv(result.scores, _sidecar(args.output, ".scores.csv"))
    return 0


def cmd_metrics(args) -> int:
    est = read_bundle(args.input)
    tru = read_bundle(args.truth)
    est_seg = segmentation_from_bundle(est)
    tru_seg = segmentation_from_bundle(tru)
    if est_seg.T != tru_seg.T:
        raise ValueError("estimate and truth bundles cover different horizons")
    est_path, tru_path = est_seg.expand_path(), tru_seg.expand_path()
    f1, acc = f1_and_accuracy(support_mask(est_path), support_mask(tru_path))
    record = {
        "nb": est_seg.n_breaks,
        "d_h": hausdorff(est_seg.breakpoints, tru_seg.breakpoints, est_seg.T),
        "f1": f1,
        "acc": acc,
        "rmse": rmse(est_path, tru_path),
    }
    with open(args.output, "w") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return 0


def cmd_timing(args) -> int:
    values = [float(v) for v in args.values.split(",")]
    scenario = Scenario(setting=_SETTING_NAMES[args.setting], T=args.T, p=args.p,
                        m_star=args.m, seed=args.seed)
    rows = timing_sweep(args.axis, values, scenario, n_reps=args.reps, tol=args.tol)
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["axis", "value", "stage", "mean_time", "std_time"])
        for row in rows:
            writer.writerow([args.axis, repr(row.axis_value), row.stage,
                             repr(row.mean_time), repr(row.std_time)])
    return 0


_COMMANDS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "select": cmd_select,
    "metrics": cmd_metrics,
    "timing": cmd_timing,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.subcommand](args)
    except (ValueError, OSError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"covseg: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
