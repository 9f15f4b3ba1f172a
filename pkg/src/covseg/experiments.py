"""Replication harness: Monte Carlo tables, timing curves, and exponent
sensitivity sweeps."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .adaptive import AdaptiveParams, adaptive_weights, uniform_weights
from .admm import admm_solve
from .core import ObservationSeries, PenaltySpec
from .segmentation import MetricsRecord, evaluate_fit
from .selection import TuningGrid, fit_grid, grid_search
from .synth import Scenario, extra_samples, make_scenario

METRIC_FIELDS = ("nb", "d_h", "f1", "acc", "rmse")


@dataclass
class ReplicationResult:
    """Per-replication outcome: one metrics record per criterion."""

    scenario: Scenario
    index: int
    metrics: dict
    errors: dict = field(default_factory=dict)
    wall_time: float = 0.0


@dataclass
class ReplicationTable:
    """Aggregated means per criterion per metric, plus raw records."""

    scenario: Scenario
    criteria: tuple
    means: dict
    records: list
    n_failed: dict

    def mean(self, criterion: str, metric: str) -> float:
        return self.means[criterion][metric]


def _derive_seed(base_seed: int, rep: int) -> int:
    # stable per-replication stream, independent of replication order
    return int(np.random.SeedSequence((base_seed, rep)).generate_state(1)[0])


def run_replications(
    scenario: Scenario,
    grid: TuningGrid,
    criteria,
    n_reps: int = 20,
    seeds=None,
    adaptive: bool = True,
    params: AdaptiveParams | None = None,
    spec_template: PenaltySpec | None = None,
    held_out_batches: int = 1,
    tol: float = 1e-3,
    max_iter: int = 20000,
    gap_stride: int = 1,
    m_target: int | None = None,
) -> ReplicationTable:
    """Monte Carlo sweep: per replication, generate data, fit the full
    grid once, then score every criterion on the shared fits.

    ``seeds`` may list one seed per replication; by default they are
    derived from the scenario seed.  Per-criterion failures are logged
    and excluded from the means, with counts reported.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    criteria = tuple(criteria)
    if seeds is None:
        seeds = [_derive_seed(scenario.seed, r) for r in range(n_reps)]
    if len(seeds) != n_reps:
        raise ValueError("need one seed per replication")

    records = []
    for rep, seed in enumerate(seeds):
        rep_scenario = Scenario(
            setting=scenario.setting,
            T=scenario.T,
            p=scenario.p,
            m_star=scenario.m_star,
            kappa=scenario.kappa,
            seed=seed,
        )
        t0 = time.perf_counter()
        truth, data = make_scenario(rep_scenario)
        truth_dict = {"breakpoints": truth.breakpoints, "path": truth.path}
        held_out = (
            extra_samples(truth, held_out_batches, seed)
            if "lossval" in criteria
            else None
        )
        fits = fit_grid(
            data,
            grid,
            params=params,
            spec_template=spec_template,
            adaptive=adaptive,
            tol=tol,
            max_iter=max_iter,
            gap_stride=gap_stride,
            m_target=m_target,
        )
        metrics, errors = {}, {}
        for crit in criteria:
            try:
                sel = grid_search(
                    data,
                    grid,
                    crit,
                    truth=truth_dict,
                    held_out=held_out,
                    adaptive=adaptive,
                    fits=fits,
                )
                best = sel.best.result
                metrics[crit] = evaluate_fit(
                    best.theta, best.upsilon, best.d, truth.breakpoints, truth.path
                )
            except Exception as exc:
                errors[crit] = str(exc)
        records.append(
            ReplicationResult(
                scenario=rep_scenario,
                index=rep,
                metrics=metrics,
                errors=errors,
                wall_time=time.perf_counter() - t0,
            )
        )

    means, n_failed = {}, {}
    for crit in criteria:
        ok = [r.metrics[crit] for r in records if crit in r.metrics]
        n_failed[crit] = n_reps - len(ok)
        means[crit] = {
            f: (float(np.mean([getattr(m, f) for m in ok])) if ok else float("nan"))
            for f in METRIC_FIELDS
        }
    return ReplicationTable(
        scenario=scenario,
        criteria=criteria,
        means=means,
        records=records,
        n_failed=n_failed,
    )


@dataclass
class TimingRow:
    axis_value: float
    stage: str
    mean_time: float
    std_time: float


def timing_sweep(
    axis: str,
    values,
    base_scenario: Scenario,
    n_reps: int = 10,
    stages=("first_stage", "non_adaptive", "adaptive"),
    lam_scale: float = 0.05,
    lambda1_scale: float = 5e-5,
    lambda2_scale: float = 0.05,
    tol: float = 1e-3,
    max_iter: int = 20000,
    gap_stride: int = 1,
) -> list:
    """Wall-time means per axis value per solver stage.

    Axes: ``T`` and ``p`` vary the scenario; ``lambda`` varies the
    first-stage fusion level; ``lambda_pair`` scales the representative
    (lambda1, lambda2) pair jointly.  Fixed penalty levels scale with p:
    lambda = 0.05 p, lambda1 = 5e-5 p, lambda2 = 0.05 p.
    """
    if axis not in ("lambda", "lambda_pair", "T", "p"):
        raise ValueError("axis must be one of lambda, lambda_pair, T, p")
    rows = []
    for value in values:
        times = {stage: [] for stage in stages}
        for rep in range(n_reps):
            scen_kwargs = dict(
                setting=base_scenario.setting,
                T=base_scenario.T,
                p=base_scenario.p,
                m_star=base_scenario.m_star,
                kappa=base_scenario.kappa,
                seed=_derive_seed(base_scenario.seed, rep),
            )
            if axis == "T":
                scen_kwargs["T"] = int(value)
            elif axis == "p":
                scen_kwargs["p"] = int(value)
            scen = Scenario(**scen_kwargs)
            truth, data = make_scenario(scen)
            p = scen.p
            lam = float(value) if axis == "lambda" else lam_scale * p
            if axis == "lambda_pair":
                l1, l2 = float(value) * lambda1_scale * p, float(value) * lambda2_scale * p
            else:
                l1, l2 = lambda1_scale * p, lambda2_scale * p
            uw = uniform_weights(scen.T, p)

            stage1 = None
            if "first_stage" in stages or "adaptive" in stages:
                spec = PenaltySpec(lambda1=0.0, lambda2=lam)
                t0 = time.perf_counter()
                stage1 = admm_solve(
                    data, spec, uw, tol=tol, max_iter=max_iter, gap_stride=gap_stride
                )
                if "first_stage" in stages:
                    times["first_stage"].append(time.perf_counter() - t0)
            if "non_adaptive" in stages:
                spec = PenaltySpec(lambda1=l1, lambda2=l2)
                t0 = time.perf_counter()
                admm_solve(data, spec, uw, tol=tol, max_iter=max_iter, gap_stride=gap_stride)
                times["non_adaptive"].append(time.perf_counter() - t0)
            if "adaptive" in stages:
                weights = adaptive_weights(
                    stage1.theta, AdaptiveParams.for_length(scen.T)
                )
                spec = PenaltySpec(lambda1=l1, lambda2=l2)
                t0 = time.perf_counter()
                admm_solve(
                    data, spec, weights, tol=tol, max_iter=max_iter, gap_stride=gap_stride
                )
                times["adaptive"].append(time.perf_counter() - t0)
        for stage in stages:
            arr = np.asarray(times[stage])
            rows.append(
                TimingRow(
                    axis_value=float(value),
                    stage=stage,
                    mean_time=float(arr.mean()),
                    std_time=float(arr.std()),
                )
            )
    return rows


def sensitivity_sweep(
    mu1_values,
    mu2_values,
    scenario: Scenario,
    grid: TuningGrid,
    criteria,
    n_reps: int = 20,
    default_pair: tuple = (0.8, 1.5),
    **kwargs,
) -> list:
    """Cross product of weight exponents; one replication table per cell.

    Returns rows of dicts with keys mu1, mu2, is_default, table.
    """
    rows = []
    for mu1 in mu1_values:
        for mu2 in mu2_values:
            params = AdaptiveParams.for_length(scenario.T, mu1=mu1, mu2=mu2)
            table = run_replications(
                scenario, grid, criteria, n_reps=n_reps, params=params, **kwargs
            )
            rows.append(
                {
                    "mu1": float(mu1),
                    "mu2": float(mu2),
                    "is_default": (float(mu1), float(mu2)) == default_pair,
                    "table": table,
                }
            )
    return rows
