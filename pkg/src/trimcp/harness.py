"""Experiment runner: coverage, interval width, and trial-set width per method.

Runs the three trimmed pipelines and plain split conformal over Monte Carlo
draws or bikeshare station-day tasks, logs one JSON record per trial per
method, and aggregates the summary table. Per-trial seeds are seed XOR trial
index, so reruns with the same config reproduce the trial log bytewise.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from .conformal import split_conformal, split_half
from .data import SyntheticSpec, default_lambda, gen_synthetic, make_regression_task, read_matrix_csv
from .solvers import make_lasso_fitter
from .tcp import TcpConfig, minimal_alpha_trim, tcp_predict
from .trimming import MAX_TRIM, RIDGE_TRIM, SPLIT_TRIM

SPLIT_METHOD = "Split"
ALL_METHODS = (MAX_TRIM, RIDGE_TRIM, SPLIT_TRIM, SPLIT_METHOD)
MAX_FAILURE_RATE = 0.05


class ExcessiveFailures(RuntimeError):
    """More than the tolerated share of trials failed for some method."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: data source, methods, levels, and output paths.

    alpha_trim=None picks each method's minimal level (1/(n+1), or
    1/(n/2+1) for SplitTrim). lam=None uses sqrt(n log p) scaled for the
    noise model, with the half-sample value for split fits.
    """

    mode: str
    methods: tuple = ALL_METHODS
    trials: int = 1
    seed: int = 0
    synthetic: SyntheticSpec | None = None
    matrix_csv: str | None = None
    day_mode: str = "random_day"
    n_random_days: int = 10
    alpha_predict: float = 0.1
    alpha_trim: float | None = None
    lam: float | None = None
    rho: float = 1.0
    grid_step: float = 0.01
    output_path: str | None = None

    def __post_init__(self):
        if self.mode not in ("synthetic", "bikeshare"):
            raise ValueError(f"mode must be synthetic or bikeshare, got {self.mode!r}")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {ALL_METHODS}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.mode == "synthetic" and self.synthetic is None:
            raise ValueError("synthetic mode needs a SyntheticSpec")
        if self.mode == "bikeshare" and self.matrix_csv is None:
            raise ValueError("bikeshare mode needs matrix_csv")
        if self.day_mode not in ("random_day", "last_day"):
            raise ValueError(f"day_mode must be random_day or last_day, got {self.day_mode!r}")


@dataclass(frozen=True)
class MethodMetrics:
    method: str
    n_trials: int
    n_failed: int
    coverage_pct: float
    mean_pi_width: float
    mean_trial_width: float | None
    mean_n_slow_fits: float
    wall_time_s: float


@dataclass(frozen=True)
class ExperimentMetrics:
    per_method: dict
    n_trials: int
    records: list

    def table(self) -> str:
        header = f"{'method':<10} {'PI width':>10} {'Trial width':>12} {'Coverage (%)':>13} {'slow fits':>10} {'time (s)':>9}"
        lines = [header, "-" * len(header)]
        for m in self.per_method.values():
            trial_w = f"{m.mean_trial_width:.2f}" if m.mean_trial_width is not None else "---"
            lines.append(
                f"{m.method:<10} {m.mean_pi_width:>10.2f} {trial_w:>12} "
                f"{m.coverage_pct:>13.1f} {m.mean_n_slow_fits:>10.1f} {m.wall_time_s:>9.2f}"
            )
        return "\n".join(lines)


def _noise_tag(config):
    return config.synthetic.noise if config.mode == "synthetic" else "gaussian"


def _lambdas(config, n, p):
    if config.lam is not None:
        return config.lam, config.lam / np.sqrt(2.0)
    noise = _noise_tag(config)
    return default_lambda(n, p, noise), default_lambda(n // 2, p, noise)


def _run_one_method(method, config, data, x_new, y_new, trial_seed):
    """One (trial, method) record; deterministic fields only."""
    n, p = data.n, data.p
    lam_full, lam_half = _lambdas(config, n, p)
    if method == SPLIT_METHOD:
        fitter = make_lasso_fitter(lam_half)
        interval = split_conformal(
            fitter, data, x_new, config.alpha_predict, split_half(n, trial_seed)
        )
        return {
            "method": method,
            "covered": bool(interval.contains(y_new)),
            "pi_width": 2.0 * interval.radius,
            "trial_width": None,
            "n_slow_fits": 1,
            "n_fast_region_evals": 0,
        }
    alpha_trim = config.alpha_trim if config.alpha_trim is not None else minimal_alpha_trim(method, n)
    cfg = TcpConfig(
        alpha_trim=alpha_trim,
        alpha_predict=config.alpha_predict,
        trim_method=method,
        lam=lam_full,
        rho=config.rho,
        grid_step=config.grid_step,
        seed=trial_seed,
        lambda_trim=lam_half,
    )
    result = tcp_predict(cfg, data, x_new)
    return {
        "method": method,
        "covered": bool(result.contains(y_new)),
        "pi_width": result.pi_width,
        "trial_width": result.trial_width,
        "n_slow_fits": result.n_slow_fits,
        "n_fast_region_evals": result.n_fast_region_evals,
    }


def _aggregate(records, methods, wall_times) -> ExperimentMetrics:
    per_method = {}
    trials = {m: [r for r in records if r["method"] == m] for m in methods}
    for m in methods:
        recs = trials[m]
        ok = [r for r in recs if not r.get("failed")]
        n_failed = len(recs) - len(ok)
        if ok:
            coverage = 100.0 * sum(r["covered"] for r in ok) / len(ok)
            pi = float(np.mean([r["pi_width"] for r in ok]))
            tw = [r["trial_width"] for r in ok if r["trial_width"] is not None]
            trial_w = float(np.mean(tw)) if tw else None
            slow = float(np.mean([r["n_slow_fits"] for r in ok]))
        else:
            coverage, pi, trial_w, slow = float("nan"), float("nan"), None, float("nan")
        per_method[m] = MethodMetrics(
            method=m,
            n_trials=len(recs),
            n_failed=n_failed,
            coverage_pct=coverage,
            mean_pi_width=pi,
            mean_trial_width=trial_w,
            mean_n_slow_fits=slow,
            wall_time_s=wall_times.get(m, 0.0) / max(len(recs), 1),
        )
    return ExperimentMetrics(per_method=per_method, n_trials=max((len(v) for v in trials.values()), default=0), records=records)


def _run_tasks(config, tasks) -> ExperimentMetrics:
    """tasks yields (trial_index, data, x_new, y_new); shared by both modes."""
    records = []
    wall_times = {m: 0.0 for m in config.methods}
    for trial_index, data, x_new, y_new in tasks:
        trial_seed = config.seed ^ trial_index
        for method in config.methods:
            start = time.perf_counter()
            try:
                rec = _run_one_method(method, config, data, x_new, y_new, trial_seed)
            except Exception as exc:  # noqa: BLE001 - per-trial failures are data
                rec = {
                    "method": method,
                    "covered": False,
                    "pi_width": None,
                    "trial_width": None,
                    "n_slow_fits": None,
                    "n_fast_region_evals": None,
                    "failed": True,
                    "error": f"{type(exc).__name__}: {exc}",
                }
            wall_times[method] += time.perf_counter() - start
            rec["trial"] = trial_index
            rec["seed"] = trial_seed
            records.append(rec)
    metrics = _aggregate(records, config.methods, wall_times)
    _write_outputs(config, metrics)
    for m in config.methods:
        mm = metrics.per_method[m]
        if mm.n_trials and mm.n_failed / mm.n_trials > MAX_FAILURE_RATE:
            raise ExcessiveFailures(
                f"{m}: {mm.n_failed}/{mm.n_trials} trials failed (> {MAX_FAILURE_RATE:.0%})"
            )
    return metrics


def _synthetic_tasks(config):
    for t in range(config.trials):
        spec = replace(config.synthetic, seed=config.seed ^ t)
        data, x_new, y_new, _ = gen_synthetic(spec)
        yield t, data, x_new, y_new


def run_experiment(config: ExperimentConfig) -> ExperimentMetrics:
    """Monte Carlo synthetic benchmark over config.trials draws."""
    if config.mode != "synthetic":
        raise ValueError("run_experiment handles synthetic mode; use run_bikeshare")
    return _run_tasks(config, _synthetic_tasks(config))


def _bikeshare_tasks(config):
    matrix = read_matrix_csv(config.matrix_csv)
    n_days, n_stations = matrix.counts.shape
    if n_days < 3 or n_stations < 2:
        raise ValueError(f"matrix too small: {n_days} days x {n_stations} stations")
    if config.day_mode == "last_day":
        days = [n_days - 1]
    else:
        rng = np.random.default_rng(config.seed)
        k = min(config.n_random_days, n_days)
        days = sorted(int(d) for d in rng.choice(n_days, size=k, replace=False))
    trial_index = 0
    for day in days:
        for station in range(n_stations):
            data, x_new, y_new = make_regression_task(matrix, station, day)
            yield trial_index, data, x_new, y_new
            trial_index += 1


def run_bikeshare(config: ExperimentConfig) -> ExperimentMetrics:
    """Every station as response, over random held-out days or the last day."""
    if config.mode != "bikeshare":
        raise ValueError("run_bikeshare handles bikeshare mode; use run_experiment")
    return _run_tasks(config, _bikeshare_tasks(config))


def trials_log_path(output_path: str) -> str:
    stem = output_path[: -len(".json")] if output_path.endswith(".json") else output_path
    return stem + ".trials.jsonl"


def _write_outputs(config, metrics: ExperimentMetrics):
    if config.output_path is None:
        return
    log_path = trials_log_path(config.output_path)
    with open(log_path, "w", encoding="utf-8") as fh:
        for rec in metrics.records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    summary = {
        "config": _config_dict(config),
        "trials_log": log_path,
        "per_method": {m: asdict(mm) for m, mm in metrics.per_method.items()},
    }
    with open(config.output_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_dict(config):
    d = asdict(config)
    d["methods"] = list(config.methods)
    return d
