"""Command-line interface: run experiments, single predictions, and ingestion.

Exit codes: 0 success, 2 config error, 3 data error, 4 excessive trial failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date

import numpy as np

from .conformal import split_conformal, split_half
from .data import (
    SyntheticSpec,
    TIMESTAMP_FORMATS,
    default_lambda,
    ingest_trips,
    write_matrix_csv,
)
from .harness import (
    ALL_METHODS,
    SPLIT_METHOD,
    ExcessiveFailures,
    ExperimentConfig,
    run_bikeshare,
    run_experiment,
)
from .solvers import Dataset, make_lasso_fitter
from .tcp import TcpConfig, minimal_alpha_trim, tcp_predict

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_FAILURES = 4


class ConfigError(ValueError):
    pass


def _load_config_file(path):
    if path.endswith(".toml"):
        try:
            import tomllib  # py311+
        except ImportError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _experiment_config(raw) -> ExperimentConfig:
    try:
        mode = raw["mode"]
        synthetic = None
        if "synthetic" in raw:
            synthetic = SyntheticSpec(**raw["synthetic"])
        bike = raw.get("bikeshare", {})
        return ExperimentConfig(
            mode=mode,
            methods=tuple(raw.get("methods", ALL_METHODS)),
            trials=raw.get("trials", 1),
            seed=raw.get("seed", 0),
            synthetic=synthetic,
            matrix_csv=bike.get("matrix_csv"),
            day_mode=bike.get("day_mode", "random_day"),
            n_random_days=bike.get("n_random_days", 10),
            alpha_predict=raw.get("alpha_predict", 0.1),
            alpha_trim=raw.get("alpha_trim"),
            lam=raw.get("lam"),
            rho=raw.get("rho", 1.0),
            grid_step=raw.get("grid_step", 0.01),
            output_path=raw.get("output"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_run(args):
    try:
        raw = _load_config_file(args.config)
        config = _experiment_config(raw)
    except (OSError, ValueError) as exc:
        # tomllib/json decode errors are ValueError subclasses
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if config.mode == "synthetic":
            metrics = run_experiment(config)
        else:
            metrics = run_bikeshare(config)
    except ExcessiveFailures as exc:
        print(f"excessive trial failures: {exc}", file=sys.stderr)
        return EXIT_FAILURES
    except (FileNotFoundError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(metrics.table())
    if config.output_path:
        print(f"summary written to {config.output_path}")
    return EXIT_OK


def _load_xy(path):
    arr = np.loadtxt(path, delimiter=",", ndmin=2)
    return Dataset(arr[:, :-1], arr[:, -1])


def _cmd_predict(args):
    try:
        data = _load_xy(args.data)
        x_new = np.loadtxt(args.xnew, delimiter=",", ndmin=1).reshape(-1)
    except (OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        lam = args.lam if args.lam is not None else default_lambda(data.n, max(data.p, 2))
        if args.method == SPLIT_METHOD:
            interval = split_conformal(
                make_lasso_fitter(lam / np.sqrt(2.0)),
                data,
                x_new,
                args.alpha,
                split_half(data.n, args.seed),
            )
            print(f"interval: [{interval.lo:.6g}, {interval.hi:.6g}]")
            return EXIT_OK
        alpha_trim = (
            args.alpha_trim if args.alpha_trim is not None else minimal_alpha_trim(args.method, data.n)
        )
        cfg = TcpConfig(
            alpha_trim=alpha_trim,
            alpha_predict=args.alpha,
            trim_method=args.method,
            lam=lam,
            rho=args.rho,
            grid_step=args.grid_step,
            seed=args.seed,
        )
        result = tcp_predict(cfg, data, x_new)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"trim interval: [{result.trim_set.lo:.6g}, {result.trim_set.hi:.6g}]")
    if result.prediction_set.is_empty:
        print("prediction set: empty")
    else:
        parts = ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in result.prediction_set.intervals)
        print(f"prediction set: {parts}")
    print(f"slow fits: {result.n_slow_fits}, fast evals: {result.n_fast_region_evals}")
    return EXIT_OK


def _cmd_ingest(args):
    try:
        window = (date.fromisoformat(args.from_date), date.fromisoformat(args.to_date))
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fmts = tuple(args.ts_format) if args.ts_format else TIMESTAMP_FORMATS
    try:
        matrix = ingest_trips(
            args.input,
            window,
            col_start_time=args.col_start_time,
            col_start_station=args.col_start_station,
            timestamp_formats=fmts,
        )
        write_matrix_csv(matrix, args.out)
    except (OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(f"{len(matrix.dates)} days x {len(matrix.station_ids)} stations -> {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="tcp", description="Trimmed conformal prediction")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a TOML/JSON config")
    p_run.add_argument("--config", required=True)
    p_run.set_defaults(func=_cmd_run)

    p_pred = sub.add_parser("predict", help="single prediction interval")
    p_pred.add_argument("--data", required=True, help="CSV, features then response column")
    p_pred.add_argument("--xnew", required=True, help="CSV row of test features")
    p_pred.add_argument("--method", default="RidgeTrim", choices=ALL_METHODS)
    p_pred.add_argument("--alpha", type=float, default=0.1)
    p_pred.add_argument("--alpha-trim", type=float, default=None, dest="alpha_trim")
    p_pred.add_argument("--lam", type=float, default=None)
    p_pred.add_argument("--rho", type=float, default=1.0)
    p_pred.add_argument("--grid-step", type=float, default=0.01, dest="grid_step")
    p_pred.add_argument("--seed", type=int, default=0)
    p_pred.set_defaults(func=_cmd_predict)

    p_ing = sub.add_parser("ingest", help="aggregate trip CSVs into a station-day matrix")
    p_ing.add_argument("--input", nargs="+", required=True)
    p_ing.add_argument("--from", dest="from_date", required=True, help="YYYY-MM-DD")
    p_ing.add_argument("--to", dest="to_date", required=True, help="YYYY-MM-DD")
    p_ing.add_argument("--out", required=True)
    p_ing.add_argument("--col-start-time", default="Start date", dest="col_start_time")
    p_ing.add_argument("--col-start-station", default="Start station", dest="col_start_station")
    p_ing.add_argument("--ts-format", action="append", dest="ts_format")
    p_ing.set_defaults(func=_cmd_ingest)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
