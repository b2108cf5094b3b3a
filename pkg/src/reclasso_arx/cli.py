"""Command-line interface: ``reclasso-arx {simulate,tune,evaluate,bench}``."""
from __future__ import annotations

import argparse
import json
import sys

from . import tuning as tu
from .arx import build_lag_design
from .data import IngestSpec, load_csv, normalize_series, write_csv
from .datagen import SimConfig, simulate_arx
from .errors import DataError, DegenerateDesign, NumericalError, SeriesTooShort
from .harness import (
    ALL_METHODS,
    ExperimentConfig,
    _checked_split,
    bench_timing,
    format_timing,
    run_experiment,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; 2 is reserved for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_data_args(p):
    p.add_argument("--data", metavar="CSV", help="read series from a CSV instead of simulating")
    p.add_argument("--target", help="target column of the CSV")
    p.add_argument("--aggregate", type=int, default=1,
                   help="average blocks of this many rows first (3: monthly to quarterly)")
    p.add_argument("--k", type=int, default=10, help="simulated exogenous series")
    p.add_argument("--T", type=int, default=250, help="simulated series length")
    p.add_argument("--density", type=float, default=0.1, help="simulated coefficient density")
    p.add_argument("--seed", type=int, default=0)


def _add_model_args(p):
    p.add_argument("--p", type=int, default=12, help="target lag order")
    p.add_argument("--s", type=int, default=12, help="exogenous lag order")
    p.add_argument("--grid-size", type=int, default=tu.DEFAULT_GRID_SIZE)
    p.add_argument("--eta", type=float, default=tu.DEFAULT_ETA, help="gradient learning rate")
    p.add_argument("--train-frac", type=float, default=1.0 / 3.0,
                   help="fraction of the sample used for penalty selection")
    p.add_argument("--init-frac", type=float, default=1.0 / 3.0,
                   help="fraction of the sample used to initialize the model")
    p.add_argument("--t1", type=int, help="explicit end of the initialization period")
    p.add_argument("--t2", type=int, help="explicit end of the training period")
    p.add_argument("--no-normalize", action="store_true")


def build_parser():
    parser = _Parser(prog="reclasso-arx",
                     description="Lasso AR-X forecasting with online penalty updates.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="write a simulated series set as CSV")
    sim.add_argument("out", help="output CSV path")
    sim.add_argument("--k", type=int, default=10)
    sim.add_argument("--p", type=int, default=12)
    sim.add_argument("--s", type=int, default=12)
    sim.add_argument("--T", type=int, default=250)
    sim.add_argument("--density", type=float, default=0.1)
    sim.add_argument("--seed", type=int, default=0)

    tune = sub.add_parser("tune", help="rolling validation over the penalty grid")
    _add_data_args(tune)
    _add_model_args(tune)
    tune.add_argument("--json", metavar="PATH")

    ev = sub.add_parser("evaluate", help="compare forecasting methods")
    _add_data_args(ev)
    _add_model_args(ev)
    ev.add_argument("--rule", choices=[tu.GRADIENT, tu.NEWTON, tu.STATIC, tu.ROLLING_WINDOW],
                    help="run only this lasso method (plus the static baseline)")
    ev.add_argument("--methods", help=f"comma-separated subset of {','.join(ALL_METHODS)}")
    ev.add_argument("--reps", type=int, default=1)
    ev.add_argument("--json", metavar="PATH", help="write the full report as JSON")
    ev.add_argument("--csv", metavar="PATH", help="write the summary table as CSV")
    ev.add_argument("--timing", action="store_true", help="include wall-clock timing in JSON")

    bench = sub.add_parser("bench", help="time rolling validation against online updating")
    _add_data_args(bench)
    _add_model_args(bench)
    bench.add_argument("--rule", choices=[tu.GRADIENT, tu.NEWTON],
                       help="time only this online rule")
    bench.add_argument("--iterations", type=int, default=100)
    bench.add_argument("--warmup", type=int, default=3)
    bench.add_argument("--json", metavar="PATH")
    return parser


def _config(args, methods=ALL_METHODS, reps=1) -> ExperimentConfig:
    if args.data and not args.target:
        raise UsageError("--data needs --target")
    sim = SimConfig(k=args.k, p=args.p, s=args.s, T=args.T, density=args.density)
    return ExperimentConfig(
        source="csv" if args.data else "simulate", csv_path=args.data, target=args.target,
        aggregate=args.aggregate, p=args.p, s=args.s, grid_size=args.grid_size, eta=args.eta,
        methods=tuple(methods), reps=reps, seed=args.seed, init_frac=args.init_frac,
        train_frac=args.train_frac, t1=args.t1, t2=args.t2, normalize=not args.no_normalize,
        sim=sim)


def _methods(args):
    if args.methods and args.rule:
        raise UsageError("--methods and --rule are mutually exclusive")
    if args.rule:
        return (tu.STATIC,) if args.rule == tu.STATIC else (tu.STATIC, args.rule)
    if args.methods:
        chosen = tuple(m.strip() for m in args.methods.split(",") if m.strip())
        bad = [m for m in chosen if m not in ALL_METHODS]
        if bad:
            raise UsageError(f"unknown methods: {', '.join(bad)}")
        return chosen
    return ALL_METHODS


def cmd_simulate(args):
    cfg = SimConfig(k=args.k, p=args.p, s=args.s, T=args.T, density=args.density, seed=args.seed)
    series, truth = simulate_arx(cfg)
    write_csv(series, args.out)
    print(f"wrote {series.T} observations of {series.k + 1} series to {args.out} "
          f"(spectral radius {truth.spectral_radius:.4f}, {truth.support.size} nonzero)")


def cmd_tune(args):
    cfg = _config(args)
    if cfg.source == "csv":
        series = load_csv(cfg.csv_path, IngestSpec(target=cfg.target, aggregate=cfg.aggregate))
    else:
        series, _ = simulate_arx(SimConfig(**{**cfg.sim.__dict__, "seed": cfg.seed}))
    split = cfg.split_for(series.T)
    if cfg.normalize:
        series = normalize_series(series, through=split.T2)
    d = build_lag_design(series, cfg.p, cfg.s)
    _checked_split(cfg, split, d.first_index)
    grid = tu.default_grid(d, cfg.grid_size, through=split.T1)
    lam_hat, curve = tu.rolling_validate(d, grid, split)
    print(f"split T1={split.T1} T2={split.T2} T={split.T}, {d.n_features} features")
    print(f"lambda_hat = {lam_hat:.6g}")
    print(f"{'lambda':>14}{'MSFE':>14}")
    for lam, m in zip(grid.values, curve):
        print(f"{lam:>14.6g}{m:>14.6f}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"lam_hat": lam_hat, "grid": grid.values.tolist(), "msfe": curve.tolist(),
                       "split": [split.T1, split.T2, split.T]}, fh, indent=1, sort_keys=True)
            fh.write("\n")


def cmd_evaluate(args):
    cfg = _config(args, _methods(args), args.reps)
    report = run_experiment(cfg)
    if args.timing:
        report.timing = bench_timing(cfg, iterations=10, warmup=3)
    print(report.format_table())
    if args.json:
        report.to_json(args.json, include_timing=args.timing)
    if args.csv:
        report.to_csv(args.csv)


def cmd_bench(args):
    cfg = _config(args)
    rules = (args.rule,) if args.rule else (tu.GRADIENT, tu.NEWTON)
    timing = bench_timing(cfg, iterations=args.iterations, warmup=args.warmup, rules=rules)
    print(format_timing(timing))
    roll = timing["ms"]["rolling"]["mean"]
    for r in rules:
        print(f"{r}: {timing['ms'][r]['mean'] / roll:.3f} x rolling-validation mean time")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(timing, fh, indent=1, sort_keys=True)
            fh.write("\n")


COMMANDS = {"simulate": cmd_simulate, "tune": cmd_tune, "evaluate": cmd_evaluate,
            "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"reclasso-arx: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, SeriesTooShort, DegenerateDesign, OSError) as exc:
        print(f"reclasso-arx: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"reclasso-arx: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"reclasso-arx: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
