"""Experiment orchestration, reports and timing benchmarks."""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tuning as tu
from .arx import SeriesSet, build_lag_design, fit_ols, ic_lag_select
from .data import IngestSpec, load_csv, normalize_series
from .datagen import SimConfig, simulate_arx
from .errors import RankDeficient, ReclassoError, SeriesTooShort

MEAN = "mean"
RANDOM_WALK = "random-walk"
AIC = "aic"
BIC = "bic"
ALL_METHODS = (tu.STATIC, tu.ROLLING_WINDOW, tu.GRADIENT, tu.NEWTON, MEAN, RANDOM_WALK, AIC, BIC)
LASSO_METHODS = (tu.STATIC, tu.ROLLING_WINDOW, tu.GRADIENT, tu.NEWTON)


@dataclass
class ExperimentConfig:
    """Everything that determines an evaluation run.

    ``t1``/``t2`` override the split; otherwise it comes from
    ``init_frac`` and ``train_frac`` (thirds by default).
    """

    source: str = "simulate"
    csv_path: str | None = None
    target: str | None = None
    aggregate: int = 1
    p: int = 12
    s: int = 12
    grid_size: int = tu.DEFAULT_GRID_SIZE
    eta: float = tu.DEFAULT_ETA
    methods: tuple = ALL_METHODS
    reps: int = 1
    seed: int = 0
    init_frac: float = 1.0 / 3.0
    train_frac: float = 1.0 / 3.0
    t1: int | None = None
    t2: int | None = None
    normalize: bool = True
    instrument: bool = False
    sim: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        if self.source not in ("simulate", "csv"):
            raise ValueError(f"unknown data source {self.source!r}")
        if self.source == "csv" and (self.csv_path is None or self.target is None):
            raise ValueError("csv source needs csv_path and target")
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        self.methods = tuple(self.methods)

    def split_for(self, T: int) -> tu.SplitConfig:
        if self.t1 is not None or self.t2 is not None:
            default = tu.SplitConfig.from_fractions(T, self.init_frac, self.train_frac)
            return tu.SplitConfig(self.t1 if self.t1 is not None else default.T1,
                                  self.t2 if self.t2 is not None else default.T2, T)
        if self.init_frac == 1.0 / 3.0 and self.train_frac == 1.0 / 3.0:
            return tu.SplitConfig.default(T)
        return tu.SplitConfig.from_fractions(T, self.init_frac, self.train_frac)

    def to_dict(self):
        out = asdict(self)
        out["methods"] = list(self.methods)
        return out


@dataclass
class ReplicationResult:
    index: int
    split: tuple
    lam_hat: float
    msfe: dict
    trajectories: dict
    ic_orders: dict = field(default_factory=dict)


@dataclass
class EvaluationReport:
    config: dict
    methods: list
    replications: list
    timing: dict | None = None

    def mean_msfe(self, method) -> float:
        return float(np.mean([r.msfe[method] for r in self.replications]))

    def per_rep(self, method) -> np.ndarray:
        return np.array([r.msfe[method] for r in self.replications])

    def relative_msfe(self, method, baseline=tu.STATIC) -> float:
        if method == baseline:
            return 1.0
        return self.mean_msfe(method) / self.mean_msfe(baseline)

    def standard_error(self, method, baseline=tu.STATIC) -> float:
        """Standard error of the mean MSFE, on the relative scale."""
        vals = self.per_rep(method)
        if vals.size < 2:
            return float("nan")
        return float(vals.std(ddof=1) / math.sqrt(vals.size) / self.mean_msfe(baseline))

    def table(self):
        rows = []
        for m in self.methods:
            rel = self.relative_msfe(m) if tu.STATIC in self.methods else float("nan")
            se = self.standard_error(m) if tu.STATIC in self.methods else float("nan")
            rows.append({"method": m, "msfe": self.mean_msfe(m), "relative_msfe": rel,
                         "standard_error": se})
        return rows

    def to_dict(self, include_timing=False):
        out = {
            "config": self.config,
            "summary": self.table(),
            "replications": [
                {"index": r.index, "split": list(r.split), "lam_hat": r.lam_hat,
                 "msfe": r.msfe, "ic_orders": r.ic_orders,
                 "trajectories": {m: t.to_dict() for m, t in r.trajectories.items()}}
                for r in self.replications
            ],
        }
        if include_timing and self.timing is not None:
            out["timing"] = self.timing
        return out

    def to_json(self, path, include_timing=False):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(include_timing), fh, indent=1, sort_keys=True,
                      default=_json_default)
            fh.write("\n")

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "msfe", "relative_msfe", "standard_error"])
            for row in self.table():
                w.writerow([row["method"], repr(row["msfe"]), repr(row["relative_msfe"]),
                            repr(row["standard_error"])])

    def format_table(self) -> str:
        lines = [f"{'method':<16}{'MSFE':>12}{'relative':>12}{'s.e.':>10}"]
        for row in self.table():
            lines.append(f"{row['method']:<16}{row['msfe']:>12.4f}{row['relative_msfe']:>12.4f}"
                         f"{row['standard_error']:>10.5f}")
        return "\n".join(lines)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)}")


def _checked_split(cfg: ExperimentConfig, split: tu.SplitConfig, first_index: int):
    try:
        return split.validate(first_index)
    except ValueError as exc:
        if cfg.t1 is None and cfg.t2 is None:
            # the default split only fails when the data are too short
            raise SeriesTooShort(f"series too short for p={cfg.p}, s={cfg.s}: {exc}") from None
        raise


def load_series(cfg: ExperimentConfig, rep: int) -> SeriesSet:
    if cfg.source == "csv":
        return load_csv(cfg.csv_path, IngestSpec(target=cfg.target, aggregate=cfg.aggregate))
    sim = SimConfig(**{**asdict(cfg.sim), "p": cfg.p, "s": cfg.s, "seed": cfg.seed + rep})
    series, _ = simulate_arx(sim)
    return series


def naive_forecasts(series: SeriesSet, split: tu.SplitConfig, method: str) -> tu.PenaltyTrajectory:
    """Sample-mean or random-walk forecasts of ``y_{t+1}`` for ``t`` in ``[T2, T)``."""
    traj = tu.PenaltyTrajectory(method)
    y = series.y
    for t in range(split.T2, split.T):
        # y_t lives at y[t - 1]
        fc = float(np.mean(y[:t])) if method == MEAN else float(y[t - 1])
        traj.append(t, 1.0, fc, y[t])
    return traj


def ic_forecasts(series: SeriesSet, split: tu.SplitConfig, p_max: int, s_max: int,
                 criterion: str):
    """OLS AR-X forecasts with the lag order chosen once on data through ``T2``.

    The coefficients are re-estimated on an expanding window at every
    evaluation step.
    """
    head = SeriesSet(y=series.y[:split.T2], x=series.x[:, :split.T2], labels=series.labels)
    p_hat, s_hat = ic_lag_select(head, p_max, s_max, criterion)
    d = build_lag_design(series, p_hat, s_hat)
    traj = tu.PenaltyTrajectory(criterion)
    for t in range(split.T2, split.T):
        Z, y = d.through(t)
        try:
            phi = fit_ols((Z, y))
        except RankDeficient:
            phi = np.linalg.lstsq(Z, y, rcond=None)[0]
        r = d.row(t + 1)
        traj.append(t, 1.0, float(d.Z[r] @ phi), d.y[r])
    return traj, (p_hat, s_hat)


def run_replication(cfg: ExperimentConfig, rep: int, series: SeriesSet | None = None):
    if series is None:
        series = load_series(cfg, rep)
    split = cfg.split_for(series.T)
    if cfg.normalize:
        series = normalize_series(series, through=split.T2)
    msfe, trajs, orders = {}, {}, {}
    lam_hat = float("nan")
    if any(m in LASSO_METHODS for m in cfg.methods):
        d = build_lag_design(series, cfg.p, cfg.s)
        _checked_split(cfg, split, d.first_index)
        grid = tu.default_grid(d, cfg.grid_size, through=split.T1)
        need_window = tu.ROLLING_WINDOW in cfg.methods
        stop = split.T if need_window else split.T2
        errors, forecasts = tu.grid_errors(d, grid, split.T1, stop)
        curve = errors[:, :split.train_length].mean(axis=1)
        lam_hat = float(grid.values[tu._argmin_larger_lambda(curve)])
        for m in cfg.methods:
            if m == tu.STATIC:
                trajs[m] = tu.static_evaluate(d, lam_hat, split, instrument=cfg.instrument)
            elif m == tu.ROLLING_WINDOW:
                trajs[m] = tu.rolling_window_evaluate(d, grid, split, errors, forecasts)
            elif m in (tu.GRADIENT, tu.NEWTON):
                trajs[m] = tu.online_evaluate(d, m, lam_hat, split, eta=cfg.eta,
                                              instrument=cfg.instrument)
    for m in cfg.methods:
        if m in (MEAN, RANDOM_WALK):
            trajs[m] = naive_forecasts(series, split, m)
        elif m in (AIC, BIC):
            trajs[m], orders[m] = ic_forecasts(series, split, cfg.p, cfg.s, m)
    for m in cfg.methods:
        msfe[m] = trajs[m].msfe
    return ReplicationResult(rep, (split.T1, split.T2, split.T), lam_hat, msfe,
                             {m: trajs[m] for m in cfg.methods}, orders)


def run_experiment(cfg: ExperimentConfig, progress=None) -> EvaluationReport:
    """Run every configured method on every replication.

    Replication ``r`` of a simulation uses seed ``cfg.seed + r``. A CSV
    source is read once and evaluated as a single replication.
    """
    reps = []
    shared = load_series(cfg, 0) if cfg.source == "csv" else None
    n_reps = 1 if cfg.source == "csv" else cfg.reps
    for r in range(n_reps):
        try:
            reps.append(run_replication(cfg, r, shared))
        except ReclassoError as exc:
            exc.args = (f"replication {r}: {exc}",) + exc.args[1:]
            raise
        if progress is not None:
            progress(r, reps[-1])
    return EvaluationReport(config=cfg.to_dict(), methods=list(cfg.methods), replications=reps)


# ----------------------------------------------------------------------
# timing

def summarize_times(ms) -> dict:
    ms = np.asarray(ms, dtype=float)
    q1, med, q3 = np.percentile(ms, [25, 50, 75])
    return {"min": float(ms.min()), "lower_quartile": float(q1), "mean": float(ms.mean()),
            "median": float(med), "upper_quartile": float(q3), "max": float(ms.max()),
            "n": int(ms.size)}


def bench_timing(cfg: ExperimentConfig, iterations: int = 100, warmup: int = 3,
                 rules=(tu.GRADIENT, tu.NEWTON), clock=time.perf_counter) -> dict:
    """Wall-clock distribution of one rolling-validation pass against online updating.

    Both run over the training period ``[T1, T2)``. The online procedures
    start from the rolling-validation choice of lambda. With
    ``cfg.instrument`` set, the last trajectory of each online rule is
    kept under ``"trajectories"`` (not JSON-serialized by the CLI).
    """
    if warmup < 3:
        raise ValueError("at least 3 warmup iterations are required")
    series = load_series(cfg, 0)
    split = cfg.split_for(series.T)
    if cfg.normalize:
        series = normalize_series(series, through=split.T2)
    d = build_lag_design(series, cfg.p, cfg.s)
    _checked_split(cfg, split, d.first_index)
    grid = tu.default_grid(d, cfg.grid_size, through=split.T1)
    lam_hat, _ = tu.rolling_validate(d, grid, split)

    jobs = {"rolling": lambda: tu.rolling_validate(d, grid, split)}
    for rule in rules:
        jobs[rule] = (lambda r: lambda: tu._online_loop(d, lam_hat, split.T1, split.T2, r,
                                                        cfg.eta, cfg.instrument))(rule)
    out = {"split": [split.T1, split.T2, split.T], "lam_hat": lam_hat,
           "iterations": iterations, "warmup": warmup, "ms": {}}
    kept = {}
    for name, job in jobs.items():
        for _ in range(warmup):
            job()
        times = []
        for _ in range(iterations):
            t0 = clock()
            result = job()
            times.append((clock() - t0) * 1e3)
        out["ms"][name] = summarize_times(times)
        if name in rules:
            kept[name] = result
    if cfg.instrument:
        out["trajectories"] = kept
    return out


def format_timing(timing: dict) -> str:
    cols = ["min", "lower_quartile", "mean", "median", "upper_quartile", "max"]
    lines = [f"{'procedure':<12}" + "".join(f"{c:>16}" for c in cols)]
    for name, row in timing["ms"].items():
        lines.append(f"{name:<12}" + "".join(f"{row[c]:>16.2f}" for c in cols))
    return "\n".join(lines)
