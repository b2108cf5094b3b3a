"""AR-X design construction and the classical baselines.

Time indices are 1-based throughout, matching the usual time-series
notation: a series of length ``T`` covers ``t = 1..T`` and the array entry
``y[t - 1]`` holds ``y_t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficient, SeriesTooShort

PIVOT_TOL = 1e-10


@dataclass
class SeriesSet:
    """Target series plus ``k`` exogenous series on a common time axis."""

    y: np.ndarray
    x: np.ndarray = None
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.x is None:
            self.x = np.zeros((0, self.y.shape[0]))
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if self.x.size == 0:
            self.x = np.zeros((0, self.y.shape[0]))
        if self.x.shape[1] != self.y.shape[0]:
            raise ValueError(
                f"exogenous series have length {self.x.shape[1]}, target has {self.y.shape[0]}")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.x))):
            raise ValueError("series contain non-finite values")
        if not self.labels:
            self.labels = ["y"] + [f"x{i + 1}" for i in range(self.k)]

    @property
    def T(self) -> int:
        return self.y.shape[0]

    @property
    def k(self) -> int:
        return self.x.shape[0]


@dataclass
class LaggedDesign:
    """Responses and lagged features.

    Row ``r`` holds time ``first_index + r``. Columns are the target lags
    ``1..p`` followed, for each exogenous series in turn, by its lags
    ``1..s``.
    """

    Z: np.ndarray
    y: np.ndarray
    p: int
    s: int
    k: int
    first_index: int
    T: int

    @property
    def n_features(self) -> int:
        return self.Z.shape[1]

    @property
    def last_index(self) -> int:
        return self.first_index + self.Z.shape[0] - 1

    def row(self, t: int) -> int:
        """Row position of time ``t``."""
        r = t - self.first_index
        if not 0 <= r < self.Z.shape[0]:
            raise IndexError(f"time {t} outside design range [{self.first_index}, {self.last_index}]")
        return r

    def through(self, t: int):
        """``(Z, y)`` restricted to rows with time index ``<= t``."""
        stop = t - self.first_index + 1
        return self.Z[:stop], self.y[:stop]

    def column_names(self, labels=None):
        labels = labels or ["y"] + [f"x{i + 1}" for i in range(self.k)]
        names = [f"{labels[0]}.L{j}" for j in range(1, self.p + 1)]
        for i in range(self.k):
            names += [f"{labels[i + 1]}.L{j}" for j in range(1, self.s + 1)]
        return names


def build_lag_design(series: SeriesSet, p: int, s_lags: int, start: int | None = None) -> LaggedDesign:
    """Stack lagged target and exogenous values into a regression design.

    ``start`` overrides the first usable time index (it must be at least
    ``max(p, s_lags) + 1``); IC comparisons use it to put every candidate
    order on the same sample.
    """
    if p < 0 or s_lags < 0:
        raise ValueError("lag orders must be non-negative")
    k = series.k
    n_cols = p + k * s_lags
    if n_cols < 1:
        raise ValueError("design would have no columns")
    first = max(p, s_lags) + 1
    if start is not None:
        if start < first:
            raise ValueError(f"start {start} precedes the first usable index {first}")
        first = start
    T = series.T
    if T <= max(p, s_lags) + 1 or first > T:
        raise SeriesTooShort(f"series of length {T} too short for lags ({p}, {s_lags})")
    times = np.arange(first, T + 1)
    Z = np.empty((times.size, n_cols))
    for j in range(1, p + 1):
        Z[:, j - 1] = series.y[times - j - 1]
    for i in range(k):
        for j in range(1, s_lags + 1):
            Z[:, p + i * s_lags + j - 1] = series.x[i, times - j - 1]
    return LaggedDesign(Z=Z, y=series.y[times - 1].copy(), p=p, s=s_lags, k=k,
                        first_index=first, T=T)


def fit_ols(d: LaggedDesign | tuple) -> np.ndarray:
    """Least-squares coefficients via a QR factorization.

    Accepts a :class:`LaggedDesign` or a bare ``(Z, y)`` pair.

    Raises
    ------
    RankDeficient
        If there are fewer rows than columns, or the smallest pivot of R
        is below ``1e-10`` relative to the largest.
    """
    Z, y = (d.Z, d.y) if isinstance(d, LaggedDesign) else d
    n, m = Z.shape
    if n < m:
        raise RankDeficient(f"{n} rows for {m} columns")
    q, r = np.linalg.qr(Z)
    diag = np.abs(np.diag(r))
    if diag.size and diag.min() <= PIVOT_TOL * max(diag.max(), 1.0):
        raise RankDeficient("design is numerically rank deficient")
    return np.linalg.solve(r, q.T @ y)


def ic_score(d: LaggedDesign, criterion: str = "bic") -> float:
    """AIC or BIC of an OLS AR-X fit.

    The fit variance is the mean squared residual and the sample size in
    the penalty is the full series length ``d.T``.
    """
    phi = fit_ols(d)
    resid = d.y - d.Z @ phi
    sigma = float(resid @ resid) / resid.size
    if sigma <= 0:
        raise RankDeficient("zero residual variance; IC undefined")
    return _ic(sigma, d.n_features, d.T, criterion)


def _ic(sigma, n_params, T, criterion):
    crit = criterion.lower()
    if crit == "aic":
        return math.log(sigma) + 2.0 * n_params / T
    if crit == "bic":
        return math.log(sigma) + math.log(T) * n_params / T
    raise ValueError(f"unknown criterion {criterion!r}")


def ic_lag_select(series: SeriesSet, p_max: int, s_max: int, criterion: str = "bic",
                  candidates=None):
    """Exhaustive lag-order search minimizing an information criterion.

    Every exogenous series shares the same order ``s``. All candidates are
    fitted on the common sample starting at ``max(p_max, s_max) + 1``.
    Orders with ``p + k*s`` not below the available rows are skipped.
    Ties go to the smaller ``p + k*s`` and then the smaller ``s``.

    Returns
    -------
    tuple of int
        ``(p_hat, s_hat)``
    """
    k = series.k
    if k == 0:
        s_max = 0
    start = max(p_max, s_max) + 1
    if series.T <= start:
        raise SeriesTooShort(f"series of length {series.T} too short for max lags")
    rows = series.T - start + 1
    if candidates is None:
        candidates = [(pp, ss) for pp in range(p_max + 1) for ss in range(s_max + 1)
                      if (pp, ss) != (0, 0)]
    best = None
    for pp, ss in candidates:
        size = pp + k * ss
        if size < 1 or size >= rows:
            continue
        d = build_lag_design(series, pp, ss, start=start)
        try:
            score = ic_score(d, criterion)
        except RankDeficient:
            continue
        key = (score, size, ss)
        if best is None or key < best[0]:
            best = (key, (pp, ss))
    if best is None:
        raise SeriesTooShort("no admissible lag order")
    return best[1]


def sample_mean_forecast(y) -> float:
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("empty series")
    return float(np.mean(y))


def random_walk_forecast(y) -> float:
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("empty series")
    return float(y[-1])
