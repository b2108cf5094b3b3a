"""Penalty selection: rolling validation and online penalty updates.

Forecast loops follow a fixed order at every step ``t``: forecast
``y_{t+1}`` with the current model, record the squared error, and only
then adapt the penalty and fold ``(y_{t+1}, z_{t+1})`` into the model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .arx import LaggedDesign
from .errors import DegenerateDesign, NumericalError
from .homotopy import ActiveModel, lambda_path, reclasso_update
from .solver import lambda_max

MAX_LOG_STEP = 1.0
NEWTON_GUARD = 1e-10
DEFAULT_ETA = 0.1
DEFAULT_GRID_SIZE = 50
GRID_DEPTH = 1e-3

STATIC = "static"
ROLLING_WINDOW = "rolling-window"
GRADIENT = "gradient"
NEWTON = "newton"


@dataclass(frozen=True)
class SplitConfig:
    """Initialization ``[first, T1)``, training ``[T1, T2)``, evaluation ``[T2, T]``."""

    T1: int
    T2: int
    T: int

    @classmethod
    def default(cls, T: int) -> "SplitConfig":
        return cls(T // 3, (2 * T) // 3, T)

    @classmethod
    def from_fractions(cls, T: int, init_frac: float, train_frac: float) -> "SplitConfig":
        t1 = int(math.floor(T * init_frac))
        return cls(t1, int(math.floor(T * (init_frac + train_frac))), T)

    def validate(self, first_index: int) -> "SplitConfig":
        if not first_index < self.T1 < self.T2 <= self.T:
            raise ValueError(
                f"need first_index < T1 < T2 <= T, got {first_index}, {self.T1}, {self.T2}, {self.T}")
        return self

    @property
    def train_length(self) -> int:
        return self.T2 - self.T1


@dataclass
class PenaltyGrid:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size == 0 or np.any(self.values <= 0):
            raise ValueError("grid values must be positive")
        if self.values.size > 1 and not np.all(np.diff(self.values) < 0):
            raise ValueError("grid must be strictly decreasing")

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)


@dataclass
class PenaltyTrajectory:
    """Per-step record of an evaluation run."""

    method: str
    times: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    forecasts: list = field(default_factory=list)
    actuals: list = field(default_factory=list)
    sq_errors: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    # ordered ("forecast" | "update", t) pairs when instrumented
    log: list = field(default_factory=list)

    def append(self, t, lam, forecast, actual, flag=""):
        self.times.append(int(t))
        self.lambdas.append(float(lam))
        self.forecasts.append(float(forecast))
        self.actuals.append(float(actual))
        self.sq_errors.append(float((forecast - actual) ** 2))
        self.flags.append(flag)

    @property
    def msfe(self) -> float:
        return float(np.mean(self.sq_errors)) if self.sq_errors else float("nan")

    def to_dict(self):
        return {
            "method": self.method,
            "times": self.times,
            "lambdas": self.lambdas,
            "forecasts": self.forecasts,
            "actuals": self.actuals,
            "sq_errors": self.sq_errors,
            "flags": self.flags,
        }


def default_grid(d: LaggedDesign, n: int = DEFAULT_GRID_SIZE, through: int | None = None,
                 depth: float = GRID_DEPTH) -> PenaltyGrid:
    """Log-spaced grid from lambda_max down to ``depth * lambda_max``.

    ``through`` restricts lambda_max to data up to that time index.
    """
    if n < 2:
        raise ValueError("grid needs at least two points")
    Z, y = d.through(through) if through is not None else (d.Z, d.y)
    lmax = lambda_max(Z, y)
    if lmax <= 0:
        raise DegenerateDesign("lambda_max is zero; every penalty gives the null model")
    return PenaltyGrid(lmax * np.logspace(0.0, math.log10(depth), n))


def _model_at(d: LaggedDesign, t: int, lam: float) -> ActiveModel:
    Z, y = d.through(t)
    return ActiveModel.from_stats(Z.T @ Z, Z.T @ y, Z.shape[0], lam)


def _observation(d: LaggedDesign, t: int):
    r = d.row(t)
    return float(d.y[r]), d.Z[r]


def prediction_error(m: ActiveModel, obs) -> float:
    y_new, z_new = obs
    return (float(y_new) - m.predict(z_new)) ** 2


def grad_log_lambda(m: ActiveModel, obs) -> float:
    """Derivative of the squared one-step error with respect to log(lambda).

    Uses the current active set, so it is exact away from transition
    points. Zero for an empty active set.
    """
    if not m.active:
        return 0.0
    y_new, z_new = obs
    za = np.asarray(z_new, dtype=float)[m.active]
    direction = float(za @ m.ginv.inv @ m.signs)
    resid = float(za @ m.phi_a) - float(y_new)
    return -2.0 * m.lam * direction * resid


def _clamp(step):
    return max(-MAX_LOG_STEP, min(MAX_LOG_STEP, step))


def gradient_update(lam: float, grad: float, eta: float = DEFAULT_ETA) -> float:
    if lam <= 0:
        raise ValueError("lam must be positive")
    return lam * math.exp(_clamp(-eta * grad))


def newton_terms(m: ActiveModel, obs):
    """Gradient, Hessian and the two residuals behind the Newton step.

    Returns ``(grad, hess, resid_phi, resid_sigma)`` where ``resid_phi``
    is ``z_A^T phi_A - y`` and ``resid_sigma`` is ``z_A^T Sigma - y`` with
    ``Sigma = G_A^{-1}(Z_A^T y - 2 lam v_A)``.
    """
    y_new, z_new = obs
    y_new = float(y_new)
    if not m.active:
        return 0.0, 0.0, -y_new, -y_new
    za = np.asarray(z_new, dtype=float)[m.active]
    rhs = m.zty[m.active]
    direction = float(za @ m.ginv.inv @ m.signs)
    resid_phi = float(za @ m.phi_a) - y_new
    sigma = m.ginv.inv @ (rhs - 2.0 * m.lam * m.signs)
    resid_sigma = float(za @ sigma) - y_new
    grad = -2.0 * m.lam * direction * resid_phi
    hess = -2.0 * m.lam * direction * resid_sigma
    return grad, hess, resid_phi, resid_sigma


def newton_log_step(m: ActiveModel, obs, damping: float = 0.0):
    """Clamped Newton step in log(lambda), or ``None`` when it is skipped.

    The step is ``-grad / (|hess| + damping)``. With ``damping = 0`` this
    is the textbook Newton step where the error is locally convex and a
    curvature-scaled descent step where it is concave; the common factor
    of grad and hess cancels, leaving ``-sign(hess) * resid_phi /
    resid_sigma``. A positive ``damping`` moves the step toward gradient
    descent with rate ``1 / damping``.
    """
    if damping < 0:
        raise ValueError("damping must be non-negative")
    grad, hess, resid_phi, resid_sigma = newton_terms(m, obs)
    if abs(resid_sigma) <= NEWTON_GUARD or hess == 0.0:
        return None
    if damping == 0.0:
        return _clamp(-math.copysign(1.0, hess) * (resid_phi / resid_sigma))
    return _clamp(-grad / (abs(hess) + damping))


def newton_update(m: ActiveModel, obs, lam_t: float | None = None,
                  damping: float = 0.0) -> float:
    lam_t = m.lam if lam_t is None else lam_t
    if lam_t <= 0:
        raise ValueError("lam must be positive")
    step = newton_log_step(m, obs, damping)
    return lam_t if step is None else lam_t * math.exp(step)


def evaluation_damping(eta: float) -> float:
    """Damping used by the Newton rule inside evaluation loops.

    ``1 / eta`` makes the damped step agree with the gradient rule where
    the curvature vanishes. ``eta = 0`` freezes lambda.
    """
    return math.inf if eta == 0 else 1.0 / eta


def _online_loop(d: LaggedDesign, lam: float, t_start: int, t_stop: int, rule: str,
                 eta: float = DEFAULT_ETA, instrument: bool = False,
                 method: str | None = None) -> PenaltyTrajectory:
    """Forecast ``y_{t+1}`` for ``t`` in ``[t_start, t_stop)``, adapting lambda."""
    if lam <= 0:
        raise ValueError("initial lambda must be positive")
    traj = PenaltyTrajectory(method or rule)
    model = _model_at(d, t_start, lam)
    for t in range(t_start, t_stop):
        obs = _observation(d, t + 1)
        forecast = model.predict(obs[1])
        flag = ""
        traj.append(t, lam, forecast, obs[0])
        if instrument:
            traj.log.append(("forecast", t))
        if rule == GRADIENT:
            new_lam = gradient_update(lam, grad_log_lambda(model, obs), eta)
        elif rule == NEWTON:
            step = newton_log_step(model, obs, evaluation_damping(eta))
            if step is None:
                new_lam = lam
                flag = "skip"
            else:
                new_lam = lam * math.exp(step)
        elif rule == STATIC:
            new_lam = lam
        else:
            raise ValueError(f"unknown rule {rule!r}")
        if instrument:
            traj.log.append(("update", t))
        if t + 1 < t_stop:
            before = model.n_fallbacks
            model = reclasso_update(model, obs, new_lam, inplace=True)
            if model.n_fallbacks > before:
                flag = (flag + ",fallback").lstrip(",")
        traj.flags[-1] = flag
        lam = new_lam
    return traj


def online_evaluate(d: LaggedDesign, rule: str, lam_init: float, split: SplitConfig,
                    eta: float = DEFAULT_ETA, instrument: bool = False) -> PenaltyTrajectory:
    """Online penalty adaptation over the evaluation period ``[T2, T)``.

    ``rule`` is ``"gradient"`` or ``"newton"``; ``"static"`` keeps lambda
    fixed. The model is updated by the homotopy after every step.
    """
    split.validate(d.first_index)
    return _online_loop(d, lam_init, split.T2, split.T, rule, eta, instrument)


def static_evaluate(d: LaggedDesign, lam: float, split: SplitConfig,
                    instrument: bool = False) -> PenaltyTrajectory:
    split.validate(d.first_index)
    return _online_loop(d, lam, split.T2, split.T, STATIC, instrument=instrument)


def grid_errors(d: LaggedDesign, grid: PenaltyGrid, t_start: int, t_stop: int):
    """Squared one-step errors for every grid value over ``[t_start, t_stop)``.

    Each penalty gets its own model, warm-started along the decreasing grid
    at ``t_start`` and then moved forward one observation at a time. A
    thread that fails numerically scores ``inf`` from then on.

    Returns
    -------
    errors, forecasts : ndarray, shape (len(grid), t_stop - t_start)
    """
    steps = t_stop - t_start
    errors = np.full((len(grid), steps), np.inf)
    forecasts = np.full((len(grid), steps), np.nan)
    Z, y = d.through(t_start)
    base = None
    for g, lam in enumerate(grid):
        i = 0
        try:
            if base is None:
                base = ActiveModel.from_stats(Z.T @ Z, Z.T @ y, Z.shape[0], lam)
            else:
                base = lambda_path(base, lam, fallback=True)
            model = base.copy()
            for i, t in enumerate(range(t_start, t_stop)):
                y_next, z_next = _observation(d, t + 1)
                forecasts[g, i] = model.predict(z_next)
                errors[g, i] = (forecasts[g, i] - y_next) ** 2
                if t + 1 < t_stop:
                    model = reclasso_update(model, (y_next, z_next), lam, inplace=True)
        except NumericalError:
            base = None
            errors[g, i:] = np.inf
    return errors, forecasts


def _argmin_larger_lambda(msfe):
    # grid is decreasing, so argmin's first hit is the largest tied lambda
    return int(np.argmin(msfe))


def rolling_validate(d: LaggedDesign, grid: PenaltyGrid, split: SplitConfig):
    """Pick lambda minimizing one-step MSFE over the training period.

    Returns
    -------
    lam_hat : float
    msfe : ndarray
        MSFE for each grid value, in grid order.
    """
    split.validate(d.first_index)
    errors, _ = grid_errors(d, grid, split.T1, split.T2)
    msfe = errors.mean(axis=1)
    return float(grid.values[_argmin_larger_lambda(msfe)]), msfe


def rolling_window_evaluate(d: LaggedDesign, grid: PenaltyGrid, split: SplitConfig,
                            errors=None, forecasts=None) -> PenaltyTrajectory:
    """Re-select lambda from the original grid at every evaluation step.

    The selection window keeps the training width ``T2 - T1`` and slides
    forward one observation per step. Precomputed ``grid_errors`` over
    ``[T1, T)`` may be passed in to share work with rolling validation.
    """
    split.validate(d.first_index)
    if errors is None:
        errors, forecasts = grid_errors(d, grid, split.T1, split.T)
    width = split.train_length
    traj = PenaltyTrajectory(ROLLING_WINDOW)
    for t in range(split.T2, split.T):
        lo = t - split.T1 - width
        window = errors[:, lo:lo + width].mean(axis=1)
        g = _argmin_larger_lambda(window)
        col = t - split.T1
        y_next = d.y[d.row(t + 1)]
        traj.append(t, grid.values[g], forecasts[g, col], y_next)
    return traj
