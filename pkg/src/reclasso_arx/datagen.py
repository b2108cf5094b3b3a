"""Stationary sparse AR-X simulator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arx import SeriesSet
from .errors import RescaleFailed

BURN_IN = 200
MAX_HALVINGS = 100
MAX_REDRAWS = 50


@dataclass(frozen=True)
class SimConfig:
    k: int = 10
    p: int = 12
    s: int = 12
    T: int = 250
    density: float = 0.1
    noise_sd: float = 1.0
    seed: int = 0
    spectral_cap: float = 0.95

    def __post_init__(self):
        if not 0.0 < self.density <= 1.0:
            raise ValueError("density must lie in (0, 1]")
        if not 0.0 < self.spectral_cap < 1.0:
            raise ValueError("spectral_cap must lie in (0, 1)")
        if self.T <= max(self.p, self.s) + 1:
            raise ValueError("T too short for the lag orders")
        if self.p + self.k * self.s < 1:
            raise ValueError("model has no coefficients")

    @property
    def n_features(self) -> int:
        return self.p + self.k * self.s


@dataclass
class TrueModel:
    phi: np.ndarray
    support: np.ndarray
    exo_ar: np.ndarray
    spectral_radius: float = 0.0


def companion_spectral_radius(phi, p, k, s, exo_ar) -> float:
    """Largest eigenvalue modulus of the joint (y, x) block companion matrix.

    ``phi`` follows the design column order: target lags ``1..p`` then
    each exogenous series' lags ``1..s``. Each exogenous series is its own
    AR(1) with coefficient ``exo_ar[i]``.
    """
    phi = np.asarray(phi, dtype=float)
    exo_ar = np.asarray(exo_ar, dtype=float)
    dim = 1 + k
    order = max(p, s, 1)
    comp = np.zeros((dim * order, dim * order))
    for lag in range(1, order + 1):
        block = np.zeros((dim, dim))
        if lag <= p:
            block[0, 0] = phi[lag - 1]
        if lag <= s:
            for i in range(k):
                block[0, 1 + i] = phi[p + i * s + lag - 1]
        if lag == 1:
            for i in range(k):
                block[1 + i, 1 + i] = exo_ar[i]
        comp[:dim, (lag - 1) * dim:lag * dim] = block
    if order > 1:
        comp[dim:, :-dim] = np.eye(dim * (order - 1))
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def _draw_coefficients(cfg: SimConfig, rng):
    m = cfg.n_features
    n_support = max(1, int(round(cfg.density * m)))
    support = np.sort(rng.choice(m, size=n_support, replace=False))
    phi = np.zeros(m)
    phi[support] = rng.choice([-1.0, 1.0], size=n_support) * rng.uniform(0.1, 1.0, n_support)
    return phi, support


def simulate_arx(cfg: SimConfig, phi=None, exo_ar=None):
    """Simulate a stationary AR-X series set.

    Parameters
    ----------
    cfg : SimConfig
    phi : array_like, optional
        Fix the target-equation coefficients instead of drawing them.
        They are still shrunk if they violate the spectral cap.
    exo_ar : array_like, optional
        Fix the exogenous AR(1) coefficients.

    Returns
    -------
    series : SeriesSet
    truth : TrueModel
    """
    rng = np.random.default_rng(cfg.seed)
    k = cfg.k
    if exo_ar is None:
        exo_ar = rng.uniform(0.3, 0.7, size=k)
    exo_ar = np.asarray(exo_ar, dtype=float)
    for _ in range(MAX_REDRAWS):
        if phi is None:
            coef, support = _draw_coefficients(cfg, rng)
        else:
            coef = np.array(phi, dtype=float)
            support = np.flatnonzero(coef)
        radius = companion_spectral_radius(coef, cfg.p, k, cfg.s, exo_ar)
        halvings = 0
        while radius > cfg.spectral_cap and halvings < MAX_HALVINGS:
            coef *= 0.5
            halvings += 1
            radius = companion_spectral_radius(coef, cfg.p, k, cfg.s, exo_ar)
        if radius <= cfg.spectral_cap:
            break
        if phi is not None:
            raise RescaleFailed("fixed coefficients cannot meet the spectral cap")
    else:
        raise RescaleFailed(f"no stationary draw after {MAX_REDRAWS} attempts")

    total = cfg.T + BURN_IN
    order = max(cfg.p, cfg.s, 1)
    x = np.zeros((k, total + order))
    y = np.zeros(total + order)
    x_noise = rng.standard_normal((k, total + order))
    y_noise = cfg.noise_sd * rng.standard_normal(total + order)
    own = coef[:cfg.p]
    cross = coef[cfg.p:].reshape(k, cfg.s) if k else np.zeros((0, cfg.s))
    for t in range(order, total + order):
        if k:
            x[:, t] = exo_ar * x[:, t - 1] + x_noise[:, t]
        val = y_noise[t]
        if cfg.p:
            val += own @ y[t - cfg.p:t][::-1]
        if k and cfg.s:
            val += np.sum(cross * x[:, t - cfg.s:t][:, ::-1])
        y[t] = val
    keep = slice(order + BURN_IN, None)
    labels = ["y"] + [f"x{i + 1}" for i in range(k)]
    series = SeriesSet(y=y[keep], x=x[:, keep], labels=labels)
    return series, TrueModel(phi=coef, support=support, exo_ar=exo_ar, spectral_radius=radius)
