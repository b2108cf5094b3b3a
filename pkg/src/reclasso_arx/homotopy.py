"""Homotopy updates of a lasso solution.

Two paths are followed exactly, event by event:

* the lambda-path, moving the penalty on fixed data (LARS-style), and
* the gamma-path, which folds one new observation in by scaling its row
  from 0 to 1 while the penalty stays fixed.

Both are piecewise affine in a scalar. On the lambda-path that scalar is
lambda itself. On the gamma-path write mu = gamma**2 and let ``H0`` be
the active Gram inverse at the current ``mu0``; with ``delta = mu - mu0``
and ``tau = delta / (1 + delta * q)`` (``q = z_A^T H0 z_A``)

    phi_A(tau) = phi_A(mu0) + tau * e * H0 z_A
    corr(tau)  = corr(mu0)  + tau * e * (z - M[:, A] H0 z_A)

where ``e`` is the residual of the new row at ``mu0`` and ``M`` is the
augmented Gram. Transition points are then roots of linear equations.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateFeature, NumericalError, PathStalled, SingularUpdate
from .linalg import (
    GUARD_TOL,
    REFRESH_EVERY,
    GramInverse,
    ginv_add_feature,
    ginv_remove_feature,
    sm_observation_update,
)
from .solver import _kkt_residual, lasso_cd_gram

TIE_TOL = 1e-12
VERIFY_TOL = 1e-9
# run gamma-paths through the compiled kernel when no history is recorded
USE_KERNEL = True


class EventKind(str, enum.Enum):
    LEAVES = "leaves"
    ENTERS = "enters"


@dataclass(frozen=True)
class TransitionEvent:
    kind: EventKind
    feature: int
    location: float
    # largest coefficient jump between the affine continuation and the
    # closed form recomputed on the new active set
    jump: float = 0.0


class ActiveModel:
    """Lasso solution at one penalty value, plus what is needed to move it.

    The data enter only through ``gram = Z^T Z``, ``zty = Z^T y`` and the
    row count, so the model never holds the design itself.

    Attributes
    ----------
    lam : float
        Current penalty.
    active : list of int
        Active feature indices, in insertion order (matches ``ginv``).
    signs : ndarray
        Signs of the active coefficients.
    phi_a : ndarray
        Active coefficients.
    ginv : GramInverse
        Inverse of the active Gram block.
    corr : ndarray
        Residual correlations ``Z^T (y - Z phi)`` for every feature.
    """

    def __init__(self, gram, zty, n_obs, lam, active=(), signs=(), ginv=None):
        self.gram = np.array(gram, dtype=float)
        self.zty = np.array(zty, dtype=float)
        self.n_obs = int(n_obs)
        self.lam = float(lam)
        self.active = [int(j) for j in active]
        self.signs = np.array(signs, dtype=float)
        self.n_events = 0
        self.n_fallbacks = 0
        self.record = False
        self.history: list[TransitionEvent] = []
        # augmentation (mu, z, y) while a gamma-path is in progress
        self._aug = None
        self._rebuild_columns()
        if ginv is None:
            ginv = GramInverse.from_gram(self._active_gram())
        self.ginv = ginv
        self._recompute()

    # ------------------------------------------------------------------
    # construction
    @classmethod
    def from_stats(cls, gram, zty, n_obs, lam) -> "ActiveModel":
        """Build the solution at ``lam`` by following the path down from lambda_max."""
        if lam <= 0:
            raise ValueError("lam must be positive")
        zty = np.asarray(zty, dtype=float)
        lmax = float(np.max(np.abs(zty))) if zty.size else 0.0
        if lam >= lmax or lmax == 0.0:
            return cls(gram, zty, n_obs, lam)
        model = cls(gram, zty, n_obs, lmax)
        try:
            _lambda_path_inplace(model, lam)
        except NumericalError:
            model.lam = lam
            _fallback_cd(model)
        return model

    @classmethod
    def from_data(cls, Z, y, lam) -> "ActiveModel":
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        y = np.asarray(y, dtype=float)
        return cls.from_stats(Z.T @ Z, Z.T @ y, Z.shape[0], lam)

    def copy(self) -> "ActiveModel":
        new = object.__new__(ActiveModel)
        new.__dict__.update(self.__dict__)
        new.gram = self.gram.copy()
        new.zty = self.zty.copy()
        new.active = list(self.active)
        new.signs = self.signs.copy()
        new.ginv = GramInverse(self.ginv.inv.copy(), self.ginv.updates)
        new.phi_a = self.phi_a.copy()
        new.corr = self.corr.copy()
        new.history = list(self.history)
        new._buf = self._buf.copy(order="F")
        return new

    # ------------------------------------------------------------------
    @property
    def n_features(self) -> int:
        return self.zty.shape[0]

    @property
    def coef(self) -> np.ndarray:
        phi = np.zeros(self.n_features)
        if self.active:
            phi[self.active] = self.phi_a
        return phi

    def predict(self, z) -> float:
        if not self.active:
            return 0.0
        return float(np.asarray(z, dtype=float)[self.active] @ self.phi_a)

    def kkt_residual(self) -> float:
        return _kkt_residual(self.corr, self.coef, self.lam)

    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.zty))) if self.zty.size else 1.0)

    # ------------------------------------------------------------------
    # Gram columns of the active set, cached column-contiguous in a
    # buffer that grows by doubling
    def _rebuild_columns(self):
        cap = max(8, 2 * len(self.active))
        self._buf = np.empty((self.n_features, cap), order="F")
        if self.active:
            self._buf[:, :len(self.active)] = self.gram[:, self.active]

    @property
    def _ga(self):
        return self._buf[:, :len(self.active)]

    def _push_column(self, j):
        k = len(self.active)
        if k == self._buf.shape[1]:
            grown = np.empty((self._buf.shape[0], 2 * k), order="F")
            grown[:, :k] = self._buf[:, :k]
            self._buf = grown
        self._buf[:, k] = self.gram[:, j]

    def _drop_column(self, pos):
        k = len(self.active)
        self._buf[:, pos:k - 1] = self._buf[:, pos + 1:k].copy()

    # augmented-Gram helpers; with no augmentation these reduce to gram/zty
    def _rhs(self):
        if self._aug is None:
            return self.zty
        mu, z, y = self._aug
        return self.zty + (mu * y) * z

    def _gram_times(self, vec):
        """M[:, A] @ vec for the (possibly augmented) Gram M."""
        out = self._ga @ vec
        if self._aug is not None:
            mu, z, _ = self._aug
            out += (mu * float(z[self.active] @ vec)) * z
        return out

    def _active_gram(self):
        A = self.active
        block = self.gram[np.ix_(A, A)]
        if self._aug is not None:
            mu, z, _ = self._aug
            block = block + mu * np.outer(z[A], z[A])
        return block

    def _recompute(self):
        """Closed-form coefficients and residual correlations for the current set."""
        rhs = self._rhs()
        if self.active:
            self.phi_a = self.ginv.inv @ (rhs[self.active] - self.lam * self.signs)
            self.corr = rhs - self._gram_times(self.phi_a)
        else:
            self.phi_a = np.zeros(0)
            self.corr = rhs.copy()

    def refactorize(self):
        self.ginv = GramInverse.from_gram(self._active_gram())
        self._recompute()

    def _fold(self, y_new, z):
        """Add a full observation to the sufficient statistics."""
        self.gram += np.outer(z, z)
        self.zty += y_new * z
        self.n_obs += 1
        if self.active:
            self._ga[...] += np.outer(z, z[self.active])

    def _apply_event(self, kind, j, sign):
        if self.ginv.needs_refresh():
            self.ginv = GramInverse.from_gram(self._active_gram())
        if kind is EventKind.LEAVES:
            pos = self.active.index(j)
            try:
                ginv = ginv_remove_feature(self.ginv, pos)
            except SingularUpdate:
                ginv = None
            self._drop_column(pos)
            del self.active[pos]
            self.signs = np.delete(self.signs, pos)
            self.ginv = ginv if ginv is not None else GramInverse.from_gram(self._active_gram())
        else:
            cross = self._ga[j].copy()
            self_norm = self.gram[j, j]
            if self._aug is not None:
                mu, z, _ = self._aug
                cross = cross + (mu * z[j]) * z[self.active]
                self_norm = self_norm + mu * z[j] ** 2
            self.ginv = ginv_add_feature(self.ginv, cross, self_norm)
            self._push_column(j)
            self.active.append(int(j))
            self.signs = np.append(self.signs, sign)
        self.n_events += 1


def _next_event(phi, signs, dphi, corr, dcorr, active, bound0, dbound, t_max, tie_tol,
                last=None, excluded=()):
    """Smallest admissible step to the next transition point.

    Along the segment ``phi + t*dphi`` (active coefficients) and
    ``corr + t*dcorr`` (all correlations) with bound ``bound0 + t*dbound``.
    Returns ``(t, kind, feature, sign)`` or ``None`` if nothing happens
    before ``t_max``. ``sign`` is the sign an entering feature takes. Ties
    within ``tie_tol`` go to leaving features, then to the lower index.
    """
    inf = np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        if len(active):
            # judged against the sign vector, not phi: a just-entered
            # coefficient is zero up to roundoff and may carry either sign
            t_leave = np.where(signs * dphi < 0, -phi / dphi, inf)
            np.maximum(t_leave, 0.0, out=t_leave)
        else:
            t_leave = np.zeros(0)
        up_den = dcorr - dbound
        t_up = np.where(up_den > 0, (bound0 - corr) / up_den, inf)
        lo_den = dcorr + dbound
        t_lo = np.where(lo_den < 0, (-bound0 - corr) / lo_den, inf)
    t_enter = np.minimum(t_up, t_lo)
    np.maximum(t_enter, 0.0, out=t_enter)
    if len(active):
        t_enter[active] = inf
    for j in excluded:
        t_enter[j] = inf
    if last is not None:
        if t_enter[last] <= tie_tol:
            t_enter[last] = inf
        if len(active):
            hit = np.flatnonzero(np.asarray(active) == last)
            if hit.size and t_leave[hit[0]] <= tie_tol:
                t_leave[hit[0]] = inf
    tmin = min(t_leave.min() if t_leave.size else inf, t_enter.min())
    if not tmin <= t_max + tie_tol:
        return None
    t = min(tmin, t_max)
    if t_leave.size:
        leaving = np.flatnonzero(t_leave <= tmin + tie_tol)
        if leaving.size:
            return t, EventKind.LEAVES, min(active[i] for i in leaving), 0.0
    j = int(np.flatnonzero(t_enter <= tmin + tie_tol)[0])
    sign = 1.0 if t_up[j] <= t_lo[j] else -1.0
    return t, EventKind.ENTERS, j, sign


def _record(model, kind, j, location, cont):
    if model.record:
        jump = max((abs(cont.get(a, 0.0) - v) for a, v in zip(model.active, model.phi_a)),
                   default=0.0)
        model.history.append(TransitionEvent(kind, j, location, jump))


def _lambda_path_inplace(model: ActiveModel, lam_to: float):
    if lam_to <= 0:
        raise ValueError("lam_to must be positive")
    cap = 10 * model.n_features
    n_events = 0
    last = None
    excluded: set[int] = set()
    while model.lam != lam_to:
        direction = 1.0 if lam_to > model.lam else -1.0
        t_max = abs(lam_to - model.lam)
        if model.active:
            d = model.ginv.inv @ model.signs
            dphi = -direction * d
            dcorr = direction * model._gram_times(d)
        else:
            dphi = np.zeros(0)
            dcorr = np.zeros(model.n_features)
        tie = TIE_TOL * max(model.lam, lam_to)
        ev = _next_event(model.phi_a, model.signs, dphi, model.corr, dcorr, model.active,
                         model.lam, direction, t_max, tie, last, excluded)
        if ev is None:
            model.lam = lam_to
            model._recompute()
            break
        t, kind, j, sign = ev
        cont = dict(zip(model.active, model.phi_a + t * dphi)) if model.record else None
        # an event at the endpoint is applied so the final state is clean
        model.lam = lam_to if t >= t_max else model.lam + direction * t
        try:
            model._apply_event(kind, j, sign)
        except DegenerateFeature:
            excluded.add(j)
            model._recompute()
            continue
        model._recompute()
        excluded.clear()
        n_events += 1
        _record(model, kind, j, model.lam, cont)
        if n_events > cap:
            raise PathStalled(f"more than {cap} events on the lambda-path")
        last = j
    return model


def _gamma_segment(model: ActiveModel, last=None, excluded=()):
    """Next event on the current gamma-path segment.

    Returns ``(event, z_A, q, tau_max, dphi)``.
    """
    mu, z, y = model._aug
    A = model.active
    if A:
        za = z[A]
        w = model.ginv.inv @ za
        q = float(za @ w)
        e = y - float(za @ model.phi_a)
        u = z - model._gram_times(w)
    else:
        za = np.zeros(0)
        w = np.zeros(0)
        q = 0.0
        e = y
        u = z
    tau_max = (1.0 - mu) / (1.0 + (1.0 - mu) * q)
    dphi = e * w
    ev = _next_event(model.phi_a, model.signs, dphi, model.corr, e * u, A,
                     model.lam, 0.0, tau_max, TIE_TOL * max(tau_max, 1e-300), last, excluded)
    return ev, za, q, tau_max, dphi


def gamma_transition(model: ActiveModel, gamma_now: float, obs, lam=None):
    """Next point in ``(gamma_now, 1]`` where the active set changes.

    ``model.ginv`` must already describe ``G_A + gamma_now**2 * z_A z_A^T``.
    Returns a :class:`TransitionEvent` located in gamma units, or ``None``.
    """
    if not 0.0 <= gamma_now <= 1.0:
        raise ValueError("gamma_now must lie in [0, 1]")
    y_new, z_new = obs
    m = model.copy()
    if lam is not None:
        m.lam = float(lam)
    m._aug = (gamma_now ** 2, np.asarray(z_new, dtype=float), float(y_new))
    m._recompute()
    ev, _, q, _, _ = _gamma_segment(m)
    if ev is None:
        return None
    tau, kind, j, _ = ev
    mu = gamma_now ** 2 + tau / (1.0 - tau * q)
    return TransitionEvent(kind, j, math.sqrt(min(mu, 1.0)))


def _gamma_path_kernel(model: ActiveModel, y_new: float, z) -> bool:
    """Compiled gamma-path. False, with the model untouched, on any guard."""
    m = model.n_features
    k = len(model.active)
    act = np.empty(m, dtype=np.int64)
    act[:k] = model.active
    signs = np.empty(m)
    signs[:k] = model.signs
    H = np.empty((m, m))
    H[:k, :k] = model.ginv.inv
    gram, zty = model.gram.copy(), model.zty.copy()
    status, k, updates, n_events = _kernels.gamma_path(
        gram, zty, act, k, signs, H, z, y_new, model.lam, model.ginv.updates,
        REFRESH_EVERY, GUARD_TOL, TIE_TOL, 10 * m)
    if status != _kernels.OK:
        return False
    model.gram, model.zty = gram, zty
    model.n_obs += 1
    model.active = act[:k].tolist()
    model.signs = signs[:k].copy()
    model.ginv = GramInverse(H[:k, :k].copy(), int(updates))
    model.n_events += int(n_events)
    model._rebuild_columns()
    model._recompute()
    return True


def _gamma_path_inplace(model: ActiveModel, y_new: float, z_new):
    z = np.asarray(z_new, dtype=float)
    y_new = float(y_new)
    if USE_KERNEL and not model.record and _gamma_path_kernel(model, y_new, z):
        return model
    model._aug = (0.0, z, y_new)
    model._recompute()
    cap = 10 * model.n_features
    n_events = 0
    last = None
    excluded: set[int] = set()
    while True:
        ev, za, q, tau_max, dphi = _gamma_segment(model, last, excluded)
        mu = model._aug[0]
        if ev is None:
            if model.active:
                model.ginv = sm_observation_update(model.ginv, za, 1.0 - mu)
            break
        tau, kind, j, sign = ev
        cont = dict(zip(model.active, model.phi_a + tau * dphi)) if model.record else None
        delta = 1.0 - mu if tau >= tau_max else tau / (1.0 - tau * q)
        if model.active:
            model.ginv = sm_observation_update(model.ginv, za, delta)
        model._aug = (min(mu + delta, 1.0), z, y_new)
        try:
            model._apply_event(kind, j, sign)
        except DegenerateFeature:
            excluded.add(j)
            model._recompute()
            continue
        model._recompute()
        excluded.clear()
        n_events += 1
        _record(model, kind, j, math.sqrt(model._aug[0]), cont)
        if n_events > cap:
            raise PathStalled(f"more than {cap} events on the gamma-path")
        last = j
        if model._aug[0] >= 1.0:
            break
    model._aug = None
    model._fold(y_new, z)
    model._recompute()
    return model


def _consistent(model: ActiveModel) -> bool:
    if model.active and np.any(model.phi_a * model.signs <= 0):
        return False
    return model.kkt_residual() <= VERIFY_TOL * model.scale()


def _fallback_cd(model: ActiveModel):
    """Re-solve by coordinate descent and rebuild the active-set state."""
    phi, _, _, _ = lasso_cd_gram(model.gram, model.zty, model.lam, init=model.coef,
                                 tol=1e-13, max_sweeps=200_000)
    active = [int(j) for j in np.flatnonzero(phi)]
    model.active = active
    model.signs = np.sign(phi[active])
    model._aug = None
    model._rebuild_columns()
    try:
        model.ginv = GramInverse.from_gram(model._active_gram())
        model._recompute()
        if active and np.any(model.phi_a * model.signs <= 0):
            raise SingularUpdate("closed form disagrees with coordinate descent")
    except SingularUpdate:
        # keep the CD iterate; ginv falls back to a pseudo-inverse
        model.ginv = GramInverse(np.linalg.pinv(model._active_gram()))
        model.phi_a = phi[active]
        model.corr = model.zty - model.gram[:, active] @ model.phi_a
    model.n_fallbacks += 1
    return model


def _ensure_consistent(model: ActiveModel):
    if _consistent(model):
        return model
    try:
        model.refactorize()
    except SingularUpdate:
        return _fallback_cd(model)
    if _consistent(model):
        return model
    return _fallback_cd(model)


def lambda_path(model: ActiveModel, lambda_to: float, *, inplace=False,
                fallback=False) -> ActiveModel:
    """Move the solution to a new penalty on the same data.

    Raises
    ------
    PathStalled
        When the event count exceeds ``10 * m`` and ``fallback`` is off.
    """
    m = model if inplace else model.copy()
    try:
        _lambda_path_inplace(m, float(lambda_to))
    except NumericalError:
        if not fallback:
            raise
        m.lam = float(lambda_to)
        m._aug = None
        _fallback_cd(m)
    return m


def reclasso_update(model: ActiveModel, obs, lambda_new: float, *, inplace=False,
                    fallback=True) -> ActiveModel:
    """Add one observation and move to a new penalty.

    First the lambda-path on the old data, then the gamma-path that folds
    ``obs = (y_new, z_new)`` in. The result is checked against the KKT
    conditions; on failure the Gram inverse is refactorized and, if that
    does not help, the problem is re-solved by coordinate descent. With
    ``fallback=False`` numerical failures propagate instead.
    """
    if lambda_new <= 0:
        raise ValueError("lambda_new must be positive")
    y_new, z_new = obs
    z = np.asarray(z_new, dtype=float)
    m = model if inplace else model.copy()
    try:
        _lambda_path_inplace(m, float(lambda_new))
    except NumericalError:
        if not fallback:
            raise
        m.lam = float(lambda_new)
        m._aug = None
        _fallback_cd(m)
    n_before = m.n_obs
    try:
        _gamma_path_inplace(m, float(y_new), z)
    except NumericalError:
        if not fallback:
            raise
        m._aug = None
        if m.n_obs == n_before:
            m._fold(float(y_new), z)
        _fallback_cd(m)
    if fallback:
        _ensure_consistent(m)
    return m
