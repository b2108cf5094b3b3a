"""Reference lasso machinery.

Everything here solves

    min_phi  0.5 * ||y - Z phi||^2 + lam * ||phi||_1

with no intercept and no internal standardization. Coordinate descent is
the slow-but-trusted oracle the homotopy engine is checked against.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DimensionMismatch, NoConvergence

DEFAULT_TOL = 1e-8
DEFAULT_MAX_SWEEPS = 100_000


@dataclass
class LassoProblem:
    Z: np.ndarray
    y: np.ndarray
    lam: float

    def __post_init__(self):
        self.Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        n, m = self.Z.shape
        if n < 1 or m < 1:
            raise DimensionMismatch("design must have at least one row and column")
        if self.y.shape[0] != n:
            raise DimensionMismatch(f"y has {self.y.shape[0]} entries, Z has {n} rows")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if not (np.all(np.isfinite(self.Z)) and np.all(np.isfinite(self.y))):
            raise ValueError("non-finite entries in problem data")

    @property
    def n_features(self) -> int:
        return self.Z.shape[1]

    def objective(self, phi) -> float:
        r = self.y - self.Z @ phi
        return 0.5 * float(r @ r) + self.lam * float(np.abs(phi).sum())


@dataclass
class LassoSolution:
    phi: np.ndarray
    sweeps: int = 0
    history: list = field(default_factory=list)

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.phi)

    @property
    def signs(self) -> np.ndarray:
        return np.sign(self.phi)


@numba.njit(cache=True)
def _cd_kernel(gram, zty, lam, phi, tol, max_sweeps, record):
    """Cyclic coordinate descent on the covariance form.

    ``grad`` holds Z^T (y - Z phi) and is kept exact under each coordinate
    move, so a sweep costs O(m^2) regardless of n.
    """
    m = gram.shape[0]
    grad = zty - gram @ phi
    hist = np.empty(max_sweeps if record else 0)
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        max_delta = 0.0
        for j in range(m):
            gjj = gram[j, j]
            if gjj <= 0.0:
                continue
            old = phi[j]
            rho = grad[j] + gjj * old
            if rho > lam:
                new = (rho - lam) / gjj
            elif rho < -lam:
                new = (rho + lam) / gjj
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                phi[j] = new
                for i in range(m):
                    grad[i] -= gram[i, j] * delta
                ad = abs(delta)
                if ad > max_delta:
                    max_delta = ad
        if record:
            # objective up to the constant 0.5 * y^T y
            quad = 0.0
            for i in range(m):
                quad += phi[i] * (zty[i] + grad[i])
            l1 = 0.0
            for i in range(m):
                l1 += abs(phi[i])
            hist[sweeps] = -0.5 * quad + lam * l1
        sweeps += 1
        if max_delta < tol:
            converged = True
            break
    return phi, sweeps, converged, hist[:sweeps]


def lasso_cd_gram(gram, zty, lam, init=None, tol=DEFAULT_TOL,
                  max_sweeps=DEFAULT_MAX_SWEEPS, record=False):
    """Coordinate descent given sufficient statistics ``Z^T Z`` and ``Z^T y``.

    Returns ``(phi, sweeps, converged, history)``.
    """
    gram = np.ascontiguousarray(gram, dtype=float)
    zty = np.ascontiguousarray(zty, dtype=float)
    m = zty.shape[0]
    phi = np.zeros(m) if init is None else np.array(init, dtype=float)
    if phi.shape != (m,):
        raise DimensionMismatch(f"init has shape {phi.shape}, expected ({m},)")
    return _cd_kernel(gram, zty, float(lam), phi, float(tol), int(max_sweeps), bool(record))


def coordinate_descent(p: LassoProblem, init=None, tol: float = DEFAULT_TOL,
                       max_sweeps: int = DEFAULT_MAX_SWEEPS,
                       record: bool = False) -> LassoSolution:
    """Solve a lasso problem by cyclic coordinate descent.

    Convergence is declared when no coefficient moves by ``tol`` or more
    during a full sweep. With ``record=True`` the objective after every
    sweep is kept in ``LassoSolution.history``.

    Raises
    ------
    NoConvergence
        If ``max_sweeps`` is reached. The exception carries the last
        iterate and its KKT residual.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    gram = p.Z.T @ p.Z
    zty = p.Z.T @ p.y
    phi, sweeps, converged, hist = lasso_cd_gram(gram, zty, p.lam, init, tol,
                                                 max_sweeps, record)
    if not converged:
        corr = zty - gram @ phi
        raise NoConvergence(
            f"coordinate descent did not converge in {max_sweeps} sweeps",
            phi=phi, kkt_residual=_kkt_residual(corr, phi, p.lam))
    hist = [h + 0.5 * float(p.y @ p.y) for h in hist]
    return LassoSolution(phi=phi, sweeps=int(sweeps), history=hist)


def active_set_solution(p: LassoProblem, active, signs, g) -> np.ndarray:
    """Closed-form coefficients on a fixed active set and sign pattern.

    ``signs`` may be given either restricted to ``active`` or as a full
    length-m vector. No sign-consistency check is made.
    """
    active = np.asarray(active, dtype=int)
    signs = np.asarray(signs, dtype=float)
    if signs.shape[0] == p.n_features and active.shape[0] != p.n_features:
        signs = signs[active]
    if g.dim != active.shape[0] or signs.shape[0] != active.shape[0]:
        raise DimensionMismatch(
            f"active set of size {active.shape[0]} with Gram inverse of dim {g.dim}")
    za = p.Z[:, active]
    return g.inv @ (za.T @ p.y - p.lam * signs)


@dataclass(frozen=True)
class KKTViolation:
    index: int
    correlation: float
    bound: float


def kkt_check(p: LassoProblem, s, tol: float) -> list[KKTViolation]:
    """List coordinates where the lasso optimality conditions fail.

    ``s`` is a :class:`LassoSolution` or a bare coefficient vector. For
    active coordinates the residual correlation must equal ``lam * sign``;
    for the rest its magnitude must not exceed ``lam``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    phi = s.phi if isinstance(s, LassoSolution) else np.asarray(s, dtype=float)
    corr = p.Z.T @ (p.y - p.Z @ phi)
    return kkt_violations(corr, phi, p.lam, tol)


def kkt_violations(corr, phi, lam, tol):
    out = []
    for j in range(phi.shape[0]):
        c = float(corr[j])
        if phi[j] != 0.0:
            target = lam * np.sign(phi[j])
            if abs(c - target) > tol:
                out.append(KKTViolation(j, c, float(target)))
        elif abs(c) > lam + tol:
            out.append(KKTViolation(j, c, float(lam)))
    return out


def _kkt_residual(corr, phi, lam):
    active = phi != 0
    res = np.zeros_like(corr)
    res[active] = np.abs(corr[active] - lam * np.sign(phi[active]))
    res[~active] = np.maximum(np.abs(corr[~active]) - lam, 0.0)
    return float(res.max()) if res.size else 0.0


def lambda_max(Z, y) -> float:
    """Smallest penalty at which the all-zero vector is optimal."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.size == 0:
        raise DimensionMismatch("empty design")
    return float(np.max(np.abs(Z.T @ np.asarray(y, dtype=float))))
