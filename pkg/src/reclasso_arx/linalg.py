"""Inverse-Gram maintenance for a changing active set.

The homotopy engine never inverts the active Gram matrix from scratch on
the hot path. It keeps ``inv = (Z_A^T Z_A)^{-1}`` and patches it with a
Sherman-Morrison step when an observation (or a fraction of one) is added,
and with bordered-inverse growth/deletion when a single column enters or
leaves the active set.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFeature, SingularUpdate

GUARD_TOL = 1e-12
REFRESH_EVERY = 500


@dataclass
class GramInverse:
    """Inverse of the active-set Gram matrix.

    ``updates`` counts rank-one modifications since the last direct
    factorization; owners use it to schedule periodic refreshes.
    """

    inv: np.ndarray
    updates: int = 0

    @property
    def dim(self) -> int:
        return self.inv.shape[0]

    @classmethod
    def empty(cls) -> "GramInverse":
        return cls(np.zeros((0, 0)))

    @classmethod
    def from_gram(cls, gram: np.ndarray) -> "GramInverse":
        """Direct factorization, used for initialization and refreshes."""
        gram = np.asarray(gram, dtype=float)
        if gram.shape[0] == 0:
            return cls.empty()
        try:
            chol = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError as exc:
            raise SingularUpdate("Gram matrix is not positive definite") from exc
        if np.min(np.abs(np.diag(chol))) ** 2 <= GUARD_TOL * max(1.0, np.max(np.diag(gram))):
            raise SingularUpdate("Gram matrix is numerically singular")
        eye = np.eye(gram.shape[0])
        linv = np.linalg.solve(chol, eye)
        inv = linv.T @ linv
        return cls(_symmetrize(inv))

    def needs_refresh(self) -> bool:
        return self.updates >= REFRESH_EVERY


def _symmetrize(a):
    return 0.5 * (a + a.T)


def sm_observation_update(g: GramInverse, z, weight: float) -> GramInverse:
    """Inverse of ``G + weight * z z^T`` given ``g.inv = G^{-1}``.

    ``weight`` may be negative (a downdate).
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (g.dim,):
        raise ValueError(f"z has shape {z.shape}, expected ({g.dim},)")
    if g.dim == 0:
        return GramInverse(g.inv.copy(), g.updates)
    hz = g.inv @ z
    denom = 1.0 + weight * float(z @ hz)
    if abs(denom) <= GUARD_TOL:
        raise SingularUpdate(f"Sherman-Morrison denominator {denom:.3e}")
    # exactly symmetric given a symmetric input, so no re-symmetrization
    inv = g.inv - (weight / denom) * (hz[:, None] * hz[None, :])
    return GramInverse(inv, g.updates + 1)


def ginv_add_feature(g: GramInverse, cross, self_norm: float) -> GramInverse:
    """Grow the inverse by one column appended last.

    Parameters
    ----------
    g : GramInverse
        Current inverse for the active columns.
    cross : array_like, shape (dim,)
        Inner products of the entering column with the active columns.
    self_norm : float
        Squared norm of the entering column.
    """
    cross = np.asarray(cross, dtype=float)
    if cross.shape != (g.dim,):
        raise ValueError(f"cross has shape {cross.shape}, expected ({g.dim},)")
    u = g.inv @ cross
    schur = float(self_norm - cross @ u)
    # relative to the column norm so the guard is scale-free for large series
    if schur <= GUARD_TOL * max(1.0, abs(self_norm)):
        raise DegenerateFeature(f"Schur complement {schur:.3e} below guard")
    d = g.dim
    out = np.empty((d + 1, d + 1))
    out[:d, :d] = g.inv + (u[:, None] * u[None, :]) / schur
    out[:d, d] = -u / schur
    out[d, :d] = -u / schur
    out[d, d] = 1.0 / schur
    return GramInverse(out, g.updates + 1)


def ginv_remove_feature(g: GramInverse, idx: int) -> GramInverse:
    """Drop row/column ``idx`` from the underlying Gram, using ``g.inv`` only."""
    if not 0 <= idx < g.dim:
        raise IndexError(f"idx {idx} out of range for dim {g.dim}")
    d = g.inv[idx, idx]
    if d <= GUARD_TOL:
        raise SingularUpdate(f"diagonal entry {d:.3e} below guard")
    col = np.delete(g.inv[:, idx], idx)
    sub = np.delete(np.delete(g.inv, idx, axis=0), idx, axis=1)
    out = sub - (col[:, None] * col[None, :]) / d
    return GramInverse(out, g.updates + 1)
