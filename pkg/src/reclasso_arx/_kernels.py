"""Compiled gamma-path for the homotopy engine.

Mirrors ``homotopy._gamma_path_inplace`` event for event on preallocated
buffers. Guards that the Python path turns into exceptions come back as
a status code instead; the caller then reruns the Python path, which owns
all recovery logic. Nothing the caller owns is modified unless the path
finishes cleanly.
"""
from __future__ import annotations

import numba
import numpy as np

OK = 0
STALLED = 1
SINGULAR = 2
# events between closed-form recomputations of coefficients and correlations
RESYNC = 16


@numba.njit(cache=True)
def _refactor(G, act, k, z, mu, H, guard):
    """Direct inverse of ``G_AA + mu z_A z_A^T`` into ``H``; False if singular."""
    if k == 0:
        return True
    block = np.empty((k, k))
    big = 1.0
    for a in range(k):
        for c in range(k):
            block[a, c] = G[act[a], act[c]] + mu * z[act[a]] * z[act[c]]
        big = max(big, block[a, a])
    # Cholesky by hand so a failure is a flag, not an exception
    L = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1):
            s = block[i, j]
            for p in range(j):
                s -= L[i, p] * L[j, p]
            if i == j:
                if s <= guard * big:
                    return False
                L[i, i] = np.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    # H = L^{-T} L^{-1}
    Linv = np.zeros((k, k))
    for i in range(k):
        Linv[i, i] = 1.0 / L[i, i]
        for j in range(i):
            s = 0.0
            for p in range(j, i):
                s -= L[i, p] * Linv[p, j]
            Linv[i, j] = s / L[i, i]
    for i in range(k):
        for j in range(i + 1):
            s = 0.0
            for p in range(i, k):
                s += Linv[p, i] * Linv[p, j]
            H[i, j] = s
            H[j, i] = s
    return True


@numba.njit(cache=True)
def _state(G, b, act, k, signs, H, z, y, mu, lam, phi, corr):
    m = b.shape[0]
    for a in range(k):
        s = 0.0
        for c in range(k):
            s += H[a, c] * (b[act[c]] + mu * y * z[act[c]] - lam * signs[c])
        phi[a] = s
    zphi = 0.0
    for a in range(k):
        zphi += z[act[a]] * phi[a]
    for i in range(m):
        s = b[i] + mu * y * z[i] - mu * zphi * z[i]
        for a in range(k):
            s -= G[i, act[a]] * phi[a]
        corr[i] = s


@numba.njit(cache=True)
def gamma_path(G, b, act, k, signs, H, z, y, lam, updates, refresh_every, guard, tie_rel,
               cap):
    """Fold the row ``(y, z)`` into a lasso solution at fixed ``lam``.

    ``act``/``signs`` hold the active set in their first ``k`` slots and
    ``H`` its Gram inverse in the leading ``k x k`` block; all three are
    updated in place. ``G`` and ``b`` receive the row only on success.

    Coefficients and correlations are advanced along each affine segment
    (both are continuous across events) and recomputed from the closed
    form every ``RESYNC`` events to bound drift.

    Returns
    -------
    status, k, updates, n_events
    """
    m = b.shape[0]
    inf = np.inf
    phi = np.empty(m)
    corr = np.empty(m)
    w = np.empty(m)
    u = np.empty(m)
    t_enter = np.empty(m)
    t_up = np.empty(m)
    t_lo = np.empty(m)
    t_leave = np.empty(m)
    is_active = np.zeros(m, dtype=np.bool_)
    excluded = np.zeros(m, dtype=np.bool_)
    # rows of G for the active features, contiguous for the matrix-vector products
    GA = np.empty((m, m))
    for a in range(k):
        is_active[act[a]] = True
        GA[a, :] = G[act[a], :]
    mu = 0.0
    last = -1
    n_events = 0
    _state(G, b, act, k, signs, H, z, y, mu, lam, phi, corr)
    while True:
        q = 0.0
        zphi = 0.0
        for a in range(k):
            s = 0.0
            for c in range(k):
                s += H[a, c] * z[act[c]]
            w[a] = s
            q += z[act[a]] * s
            zphi += z[act[a]] * phi[a]
        e = y - zphi
        f0 = 1.0 - mu * q
        for i in range(m):
            u[i] = z[i] * f0
        for a in range(k):
            wa = w[a]
            for i in range(m):
                u[i] -= GA[a, i] * wa
        tau_max = (1.0 - mu) / (1.0 + (1.0 - mu) * q)
        tie = tie_rel * max(tau_max, 1e-300)

        # next transition point
        tmin = inf
        for a in range(k):
            d = e * w[a]
            t_leave[a] = inf
            if signs[a] * d < 0:
                t_leave[a] = max(-phi[a] / d, 0.0)
            if act[a] == last and t_leave[a] <= tie:
                t_leave[a] = inf
            tmin = min(tmin, t_leave[a])
        for i in range(m):
            dc = e * u[i]
            t_up[i] = (lam - corr[i]) / dc if dc > 0 else inf
            t_lo[i] = (-lam - corr[i]) / dc if dc < 0 else inf
            t = max(min(t_up[i], t_lo[i]), 0.0)
            if is_active[i] or excluded[i] or (i == last and t <= tie):
                t = inf
            t_enter[i] = t
            tmin = min(tmin, t)

        if not tmin <= tau_max + tie:
            # no event: finish the segment
            if k:
                denom = 1.0 + (1.0 - mu) * q
                if abs(denom) <= guard:
                    return SINGULAR, k, updates, n_events
                f = (1.0 - mu) / denom
                for a in range(k):
                    for c in range(k):
                        H[a, c] -= f * w[a] * w[c]
                updates += 1
            break
        tau = min(tmin, tau_max)
        kind_leave = False
        j = -1
        pos = -1
        for a in range(k):
            if t_leave[a] <= tmin + tie and (j < 0 or act[a] < j):
                j = act[a]
                pos = a
                kind_leave = True
        if not kind_leave:
            for i in range(m):
                if t_enter[i] <= tmin + tie:
                    j = i
                    break
        sign = 1.0 if t_up[j] <= t_lo[j] else -1.0

        # move to the event along the segment
        for a in range(k):
            phi[a] += tau * e * w[a]
        for i in range(m):
            corr[i] += tau * e * u[i]

        delta = 1.0 - mu if tau >= tau_max else tau / (1.0 - tau * q)
        if k:
            denom = 1.0 + delta * q
            if abs(denom) <= guard:
                return SINGULAR, k, updates, n_events
            f = delta / denom
            for a in range(k):
                fa = f * w[a]
                for c in range(k):
                    H[a, c] -= fa * w[c]
            updates += 1
        mu = min(mu + delta, 1.0)

        resync = False
        if updates >= refresh_every:
            if not _refactor(G, act, k, z, mu, H, guard):
                return SINGULAR, k, updates, n_events
            updates = 0
            resync = True

        if kind_leave:
            d = H[pos, pos]
            for a in range(pos, k - 1):
                act[a] = act[a + 1]
                signs[a] = signs[a + 1]
                phi[a] = phi[a + 1]
                GA[a, :] = GA[a + 1, :]
            is_active[j] = False
            k -= 1
            if d <= guard:
                if not _refactor(G, act, k, z, mu, H, guard):
                    return SINGULAR, k, updates, n_events
                updates = 0
                resync = True
            else:
                col = np.empty(k)
                for a in range(k):
                    col[a] = H[a if a < pos else a + 1, pos]
                for a in range(k):
                    ra = a if a < pos else a + 1
                    for c in range(k):
                        H[a, c] = H[ra, c if c < pos else c + 1] - col[a] * col[c] / d
                updates += 1
        else:
            zj = z[j]
            self_norm = G[j, j] + mu * zj * zj
            for a in range(k):
                u[a] = G[j, act[a]] + mu * zj * z[act[a]]
            schur = self_norm
            for a in range(k):
                s = 0.0
                for c in range(k):
                    s += H[a, c] * u[c]
                w[a] = s
                schur -= u[a] * s
            if schur <= guard * max(1.0, abs(self_norm)):
                excluded[j] = True
                _state(G, b, act, k, signs, H, z, y, mu, lam, phi, corr)
                continue
            for a in range(k):
                wa = w[a] / schur
                for c in range(k):
                    H[a, c] += wa * w[c]
                H[a, k] = -wa
                H[k, a] = -wa
            H[k, k] = 1.0 / schur
            act[k] = j
            signs[k] = sign
            phi[k] = 0.0
            GA[k, :] = G[j, :]
            is_active[j] = True
            k += 1
            updates += 1
        excluded[:] = False
        n_events += 1
        if n_events > cap:
            return STALLED, k, updates, n_events
        last = j
        if resync or n_events % RESYNC == 0:
            _state(G, b, act, k, signs, H, z, y, mu, lam, phi, corr)
        if mu >= 1.0:
            break

    for i in range(m):
        b[i] += y * z[i]
        for c in range(m):
            G[i, c] += z[i] * z[c]
    return OK, k, updates, n_events
