"""Hot loops for the Cox partial likelihood and the coordinate-descent sweep.

Every kernel has two implementations with identical signatures:

* a numba ``@njit`` version (sequential loops with running rescaling), and
* a pure-numpy version (``np.logaddexp.accumulate`` for the suffix sums and a
  Python loop over coordinates for the sweep).

The sweep minimizes ``g'd + d'Hd/2 + penalty`` over the coefficients by
cyclic soft-thresholding, keeping ``v = g + H d`` current after each update.

The numba path is used when numba imports and ``COXNET_DISABLE_NUMBA`` is not
set to a truthy value.  Both paths are always importable as ``numba_impl`` and
``numpy_impl`` so tests and ``bench/`` can compare them directly.

All kernels work on data already sorted by ascending time.  ``gstart[k]`` and
``gend[k]`` delimit the tie group containing sorted position ``k``, so the
Breslow risk set of an event at ``k`` is the slice ``gstart[k]:``.
"""

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_FALSY = {"", "0", "false", "no", "off"}


def _numba_disabled_by_env():
    return os.environ.get("COXNET_DISABLE_NUMBA", "0").strip().lower() not in _FALSY


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _np_suffix_logsumexp(eta):
    return np.logaddexp.accumulate(eta[::-1])[::-1].copy()


def _np_cox_loss(eta, status, gstart):
    L = _np_suffix_logsumexp(eta)
    ev = np.flatnonzero(status)
    return float(np.sum(L[gstart[ev]] - eta[ev]))


# below this spread of eta, exp(eta - max) cannot underflow out of the normal range
_DIRECT_SPAN = 600.0


def _np_suffix_means(V, eta, L):
    """Risk-set weighted means sum_{j>=k} V_j e^{eta_j} / sum_{j>=k} e^{eta_j}.

    Reverse cumulative sums of max-shifted weights when the spread of ``eta``
    allows it; otherwise log-domain accumulation with V split by sign.
    """
    if eta.size and eta.max() - eta.min() < _DIRECT_SPAN:
        w = np.exp(eta - eta.max())
        s0 = np.cumsum(w[::-1])[::-1]
        s1 = np.cumsum((V * w[:, None])[::-1], axis=0)[::-1]
        return s1 / s0[:, None]
    with np.errstate(divide="ignore"):
        lpos = np.log(np.where(V > 0, V, 0.0))
        lneg = np.log(np.where(V < 0, -V, 0.0))
    e = eta[:, None]
    apos = np.logaddexp.accumulate((e + lpos)[::-1], axis=0)[::-1]
    aneg = np.logaddexp.accumulate((e + lneg)[::-1], axis=0)[::-1]
    Lc = L[:, None]
    return np.exp(apos - Lc) - np.exp(aneg - Lc)


def _np_risk_moments(X, eta, status, gstart, gend, want_info):
    n, p = X.shape
    L = _np_suffix_logsumexp(eta)
    ev = np.flatnonzero(status)
    mean = _np_suffix_means(X, eta, L)[gstart[ev]]
    resid = X[ev] - mean
    U = resid.sum(axis=0)
    info = np.zeros((p, p))
    if want_info and ev.size:
        outer = (X[:, :, None] * X[:, None, :]).reshape(n, p * p)
        s2 = _np_suffix_means(outer, eta, L)[gstart[ev]].reshape(-1, p, p)
        cov = s2 - mean[:, :, None] * mean[:, None, :]
        info = cov.sum(axis=0)
    return U, info, resid


def _np_cd_sweeps(H, v, beta, l1w, l2, order, max_sweeps, tol):
    sweeps = 0
    for _ in range(max_sweeps):
        dmax = 0.0
        for k in order:
            hkk = H[k, k]
            denom = hkk + 2.0 * l2
            if denom <= 0.0:
                continue
            z = hkk * beta[k] - v[k]
            t = l1w[k]
            if z > t:
                new = (z - t) / denom
            elif z < -t:
                new = (z + t) / denom
            else:
                new = 0.0
            d = new - beta[k]
            if d != 0.0:
                v += d * H[:, k]
                beta[k] = new
                if abs(d) > dmax:
                    dmax = abs(d)
        sweeps += 1
        if dmax < tol:
            break
    return sweeps


numpy_impl = SimpleNamespace(
    name="numpy",
    suffix_logsumexp=_np_suffix_logsumexp,
    cox_loss=_np_cox_loss,
    risk_moments=_np_risk_moments,
    cd_sweeps=_np_cd_sweeps,
)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _nb_suffix_logsumexp(eta):
        n = eta.shape[0]
        out = np.empty(n)
        m = -np.inf
        s = 0.0
        for k in range(n - 1, -1, -1):
            e = eta[k]
            if e > m:
                s = s * np.exp(m - e) + 1.0
                m = e
            else:
                s += np.exp(e - m)
            out[k] = m + np.log(s)
        return out

    @njit(cache=True, nogil=True)
    def _nb_cox_loss(eta, status, gstart):
        L = _nb_suffix_logsumexp(eta)
        total = 0.0
        for i in range(eta.shape[0]):
            if status[i] != 0:
                total += L[gstart[i]] - eta[i]
        return total

    @njit(cache=True, nogil=True)
    def _nb_risk_moments(X, eta, status, gstart, gend, want_info):
        n, p = X.shape
        rank = np.empty(n, dtype=np.int64)
        n_ev = 0
        for i in range(n):
            rank[i] = n_ev
            if status[i] != 0:
                n_ev += 1
        U = np.zeros(p)
        info = np.zeros((p, p))
        resid = np.zeros((n_ev, p))
        m = -np.inf
        s0 = 0.0
        s1 = np.zeros(p)
        s2 = np.zeros((p, p))
        mean = np.empty(p)
        k = n - 1
        while k >= 0:
            g0 = gstart[k]
            for j in range(k, g0 - 1, -1):
                e = eta[j]
                if e > m:
                    f = np.exp(m - e)
                    s0 *= f
                    for a in range(p):
                        s1[a] *= f
                    if want_info:
                        for a in range(p):
                            for b in range(p):
                                s2[a, b] *= f
                    m = e
                    wj = 1.0
                else:
                    wj = np.exp(e - m)
                s0 += wj
                for a in range(p):
                    s1[a] += wj * X[j, a]
                if want_info:
                    for a in range(p):
                        xa = wj * X[j, a]
                        for b in range(p):
                            s2[a, b] += xa * X[j, b]
            has_event = False
            for i in range(g0, k + 1):
                if status[i] != 0:
                    has_event = True
            if has_event:
                for a in range(p):
                    mean[a] = s1[a] / s0
                for i in range(g0, k + 1):
                    if status[i] != 0:
                        r = rank[i]
                        for a in range(p):
                            d = X[i, a] - mean[a]
                            resid[r, a] = d
                            U[a] += d
                        if want_info:
                            for a in range(p):
                                for b in range(p):
                                    info[a, b] += s2[a, b] / s0 - mean[a] * mean[b]
            k = g0 - 1
        return U, info, resid

    @njit(cache=True, nogil=True)
    def _nb_cd_sweeps(H, v, beta, l1w, l2, order, max_sweeps, tol):
        p = H.shape[0]
        sweeps = 0
        for _ in range(max_sweeps):
            dmax = 0.0
            for kk in range(order.shape[0]):
                k = order[kk]
                hkk = H[k, k]
                denom = hkk + 2.0 * l2
                if denom <= 0.0:
                    continue
                z = hkk * beta[k] - v[k]
                t = l1w[k]
                if z > t:
                    new = (z - t) / denom
                elif z < -t:
                    new = (z + t) / denom
                else:
                    new = 0.0
                d = new - beta[k]
                if d != 0.0:
                    for a in range(p):
                        v[a] += d * H[a, k]
                    beta[k] = new
                    if abs(d) > dmax:
                        dmax = abs(d)
            sweeps += 1
            if dmax < tol:
                break
        return sweeps

    numba_impl = SimpleNamespace(
        name="numba",
        suffix_logsumexp=_nb_suffix_logsumexp,
        cox_loss=_nb_cox_loss,
        risk_moments=_nb_risk_moments,
        cd_sweeps=_nb_cd_sweeps,
    )
else:  # pragma: no cover
    numba_impl = None


def select_backend(name=None):
    """Return the kernel namespace for ``name`` ("numba", "numpy" or None=auto)."""
    if name is None:
        name = "numpy" if (_numba_disabled_by_env() or not HAVE_NUMBA) else "numba"
    if name == "numba":
        if numba_impl is None:
            raise RuntimeError("numba backend requested but numba is not installed")
        return numba_impl
    if name == "numpy":
        return numpy_impl
    raise ValueError(f"unknown kernel backend {name!r}")


backend = select_backend()
