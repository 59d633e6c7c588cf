"""Hot numeric kernels with numba and pure-numpy implementations.

Three inner loops dominate the library's runtime away from BLAS matmuls:
pairwise squared distances (cost matrices), the m-by-m f-divergence penalty
reduction inside dual training, and log-domain Sinkhorn sweeps.  Each has a
numba ``@njit`` version and a numpy twin producing the same values (up to a
few ulps from different summation orders); :mod:`scones._backend` selects
which one the public names point to.

Kind ids for the penalty reduction: 0 = KL, 1 = Pearson chi^2 with the hard
hinge conjugate, 2 = Pearson chi^2 with the softplus-smoothed hinge.
"""

from __future__ import annotations

import math

import numpy as np

from ._backend import NUMBA_ENABLED

KIND_KL = 0
KIND_CHI2_HARD = 1
KIND_CHI2_SOFTPLUS = 2

_PI2_6 = math.pi * math.pi / 6.0


# ---------------------------------------------------------------------------
# scalar helpers (shared source for numba and the tests' reference values)
# ---------------------------------------------------------------------------

def _softplus(w: float) -> float:
    # log(1 + e^w) without overflow
    if w > 0.0:
        return w + math.log1p(math.exp(-w))
    return math.log1p(math.exp(w))


def _dilog_series(z: float) -> float:
    # Li2(z) for 0 <= z <= 0.5 via the defining series
    term = z
    acc = z
    k = 1
    while abs(term) > 1e-18 and k < 200:
        k += 1
        term *= z
        acc += term / (k * k)
    return acc


def _neg_dilog_exp(w: float) -> float:
    """-Li2(-e^w), the antiderivative of softplus: d/dw [-Li2(-e^w)] = log(1+e^w)."""
    if w <= 0.0:
        # Li2(z) = -Li2(z/(z-1)) - log(1-z)^2/2 with z = -e^w in [-1, 0)
        s = _softplus(w)
        sig = math.exp(w - s)  # e^w / (1 + e^w)
        return _dilog_series(sig) + 0.5 * s * s
    return _PI2_6 + 0.5 * w * w - _neg_dilog_exp(-w)


def _chi2_softplus_conj(u: float, alpha: float) -> float:
    """Smoothed conjugate of the nonnegatively supported chi^2; -> u^2/4+u as alpha -> inf."""
    return (2.0 / (alpha * alpha)) * _neg_dilog_exp(alpha * (0.5 * u + 1.0)) - 1.0


# ---------------------------------------------------------------------------
# pure numpy implementations
# ---------------------------------------------------------------------------

def neg_dilog_exp_np(w):
    """Vectorized -Li2(-e^w) via scipy's dilogarithm."""
    from scipy.special import spence

    w = np.asarray(w, dtype=np.float64)
    base = -spence(1.0 + np.exp(-np.abs(w)))  # value at -|w|
    pos = _PI2_6 + 0.5 * w * w - base
    return np.where(w > 0.0, pos, base)


def pairwise_sqdist_np(x, y):
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def penalty_stats_np(phi, psi, cost, lam, kind, alpha, wx, wy):
    v = phi[:, None] + psi[None, :] - cost
    if kind == KIND_KL:
        m = np.exp(v / lam - 1.0)
        h = lam * m
        sat = 0
    elif kind == KIND_CHI2_HARD:
        u = v / (2.0 * lam) + 1.0
        m = np.maximum(u, 0.0)
        h = lam * (m * m - 1.0)
        sat = int(np.count_nonzero(u <= 0.0))
    elif kind == KIND_CHI2_SOFTPLUS:
        u = v / (2.0 * lam) + 1.0
        w = alpha * u
        m = np.where(w > 0.0, w + np.log1p(np.exp(-np.abs(w))),
                     np.log1p(np.exp(-np.abs(w)))) / alpha
        h = lam * ((2.0 / (alpha * alpha)) * neg_dilog_exp_np(w) - 1.0)
        sat = 0
    else:
        raise ValueError(f"unknown kernel kind id {kind}")
    h_sum = float(wx @ h @ wy)
    m_row = m @ wy
    m_col = wx @ m
    return h_sum, m_row, m_col, sat


def sinkhorn_kl_log_np(cost, log_sigma, log_tau, lam, tol, max_iter):
    """Log-domain Sinkhorn on kernel exp(-c/lam) * sigma x tau.

    Returns standard potentials (f, g) with plan = exp((f+g-c)/lam) sigma tau,
    the iteration count, and the final column-marginal l1 residual (rows are
    exact after the f update).
    """
    f = np.zeros_like(log_sigma)
    g = np.zeros_like(log_tau)
    tau = np.exp(log_tau)
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        a = log_sigma[:, None] + (f[:, None] - cost) / lam
        g = -lam * _lse_np(a, axis=0)
        b = log_tau[None, :] + (g[None, :] - cost) / lam
        f = -lam * _lse_np(b, axis=1)
        logp = (log_sigma[:, None] + log_tau[None, :]
                + (f[:, None] + g[None, :] - cost) / lam)
        col = np.exp(_lse_np(logp, axis=0))
        res = float(np.abs(col - tau).sum())
        if res < tol:
            break
    return f, g, it, res


def _lse_np(a, axis):
    amax = np.max(a, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(a - amax), axis=axis)) + np.squeeze(amax, axis=axis)
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    from numba import njit

    _softplus_nb = njit(cache=True)(_softplus)
    _dilog_series_nb = njit(cache=True)(_dilog_series)

    @njit(cache=True)
    def _neg_dilog_exp_nb(w):
        if w <= 0.0:
            s = _softplus_nb(w)
            sig = math.exp(w - s)
            return _dilog_series_nb(sig) + 0.5 * s * s
        s = _softplus_nb(-w)
        sig = math.exp(-w - s)
        return _PI2_6 + 0.5 * w * w - (_dilog_series_nb(sig) + 0.5 * s * s)

    @njit(cache=True)
    def pairwise_sqdist_nb(x, y):
        n, d = x.shape
        m = y.shape[0]
        out = np.empty((n, m), dtype=np.float64)
        for i in range(n):
            for j in range(m):
                acc = 0.0
                for k in range(d):
                    t = x[i, k] - y[j, k]
                    acc += t * t
                out[i, j] = acc
        return out

    @njit(cache=True)
    def penalty_stats_nb(phi, psi, cost, lam, kind, alpha, wx, wy):
        n = phi.shape[0]
        m = psi.shape[0]
        m_row = np.zeros(n, dtype=np.float64)
        m_col = np.zeros(m, dtype=np.float64)
        h_sum = 0.0
        sat = 0
        for i in range(n):
            fi = phi[i]
            wi = wx[i]
            acc = 0.0
            for j in range(m):
                v = fi + psi[j] - cost[i, j]
                if kind == 0:
                    mij = math.exp(v / lam - 1.0)
                    hij = lam * mij
                elif kind == 1:
                    u = v / (2.0 * lam) + 1.0
                    if u > 0.0:
                        mij = u
                    else:
                        mij = 0.0
                        sat += 1
                    hij = lam * (mij * mij - 1.0)
                else:
                    u = v / (2.0 * lam) + 1.0
                    w = alpha * u
                    mij = _softplus_nb(w) / alpha
                    hij = lam * ((2.0 / (alpha * alpha)) * _neg_dilog_exp_nb(w) - 1.0)
                acc += wy[j] * hij
                m_row[i] += wy[j] * mij
                m_col[j] += wi * mij
            h_sum += wi * acc
        return h_sum, m_row, m_col, sat

    @njit(cache=True)
    def sinkhorn_kl_log_nb(cost, log_sigma, log_tau, lam, tol, max_iter):
        n = log_sigma.shape[0]
        m = log_tau.shape[0]
        f = np.zeros(n, dtype=np.float64)
        g = np.zeros(m, dtype=np.float64)
        tau = np.exp(log_tau)
        res = np.inf
        it = 0
        for it in range(1, max_iter + 1):
            for j in range(m):
                amax = -np.inf
                for i in range(n):
                    a = log_sigma[i] + (f[i] - cost[i, j]) / lam
                    if a > amax:
                        amax = a
                s = 0.0
                for i in range(n):
                    s += math.exp(log_sigma[i] + (f[i] - cost[i, j]) / lam - amax)
                g[j] = -lam * (math.log(s) + amax)
            for i in range(n):
                bmax = -np.inf
                for j in range(m):
                    b = log_tau[j] + (g[j] - cost[i, j]) / lam
                    if b > bmax:
                        bmax = b
                s = 0.0
                for j in range(m):
                    s += math.exp(log_tau[j] + (g[j] - cost[i, j]) / lam - bmax)
                f[i] = -lam * (math.log(s) + bmax)
            res = 0.0
            for j in range(m):
                cmax = -np.inf
                for i in range(n):
                    c = (log_sigma[i] + log_tau[j]
                         + (f[i] + g[j] - cost[i, j]) / lam)
                    if c > cmax:
                        cmax = c
                s = 0.0
                for i in range(n):
                    s += math.exp(log_sigma[i] + log_tau[j]
                                  + (f[i] + g[j] - cost[i, j]) / lam - cmax)
                res += abs(math.exp(math.log(s) + cmax) - tau[j])
            if res < tol:
                break
        return f, g, it, res

    pairwise_sqdist = pairwise_sqdist_nb
    penalty_stats = penalty_stats_nb
    sinkhorn_kl_log = sinkhorn_kl_log_nb
else:
    pairwise_sqdist = pairwise_sqdist_np
    penalty_stats = penalty_stats_np
    sinkhorn_kl_log = sinkhorn_kl_log_np
