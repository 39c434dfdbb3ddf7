"""Hot loops, each in a compiled-loop and a vectorised-numpy flavour.

The public names at the bottom pick one flavour per process according to
``_accel.USE_NUMBA``. Both flavours are importable directly for testing and
benchmarking.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = [
    "cp_profile",
    "cpp_window_argmax",
    "cox_profile",
    "ks_two_sample",
    "cp_profile_nb",
    "cp_profile_np",
    "cpp_window_argmax_nb",
    "cpp_window_argmax_np",
    "cox_profile_nb",
    "cox_profile_np",
    "ks_two_sample_nb",
    "ks_two_sample_np",
]


# --------------------------------------------------------------------------
# change-point least squares profile


@njit
def cp_profile_nb(y_sorted, n_left):
    """Profiled ``-(1/n) * RSS`` for each split keeping ``n_left[c]`` points left.

    ``y_sorted`` is ordered by the covariate; ``n_left`` is nondecreasing.
    """
    n = y_sorted.shape[0]
    total = 0.0
    sq = 0.0
    for i in range(n):
        total += y_sorted[i]
        sq += y_sorted[i] * y_sorted[i]
    out = np.empty(n_left.shape[0])
    left = 0.0
    k = 0
    for c in range(n_left.shape[0]):
        while k < n_left[c]:
            left += y_sorted[k]
            k += 1
        nl = n_left[c]
        nr = n - nl
        fit = 0.0
        if nl > 0:
            fit += left * left / nl
        if nr > 0:
            right = total - left
            fit += right * right / nr
        out[c] = -(sq - fit) / n
    return out


def cp_profile_np(y_sorted, n_left):
    y_sorted = np.asarray(y_sorted, dtype=float)
    n_left = np.asarray(n_left, dtype=np.int64)
    n = len(y_sorted)
    csum = np.r_[0.0, np.cumsum(y_sorted)]
    left = csum[n_left]
    right = csum[-1] - left
    nr = n - n_left
    with np.errstate(divide="ignore", invalid="ignore"):
        fit = np.where(n_left > 0, left * left / np.maximum(n_left, 1), 0.0)
        fit = fit + np.where(nr > 0, right * right / np.maximum(nr, 1), 0.0)
    return -(np.dot(y_sorted, y_sorted) - fit) / n


# --------------------------------------------------------------------------
# windowed argmax of a step path


@njit
def cpp_window_argmax_nb(breaks, values, lo, hi, inner_lo, inner_hi):
    """Argmax of a step path accepted only if it beats the outer buffers.

    Returns ``(accepted, t_small, t_large)`` where the ``t`` are the left end
    of the first and the right end of the last stretch attaining the max over
    stretches meeting ``[inner_lo, inner_hi]``.
    """
    m = values.shape[0]
    best = -np.inf
    outer = -np.inf
    first = -1
    last = -1
    for i in range(m):
        a = lo if i == 0 else breaks[i - 1]
        b = hi if i == m - 1 else breaks[i]
        if a < inner_lo or b > inner_hi:
            if values[i] > outer:
                outer = values[i]
        if b >= inner_lo and a <= inner_hi:
            if values[i] > best:
                best = values[i]
                first = i
                last = i
            elif values[i] == best:
                last = i
    t_small = lo if first == 0 else breaks[first - 1]
    t_large = hi if last == m - 1 else breaks[last]
    return best > outer, t_small, t_large


def cpp_window_argmax_np(breaks, values, lo, hi, inner_lo, inner_hi):
    breaks = np.asarray(breaks, dtype=float)
    values = np.asarray(values, dtype=float)
    a = np.r_[lo, breaks]
    b = np.r_[breaks, hi]
    buffer = (a < inner_lo) | (b > inner_hi)
    inner = (b >= inner_lo) & (a <= inner_hi)
    best = values[inner].max()
    outer = values[buffer].max() if buffer.any() else -np.inf
    hits = np.flatnonzero(inner & (values == best))
    return bool(best > outer), float(a[hits[0]]), float(b[hits[-1]])


# --------------------------------------------------------------------------
# Cox partial likelihood profile over thresholds


@njit
def _cox_eval_nb(X, delta, beta):
    # risk-set sums are kept relative to the running max of eta, so the
    # prefix sums never underflow whatever the spread of eta
    n, d = X.shape
    eta = X @ beta
    m = eta[0]
    s0 = 0.0
    s1 = np.zeros(d)
    s2 = np.zeros((d, d))
    ll = 0.0
    g = np.zeros(d)
    H = np.zeros((d, d))
    for i in range(n):
        if eta[i] > m:
            r = math.exp(m - eta[i])
            s0 *= r
            s1 *= r
            s2 *= r
            m = eta[i]
        w = math.exp(eta[i] - m)
        s0 += w
        for a in range(d):
            s1[a] += w * X[i, a]
            for b in range(d):
                s2[a, b] += w * X[i, a] * X[i, b]
        if delta[i]:
            ll += eta[i] - m - math.log(s0)
            for a in range(d):
                xa = s1[a] / s0
                g[a] += X[i, a] - xa
                for b in range(d):
                    H[a, b] -= s2[a, b] / s0 - xa * (s1[b] / s0)
    return ll, g, H


@njit
def _cox_loglik_nb(X, delta, beta):
    n = X.shape[0]
    eta = X @ beta
    m = eta[0]
    s0 = 0.0
    ll = 0.0
    for i in range(n):
        if eta[i] > m:
            s0 *= math.exp(m - eta[i])
            m = eta[i]
        s0 += math.exp(eta[i] - m)
        if delta[i]:
            ll += eta[i] - m - math.log(s0)
    return ll


@njit
def _cox_newton_nb(X, delta, beta, tol, max_iter, sep_bound):
    d = X.shape[1]
    ll, g, H = _cox_eval_nb(X, delta, beta)
    converged = False
    separated = False
    for _ in range(max_iter + 1):
        if np.sqrt(np.sum(g * g)) < tol:
            converged = True
            break
        step = np.linalg.lstsq(-H, g)[0]
        t = 1.0
        moved = False
        for _h in range(60):
            cand = beta + t * step
            ll_new = _cox_loglik_nb(X, delta, cand)
            if ll_new >= ll - 1e-14 * max(1.0, abs(ll)):
                beta = cand
                moved = True
                break
            t *= 0.5
        if not moved:
            break
        ll, g, H = _cox_eval_nb(X, delta, beta)
        if np.sqrt(np.sum(beta * beta)) > sep_bound:
            separated = True
            break
    if d == 0:
        converged = True
    return ll, beta, converged, separated


@njit
def cox_profile_nb(delta, z1, z2, z3, candidates, tol, max_iter, sep_bound):
    """Profile partial log-likelihood at each candidate threshold.

    Rows must be sorted by decreasing time so that the risk set of row ``i``
    is the prefix ``0..i``. Design: ``(z1, z2 * 1{z3 <= c}, z2 * 1{z3 > c})``.
    Columns that vanish identically are held at 0. Each fit starts from the
    previous candidate's solution when that one converged cleanly.
    """
    n, p = z1.shape
    q = z2.shape[1]
    d = p + 2 * q
    m = candidates.shape[0]
    values = np.empty(m)
    coefs = np.zeros((m, d))
    conv = np.zeros(m, dtype=np.bool_)
    sep = np.zeros(m, dtype=np.bool_)
    warm = np.zeros(d)
    X = np.empty((n, d))
    for c in range(m):
        for i in range(n):
            below = z3[i] <= candidates[c]
            for a in range(p):
                X[i, a] = z1[i, a]
            for a in range(q):
                X[i, p + a] = z2[i, a] if below else 0.0
                X[i, p + q + a] = 0.0 if below else z2[i, a]
        active = np.zeros(d, dtype=np.bool_)
        for a in range(d):
            for i in range(n):
                if X[i, a] != 0.0:
                    active[a] = True
                    break
        idx = np.flatnonzero(active)
        Xa = np.empty((n, idx.shape[0]))
        for j in range(idx.shape[0]):
            Xa[:, j] = X[:, idx[j]]
        start = np.empty(idx.shape[0])
        for j in range(idx.shape[0]):
            start[j] = warm[idx[j]]
        ll, beta, ok, bad = _cox_newton_nb(Xa, delta, start, tol, max_iter, sep_bound)
        values[c] = ll
        for j in range(idx.shape[0]):
            coefs[c, idx[j]] = beta[j]
        conv[c] = ok
        sep[c] = bad
        if ok and not bad:
            warm[:] = coefs[c]
    return values, coefs, conv, sep


def _risk_means(eta, V):
    """Prefix means ``cumsum(exp(eta) V) / cumsum(exp(eta))`` in log space."""
    log_s0 = np.logaddexp.accumulate(eta)
    with np.errstate(divide="ignore"):
        lp = np.log(np.maximum(V, 0.0))
        lm = np.log(np.maximum(-V, 0.0))
    pos = np.logaddexp.accumulate(eta[:, None] + lp, axis=0)
    neg = np.logaddexp.accumulate(eta[:, None] + lm, axis=0)
    return np.exp(pos - log_s0[:, None]) - np.exp(neg - log_s0[:, None]), log_s0


def _cox_eval_np(X, delta, beta, need_derivs=True):
    eta = X @ beta
    ev = delta.astype(bool)
    d = X.shape[1]
    XX = (X[:, :, None] * X[:, None, :]).reshape(len(eta), d * d)
    means, log_s0 = _risk_means(eta, np.hstack([X, XX]) if need_derivs else np.zeros((len(eta), 0)))
    ll = float(np.sum(eta[ev] - log_s0[ev]))
    if not need_derivs:
        return ll
    s1 = means[ev, :d]
    s2 = means[ev, d:].reshape(-1, d, d)
    g = np.sum(X[ev] - s1, axis=0)
    H = -np.sum(s2 - s1[:, :, None] * s1[:, None, :], axis=0)
    return ll, g, H


def _cox_newton_np(X, delta, beta, tol, max_iter, sep_bound):
    ll, g, H = _cox_eval_np(X, delta, beta)
    converged = X.shape[1] == 0
    separated = False
    for _ in range(max_iter + 1):
        if np.linalg.norm(g) < tol:
            converged = True
            break
        step = np.linalg.lstsq(-H, g, rcond=None)[0]
        t = 1.0
        moved = False
        for _h in range(60):
            cand = beta + t * step
            ll_new = _cox_eval_np(X, delta, cand, need_derivs=False)
            if ll_new >= ll - 1e-14 * max(1.0, abs(ll)):
                beta = cand
                moved = True
                break
            t *= 0.5
        if not moved:
            break
        ll, g, H = _cox_eval_np(X, delta, beta)
        if np.linalg.norm(beta) > sep_bound:
            separated = True
            break
    return ll, beta, converged, separated


def cox_profile_np(delta, z1, z2, z3, candidates, tol, max_iter, sep_bound):
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    p, q = z1.shape[1], z2.shape[1]
    d = p + 2 * q
    m = len(candidates)
    values = np.empty(m)
    coefs = np.zeros((m, d))
    conv = np.zeros(m, dtype=bool)
    sep = np.zeros(m, dtype=bool)
    warm = np.zeros(d)
    for c, cut in enumerate(candidates):
        below = (z3 <= cut)[:, None]
        X = np.hstack([z1, np.where(below, z2, 0.0), np.where(below, 0.0, z2)])
        active = np.any(X != 0.0, axis=0)
        ll, beta, ok, bad = _cox_newton_np(X[:, active], delta, warm[active].copy(), tol, max_iter, sep_bound)
        values[c] = ll
        coefs[c, active] = beta
        conv[c], sep[c] = ok, bad
        if ok and not bad:
            warm = coefs[c].copy()
    return values, coefs, conv, sep


# --------------------------------------------------------------------------
# two-sample Kolmogorov-Smirnov distance


@njit
def ks_two_sample_nb(a, b):
    """``sup_x |F_a(x) - F_b(x)|`` for sorted samples ``a`` and ``b``."""
    na, nb = a.shape[0], b.shape[0]
    i = 0
    j = 0
    best = 0.0
    while i < na or j < nb:
        if j >= nb or (i < na and a[i] <= b[j]):
            x = a[i]
        else:
            x = b[j]
        while i < na and a[i] == x:
            i += 1
        while j < nb and b[j] == x:
            j += 1
        diff = abs(i / na - j / nb)
        if diff > best:
            best = diff
    return best


def ks_two_sample_np(a, b):
    # both ECDFs are right-continuous and constant between merged points, so the
    # sup is attained at a merged point (the left limits are values at the
    # previous merged point)
    pts = np.union1d(a, b)
    fa = np.searchsorted(a, pts, side="right") / len(a)
    fb = np.searchsorted(b, pts, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


if USE_NUMBA:
    cp_profile = cp_profile_nb
    cpp_window_argmax = cpp_window_argmax_nb
    cox_profile = cox_profile_nb
    ks_two_sample = ks_two_sample_nb
else:
    cp_profile = cp_profile_np
    cpp_window_argmax = cpp_window_argmax_np
    cox_profile = cox_profile_np
    ks_two_sample = ks_two_sample_np
