"""Brute-force reference computations used to cross-check the library.

None of these share code paths with the implementation under test beyond
the plain data containers.
"""

from __future__ import annotations

import itertools

import numpy as np


# --------------------------------------------------------------------------
# Skorohod distance over piecewise-linear warps with knots on a lattice


def _edge_costs(lat, xf, yg, cost):
    """Log-slope and worst cell cost of every lattice segment."""
    n = len(lat)
    a1, b1, a2, b2 = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    keep = (a1 < a2) & (b1 < b2)
    a1, b1, a2, b2 = a1[keep], b1[keep], a2[keep], b2[keep]
    s1, u1, s2, u2 = lat[a1], lat[b1], lat[a2], lat[b2]
    ds, du = s2 - s1, u2 - u1
    w = np.abs(np.log(du / ds))
    # parameters in (0, 1) where the segment crosses a jump of either function
    px = (np.asarray(xf)[None, :] - s1[:, None]) / ds[:, None]
    py = (np.asarray(yg)[None, :] - u1[:, None]) / du[:, None]
    p = np.hstack([np.zeros((len(s1), 1)), px, py, np.ones((len(s1), 1))])
    p = np.where((p >= 0) & (p <= 1), p, 1.0)
    p.sort(axis=1)
    mid = 0.5 * (p[:, 1:] + p[:, :-1])
    valid = p[:, 1:] > p[:, :-1]
    t = s1[:, None] + mid * ds[:, None]
    u = u1[:, None] + mid * du[:, None]
    i = np.searchsorted(xf, t, side="right")
    j = np.searchsorted(yg, u, side="right")
    mc = np.where(valid, cost[i, j], -np.inf).max(axis=1)
    return a1 * n + b1, a2 * n + b2, a2, w, mc


def lattice_warp_dist(f, g, mesh):
    """``min over lattice warps of |||lam||| + sup |f - g o lam|``.

    Knots run over the square lattice of spacing ``mesh``, so the result is
    an upper bound on the Skorohod distance that tightens as the mesh shrinks.
    """
    lo, hi = f.domain.lo, f.domain.hi
    n = int(round((hi - lo) / mesh)) + 1
    lat = np.linspace(lo, hi, n)
    cost = np.abs(f.values[:, None] - g.values[None, :])
    src, dst, col, w, mc = _edge_costs(lat, f.jumps, g.jumps, cost)
    start, end = 0, n * n - 1
    best = np.inf
    for eps in np.unique(cost):
        ok = mc <= eps
        dp = np.full(n * n, np.inf)
        dp[start] = 0.0
        for a in range(1, n):
            sel = ok & (col == a)
            cand = np.maximum(dp[src[sel]], w[sel])
            np.minimum.at(dp, dst[sel], cand)
        best = min(best, eps + dp[end])
    return float(best)


def event_order_dist(f, g, bisect_tol=1e-13):
    """Skorohod distance by enumerating where each jump of ``f`` is sent.

    Jump ``x_i`` of ``f`` lands either strictly inside a stretch of ``g`` or
    exactly on a jump of ``g``. For every monotone assignment the sup term is
    read off the visited cells, and the least log-slope budget admitting knot
    values ``u_i`` in the assigned (closed) intervals is found by bisection
    with forward interval propagation, vectorized over assignments.
    """
    lo, hi = f.domain.lo, f.domain.hi
    X = np.r_[lo, f.jumps, hi]
    Y = np.r_[lo, g.jumps, hi]
    nf, ng = len(f.values), len(g.values)
    cost = np.abs(f.values[:, None] - g.values[None, :])
    # key 2k+1: inside stretch k of g; key 2k: exactly on jump Y[k]
    keys = [2 * k + 1 for k in range(ng)] + [2 * k for k in range(1, ng)]
    keys.sort()
    rows = list(itertools.combinations_with_replacement(keys, nf - 1))
    combos = np.array(rows, dtype=int).reshape(len(rows), nf - 1)
    kr = combos // 2
    kl = np.where(combos % 2 == 1, combos // 2, combos // 2 - 1)
    A = len(combos)
    kr_all = np.hstack([np.zeros((A, 1), int), kr])
    kl_all = np.hstack([kl, np.full((A, 1), ng - 1)])
    ok = np.all(kr_all <= kl_all, axis=1)
    sup = np.zeros(A)
    for i in range(nf):
        a, b = kr_all[:, i], kl_all[:, i]
        row = np.full(A, -np.inf)
        for j in range(ng):
            inside = (a <= j) & (j <= b)
            row = np.where(inside, np.maximum(row, cost[i, j]), row)
        sup = np.maximum(sup, row)
    lo_b = Y[combos // 2]
    hi_b = np.where(combos % 2 == 1, Y[np.minimum(combos // 2 + 1, ng)], Y[combos // 2])
    dx = np.diff(X)

    def feasible(eta):
        m, M = np.exp(-eta), np.exp(eta)
        ulo = np.full(A, lo)
        uhi = np.full(A, lo)
        good = ok.copy()
        for i in range(nf - 1):
            ulo = np.maximum(ulo + m * dx[i], lo_b[:, i])
            uhi = np.minimum(uhi + M * dx[i], hi_b[:, i])
            good &= ulo <= uhi
        good &= (ulo + m * dx[-1] <= hi) & (uhi + M * dx[-1] >= hi)
        return good

    top = np.full(A, 60.0)
    reachable = feasible(top)
    bot = np.zeros(A)
    hit0 = feasible(bot)
    top = np.where(hit0, 0.0, top)
    while np.max(top - bot) > bisect_tol:
        mid = 0.5 * (bot + top)
        fm = feasible(mid)
        top = np.where(fm, mid, top)
        bot = np.where(fm, bot, mid)
    total = np.where(reachable, sup + top, np.inf)
    return float(total.min())


# --------------------------------------------------------------------------
# dense-mesh maximizers of a piecewise process


def mesh_points(lo, hi, mesh):
    axes = [np.linspace(a, b, int(round((b - a) / mesh)) + 1) for a, b in zip(lo, hi)]
    if not axes:
        return np.zeros((1, 0))
    grids = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in grids])


def section_values(section, pts):
    """Evaluate a section at many points from its raw parameters."""
    kind = type(section).__name__
    if kind == "ConstSection":
        return np.full(len(pts), section.c)
    if kind == "QuadraticSection":
        return section.c + pts @ section.w - 0.5 * np.einsum("ni,ij,nj->n", pts, section.M, pts)
    if kind == "GridSection":
        from scipy.interpolate import interpn

        return interpn(section.grid, section.values, pts, method="linear")
    raise TypeError(kind)


def mesh_maximizers(psi, mesh, rel_tol=1e-12):
    """Lexicographic extremes of the mesh maximizer set.

    Candidate times are a dense mesh of K1 together with every jump, where
    both the value and the left limit are considered.
    """
    k1 = psi.rect.k1
    lo, hi = psi.rect.k2_lo, psi.rect.k2_hi
    pts = mesh_points(lo, hi, mesh)
    breaks = np.asarray(psi.breaks)
    per_section = [section_values(s, pts) for s in psi.sections]
    ts = np.unique(np.r_[np.linspace(k1.lo, k1.hi, int(round(k1.length / mesh)) + 1), breaks])
    entries = []  # (t, values over pts)
    for t in ts:
        i = int(np.searchsorted(breaks, t, side="right"))
        entries.append((t, per_section[i]))
        if t in breaks:
            entries.append((t, per_section[i - 1]))
    top = max(v.max() for _, v in entries)
    tol = rel_tol * max(1.0, abs(top))
    hits = [(t, pts[v >= top - tol]) for t, v in entries if v.max() >= top - tol]
    t_min = min(t for t, _ in hits)
    t_max = max(t for t, _ in hits)
    low = np.vstack([p for t, p in hits if t == t_min])
    high = np.vstack([p for t, p in hits if t == t_max])
    lmin = low[np.lexsort(low.T[::-1])[0]] if low.shape[1] else low[0]
    lmax = high[np.lexsort(high.T[::-1])[-1]] if high.shape[1] else high[0]
    return top, np.r_[t_min, lmin], np.r_[t_max, lmax]


# --------------------------------------------------------------------------
# change-point least squares by enumeration


def brute_force_cp(y, z, c1, c2):
    """Scan every split in ``{c1} u {z in [c1, c2]}`` with fresh side means."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    splits = sorted(set([float(c1)] + [float(v) for v in z if c1 <= v <= c2]))
    best = None
    for s in splits:
        left = z <= s
        ybar = float(np.mean(y))
        a = float(np.mean(y[left])) if left.any() else ybar
        b = float(np.mean(y[~left])) if (~left).any() else ybar
        val = -float(np.mean((y - np.where(left, a, b)) ** 2))
        if best is None or val > best[1]:
            best = (s, val)
    return best


# --------------------------------------------------------------------------
# Cox partial likelihood maximized by zooming grids


def loglik_many(t, delta, X, B):
    """Partial log-likelihood for each coefficient row of ``B`` (no ties)."""
    order = np.argsort(-t, kind="stable")
    X, delta = X[order], delta[order].astype(bool)
    eta = X @ B.T  # (n, G)
    log_risk = np.logaddexp.accumulate(eta, axis=0)
    return np.sum((eta - log_risk)[delta], axis=0)


def grid_max_loglik(t, delta, X, half=8.0, points=7, shrink=0.6, rounds=50):
    d = X.shape[1]
    center = np.zeros(d)
    offsets = np.array(list(itertools.product(np.linspace(-1, 1, points), repeat=d)))
    best = -np.inf
    for _ in range(rounds):
        B = center + half * offsets
        vals = loglik_many(t, delta, X, B)
        k = int(np.argmax(vals))
        if vals[k] >= best:
            best, center = float(vals[k]), B[k]
        half *= shrink
    return best, center


# --------------------------------------------------------------------------
# random inputs shared by several suites


def random_warp(rng, lo, hi, max_norm, knots=6):
    """Piecewise-linear warp of ``[lo, hi]`` whose norm is below ``max_norm``."""
    from sargmax_lab.skorohod import Interval, TimeWarp

    widths = rng.uniform(0.2, 1.0, knots)
    widths *= (hi - lo) / widths.sum()
    a = 0.5 * max_norm * rng.uniform(0.05, 0.999)
    du = widths * np.exp(rng.uniform(-a, a, knots))
    du *= (hi - lo) / du.sum()
    s = np.r_[lo, lo + np.cumsum(widths)]
    u = np.r_[lo, lo + np.cumsum(du)]
    s[-1] = u[-1] = hi
    return TimeWarp(Interval(lo, hi), s, u)


def random_section(rng, k):
    """Const, quadratic (well conditioned or axis-flat) or grid section."""
    from sargmax_lab.skorohod import ConstSection, GridSection, QuadraticSection

    kind = rng.choice(["const", "quad", "flat", "grid"] if k else ["const"])
    c = float(rng.normal())
    if kind == "const":
        return ConstSection(c)
    if kind == "quad":
        Q, _ = np.linalg.qr(rng.normal(size=(k, k)))
        M = Q @ np.diag(rng.uniform(0.5, 2.0, k)) @ Q.T
        return QuadraticSection(c, rng.normal(scale=1.5, size=k), 0.5 * (M + M.T))
    if kind == "flat":
        diag = np.where(rng.uniform(size=k) < 0.5, 0.0, rng.uniform(0.5, 2.0, k))
        w = rng.normal(scale=1.5, size=k)
        w[(diag == 0) & (rng.uniform(size=k) < 0.5)] = 0.0
        return QuadraticSection(c, w, np.diag(diag))
    axes = tuple(np.linspace(-1, 1, 9) for _ in range(k))
    return GridSection(axes, rng.normal(size=(9,) * k))


def random_process(rng, d, max_jumps=5):
    """Process on ``[-1, 1]^d`` with random jumps and mixed sections."""
    from sargmax_lab.skorohod import PiecewiseProcess, Rect

    k = d - 1
    rect = Rect.of(*([(-1.0, 1.0)] * d))
    m = int(rng.integers(0, max_jumps + 1))
    breaks = np.sort(rng.uniform(-0.95, 0.95, m))
    breaks = breaks[np.abs(breaks) > 1e-3]
    if len(breaks) > 1:
        breaks = breaks[np.r_[True, np.diff(breaks) > 1e-3]]
    sections = []
    for i in range(len(breaks) + 1):
        if sections and rng.uniform() < 0.25:
            sections.append(sections[-1])  # equal neighbours must merge
        else:
            sections.append(random_section(rng, k))
    return PiecewiseProcess.from_breaks(rect, breaks, sections)


def well_separated(psi, mesh, margin):
    """Distinct sections' mesh maxima differ from the top by more than ``margin``."""
    pts = mesh_points(psi.rect.k2_lo, psi.rect.k2_hi, mesh)
    tops = np.array([section_values(s, pts).max() for s in psi.sections])
    best = int(np.argmax(tops))
    for i, s in enumerate(psi.sections):
        if s is psi.sections[best] or s.same_as(psi.sections[best]):
            continue
        if tops[best] - tops[i] <= margin:
            return False
    return True
