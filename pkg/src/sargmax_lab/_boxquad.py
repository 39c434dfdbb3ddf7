"""Quadratic optimisation over axis-aligned boxes.

``q(x) = c + w.x - x.A.x / 2`` on ``lo <= x <= hi``. ``A`` is symmetric but may
be indefinite (section differences) or only positive semidefinite (concave
sections with flat directions).
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

FACE_ENUM_MAX_DIM = 3
_COND_MAX = 1e12


def quad_value(c, w, A, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(c + w @ x - 0.5 * x @ A @ x)
    return c + x @ w - 0.5 * np.einsum("ni,ij,nj->n", x, A, x)


def face_points(w, A, lo, hi, tol=1e-12):
    """Stationary points of ``q`` restricted to every face of the box.

    Faces whose restricted Hessian is singular are skipped: along a null
    direction ``q`` is either strictly monotone (no stationary point) or
    constant, and then the same value is reached on a lower-dimensional face.
    """
    k = len(w)
    for pattern in itertools.product((0, 1, 2), repeat=k):
        x = np.where(np.array(pattern) == 2, hi, lo).astype(float)
        free = np.array([i for i, p in enumerate(pattern) if p == 0], dtype=int)
        if free.size:
            fixed = np.array([i for i, p in enumerate(pattern) if p != 0], dtype=int)
            Aff = A[np.ix_(free, free)]
            if np.linalg.cond(Aff) > _COND_MAX:
                continue
            rhs = w[free] - (A[np.ix_(free, fixed)] @ x[fixed] if fixed.size else 0.0)
            sol = np.linalg.solve(Aff, rhs)
            if np.any(sol < lo[free] - tol) or np.any(sol > hi[free] + tol):
                continue
            x[free] = np.clip(sol, lo[free], hi[free])
        yield x


def max_by_faces(c, w, A, lo, hi):
    """Exact maximum of ``q`` over the box and one point attaining it."""
    best, arg = -np.inf, None
    for x in face_points(w, A, lo, hi):
        v = quad_value(c, w, A, x)
        if v > best:
            best, arg = v, x
    return best, arg


def max_projected_gradient(c, w, A, lo, hi, tol=1e-10, max_iter=100_000):
    """Projected gradient ascent for concave ``q`` (``A`` PSD)."""
    L = max(float(np.linalg.eigvalsh(A).max()), 1e-12)
    x = np.clip(np.linalg.lstsq(A, w, rcond=None)[0], lo, hi) if np.any(A) else 0.5 * (lo + hi)
    for _ in range(max_iter):
        g = w - A @ x
        x_new = np.clip(x + g / L, lo, hi)
        if np.max(np.abs(x_new - x)) * L < tol:
            x = x_new
            break
        x = x_new
    return quad_value(c, w, A, x), x


def abs_sup(c, w, A, lo, hi):
    """``sup |q|`` over the box (A may be indefinite)."""
    if len(w) == 0:
        return abs(float(c))
    top, _ = max_by_faces(c, w, A, lo, hi)
    bottom, _ = max_by_faces(-c, -w, -A, lo, hi)
    return max(top, bottom)


def _lex_extreme(M, w, x0, lo, hi, sign):
    """Lexicographic min (sign=+1) or max (sign=-1) of the maximiser set.

    For concave ``q`` the maximiser set is ``box ∩ {M x = M x0, w.x = w.x0}``.
    """
    k = len(w)
    evals, evecs = np.linalg.eigh(M)
    scale = max(1.0, float(np.abs(evals).max(initial=0.0)))
    rng = evecs[:, evals > 1e-10 * scale]
    rows = [rng.T] if rng.size else []
    null_w = w - (rng @ (rng.T @ w) if rng.size else 0.0)
    if np.linalg.norm(null_w) > 1e-12:
        rows.append(null_w[None, :] / np.linalg.norm(null_w))
    A_eq = np.vstack(rows) if rows else None
    b_eq = A_eq @ x0 if A_eq is not None else None
    bounds = list(zip(lo, hi))
    x = x0.copy()
    for j in range(k):
        cost = np.zeros(k)
        cost[j] = sign
        res = linprog(cost, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
        if res.status != 0:
            # x0 itself is feasible; numerical trouble only
            break
        x = res.x
        bounds[j] = (x[j], x[j])
    return np.clip(x, lo, hi)


def concave_argmax(c, w, M, lo, hi):
    """Maximum of a concave quadratic with its lexicographic extreme maximisers.

    Returns ``(value, lexmin_point, lexmax_point, unique)``.
    """
    w = np.asarray(w, dtype=float)
    M = np.asarray(M, dtype=float)
    if len(w) == 0:
        return float(c), np.zeros(0), np.zeros(0), True
    if len(w) <= FACE_ENUM_MAX_DIM:
        value, x0 = max_by_faces(c, w, M, lo, hi)
    else:
        value, x0 = max_projected_gradient(c, w, M, lo, hi)
    evals = np.linalg.eigvalsh(M)
    if evals.min() > 1e-10 * max(1.0, evals.max()):
        return value, x0, x0.copy(), True
    xmin = _lex_extreme(M, w, x0, lo, hi, +1.0)
    xmax = _lex_extreme(M, w, x0, lo, hi, -1.0)
    unique = bool(np.allclose(xmin, xmax, rtol=0.0, atol=1e-12))
    return value, xmin, xmax, unique
