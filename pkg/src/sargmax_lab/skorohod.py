"""Finite representations of Skorohod-space functions and their metrics.

Everything here is immutable: arrays are stored read-only and every operation
returns a new object.

Coordinates follow one convention throughout: ``t`` is the first coordinate
(the one carrying jumps, living in ``K1``) and ``xi`` collects the remaining
``d - 1`` coordinates (``K2``), in storage order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import _boxquad

__all__ = [
    "DomainError",
    "Interval",
    "Rect",
    "StepFn1D",
    "ConstSection",
    "QuadraticSection",
    "GridSection",
    "PiecewiseProcess",
    "PureJumpFn",
    "TimeWarp",
    "evaluate",
    "quadrant_limits_1d",
    "pure_jump_of",
    "warp_norm",
    "apply_warp",
    "sup_dist",
    "section_gap",
    "skorohod_dist_1d",
    "tilde_dist",
    "warp_objective",
    "to_dict",
    "from_dict",
]

# bisection resolution on the log-slope budget, absolute
WARP_BISECT_TOL = 1e-13
# points per axis of the dense mesh used when a grid section is involved
GAP_MESH = 65
# budget widenings tried when extracting a certificate path
PATH_SLACKS = (0.0, 1e-12, 1e-10, 1e-8)


class DomainError(ValueError):
    """A point or object does not live on the expected domain."""


def _ro(values, ndim=1) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        arr = arr.reshape((-1,) if ndim == 1 else arr.shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DomainError("interval endpoints must be finite")
        if not self.lo < self.hi:
            raise DomainError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, t) -> bool:
        return self.lo <= t <= self.hi

    def interior(self, t) -> bool:
        return self.lo < t < self.hi


@dataclass(frozen=True)
class Rect:
    axes: tuple

    def __post_init__(self):
        axes = tuple(a if isinstance(a, Interval) else Interval(*a) for a in self.axes)
        if not axes:
            raise DomainError("a rectangle needs at least one axis")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def of(cls, *bounds) -> "Rect":
        return cls(tuple(Interval(lo, hi) for lo, hi in bounds))

    @property
    def d(self) -> int:
        return len(self.axes)

    @property
    def k1(self) -> Interval:
        return self.axes[0]

    @property
    def k2(self) -> tuple:
        return self.axes[1:]

    @property
    def k2_lo(self) -> np.ndarray:
        return np.array([a.lo for a in self.k2], dtype=float)

    @property
    def k2_hi(self) -> np.ndarray:
        return np.array([a.hi for a in self.k2], dtype=float)

    def contains(self, t, xi=()) -> bool:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if len(xi) != self.d - 1:
            return False
        return self.k1.contains(t) and all(a.contains(x) for a, x in zip(self.k2, xi))


# --------------------------------------------------------------------------
# one-dimensional step functions


@dataclass(frozen=True, eq=False)
class StepFn1D:
    """Càdlàg step function with finitely many jumps on a compact interval.

    ``f(t) = values[j]`` for ``jumps[j-1] <= t < jumps[j]``; the last value is
    also taken at ``domain.hi``. Jumps must lie strictly inside the domain.
    """

    domain: Interval
    jumps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if not isinstance(self.domain, Interval):
            object.__setattr__(self, "domain", Interval(*self.domain))
        jumps = _ro(self.jumps)
        values = _ro(self.values)
        if len(values) != len(jumps) + 1:
            raise ValueError("need exactly one more value than jumps")
        if np.any(np.diff(jumps) <= 0):
            raise ValueError("jumps must be strictly increasing")
        if len(jumps) and (jumps[0] <= self.domain.lo or jumps[-1] >= self.domain.hi):
            raise DomainError("jumps must lie strictly inside the domain")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, domain, value) -> "StepFn1D":
        return cls(domain, [], [value])

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.domain.lo) or np.any(t_arr > self.domain.hi):
            raise DomainError(f"t outside [{self.domain.lo}, {self.domain.hi}]")
        out = self.values[np.searchsorted(self.jumps, t_arr, side="right")]
        return float(out) if out.ndim == 0 else out

    def left_limit(self, t: float) -> float:
        if not self.domain.contains(t):
            raise DomainError(f"t={t} outside the domain")
        if t == self.domain.lo:
            return float(self.values[0])
        return float(self.values[np.searchsorted(self.jumps, t, side="left")])

    def canonical(self) -> "StepFn1D":
        """Merge adjacent stretches carrying equal values."""
        keep = np.flatnonzero(self.values[1:] != self.values[:-1])
        return StepFn1D(self.domain, self.jumps[keep], np.r_[self.values[0], self.values[1:][keep]])

    def __eq__(self, other):
        if not isinstance(other, StepFn1D):
            return NotImplemented
        return (
            self.domain == other.domain
            and np.array_equal(self.jumps, other.jumps)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


# --------------------------------------------------------------------------
# continuous sections over K2


@dataclass(frozen=True, eq=False)
class ConstSection:
    c: float

    def __post_init__(self):
        object.__setattr__(self, "c", float(self.c))

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.ndim <= 1:
            return self.c
        return np.full(xi.shape[0], self.c)

    def as_quadratic(self, k):
        return self.c, np.zeros(k), np.zeros((k, k))

    def same_as(self, other) -> bool:
        return isinstance(other, ConstSection) and other.c == self.c


@dataclass(frozen=True, eq=False)
class QuadraticSection:
    """``xi -> c + w.xi - xi.M.xi / 2`` with ``M`` symmetric PSD."""

    c: float
    w: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", float(self.c))
        w = self.w if isinstance(self.w, np.ndarray) and not self.w.flags.writeable else _ro(self.w)
        M = self.M if isinstance(self.M, np.ndarray) and not self.M.flags.writeable else _ro(self.M, ndim=2)
        M = M.reshape(len(w), len(w)) if M.size == len(w) ** 2 else M
        if M.shape != (len(w), len(w)):
            raise ValueError("M must be square with the dimension of w")
        if not np.allclose(M, M.T, rtol=0, atol=1e-12):
            raise ValueError("M must be symmetric")
        if len(w) and np.linalg.eigvalsh(M).min() < -1e-10 * max(1.0, np.abs(M).max()):
            raise ValueError("M must be positive semidefinite")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "M", M)

    def value(self, xi):
        return _boxquad.quad_value(self.c, self.w, self.M, xi)

    def as_quadratic(self, k):
        if k != len(self.w):
            raise DomainError(f"quadratic section has dimension {len(self.w)}, expected {k}")
        return self.c, np.asarray(self.w), np.asarray(self.M)

    def same_as(self, other) -> bool:
        return (
            isinstance(other, QuadraticSection)
            and other.c == self.c
            and np.array_equal(other.w, self.w)
            and np.array_equal(other.M, self.M)
        )


@dataclass(frozen=True, eq=False)
class GridSection:
    """Multilinear interpolation of samples on a rectilinear grid over K2."""

    grid: tuple
    values: np.ndarray
    _interp: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        grid = tuple(_ro(g) for g in self.grid)
        values = np.array(self.values, dtype=float)
        if values.shape != tuple(len(g) for g in grid):
            raise ValueError("values shape must match the grid")
        for g in grid:
            if len(g) < 2 or np.any(np.diff(g) <= 0):
                raise ValueError("each grid axis needs >= 2 strictly increasing points")
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_interp", RegularGridInterpolator(grid, values, method="linear"))

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.ndim <= 1:
            return float(self._interp(xi[None, :])[0])
        return self._interp(xi)

    def same_as(self, other) -> bool:
        return (
            isinstance(other, GridSection)
            and len(other.grid) == len(self.grid)
            and all(np.array_equal(a, b) for a, b in zip(self.grid, other.grid))
            and np.array_equal(other.values, self.values)
        )


Section = Union[ConstSection, QuadraticSection, GridSection]


# --------------------------------------------------------------------------
# processes in D_K^0


@dataclass(frozen=True, eq=False)
class PiecewiseProcess:
    """Step in ``t`` with a continuous section per stretch.

    ``jumps_neg`` is stored as ``a_{-1} > a_{-2} > ...`` and ``jumps_pos`` as
    ``a_1 < a_2 < ...``. ``sections`` run in increasing ``t``: index 0 is the
    leftmost stretch ``[lo, a_{-N_l})``. The point 0 is an index anchor only;
    sections may coincide across it.
    """

    rect: Rect
    jumps_neg: np.ndarray
    jumps_pos: np.ndarray
    sections: tuple

    def __post_init__(self):
        if not isinstance(self.rect, Rect):
            object.__setattr__(self, "rect", Rect(tuple(self.rect)))
        neg = _ro(self.jumps_neg)
        pos = _ro(self.jumps_pos)
        k1 = self.rect.k1
        if not k1.interior(0.0):
            raise DomainError("0 must lie strictly inside K1")
        if len(neg) and (np.any(neg >= 0) or np.any(np.diff(neg) >= 0) or neg[-1] <= k1.lo):
            raise DomainError("jumps_neg must be negative, decreasing and inside K1")
        if len(pos) and (np.any(pos <= 0) or np.any(np.diff(pos) <= 0) or pos[-1] >= k1.hi):
            raise DomainError("jumps_pos must be positive, increasing and inside K1")
        sections = tuple(self.sections)
        if len(sections) != len(neg) + len(pos) + 1:
            raise ValueError("need len(jumps_neg) + len(jumps_pos) + 1 sections")
        k = self.rect.d - 1
        for s in sections:
            if isinstance(s, QuadraticSection) and len(s.w) != k:
                raise DomainError("quadratic section dimension does not match K2")
            if isinstance(s, GridSection):
                if len(s.grid) != k:
                    raise DomainError("grid section dimension does not match K2")
                for g, ax in zip(s.grid, self.rect.k2):
                    if g[0] > ax.lo or g[-1] < ax.hi:
                        raise DomainError("grid section must span K2")
        breaks = np.r_[neg[::-1], pos]
        breaks.setflags(write=False)
        object.__setattr__(self, "jumps_neg", neg)
        object.__setattr__(self, "jumps_pos", pos)
        object.__setattr__(self, "sections", sections)
        object.__setattr__(self, "_breaks", breaks)

    @classmethod
    def from_breaks(cls, rect, breaks, sections) -> "PiecewiseProcess":
        breaks = np.asarray(breaks, dtype=float)
        if np.any(breaks == 0.0):
            raise DomainError("a jump at 0 cannot be represented (0 is the anchor)")
        return cls(rect, breaks[breaks < 0][::-1], breaks[breaks > 0], tuple(sections))

    @classmethod
    def from_step(cls, f: StepFn1D) -> "PiecewiseProcess":
        return cls.from_breaks(Rect((f.domain,)), f.jumps, [ConstSection(v) for v in f.values])

    @property
    def breaks(self) -> np.ndarray:
        """All jumps in increasing order."""
        return self._breaks

    @property
    def n_left(self) -> int:
        return len(self.jumps_neg)

    def stretch(self, i: int) -> Interval:
        """Closure of the ``i``-th stretch in storage order."""
        edges = np.r_[self.rect.k1.lo, self._breaks, self.rect.k1.hi]
        return Interval(edges[i], edges[i + 1])

    def section_index(self, t: float) -> int:
        return int(np.searchsorted(self._breaks, t, side="right"))

    def __call__(self, t, xi=()):
        return evaluate(self, t, xi)


def evaluate(psi: PiecewiseProcess, t: float, xi=()) -> float:
    """Value of ``psi`` at ``(t, xi)`` with the càdlàg convention in ``t``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if not psi.rect.contains(t, xi):
        raise DomainError(f"({t}, {xi}) outside the rectangle")
    return float(psi.sections[psi.section_index(t)].value(xi))


def quadrant_limits_1d(f: StepFn1D, t: float) -> tuple[float, float]:
    """(left limit, right limit) of a step function at ``t``."""
    if not f.domain.contains(t):
        raise DomainError(f"t={t} outside the domain")
    return f.left_limit(t), f(t)


# --------------------------------------------------------------------------
# pure jump functions


@dataclass(frozen=True, eq=False)
class PureJumpFn:
    """Unit-jump counting function with value 0 at the origin."""

    domain: Interval
    jumps_neg: np.ndarray
    jumps_pos: np.ndarray

    def __post_init__(self):
        if not isinstance(self.domain, Interval):
            object.__setattr__(self, "domain", Interval(*self.domain))
        if not self.domain.interior(0.0):
            raise DomainError("0 must lie strictly inside the domain of a pure jump function")
        neg, pos = _ro(self.jumps_neg), _ro(self.jumps_pos)
        if len(neg) and (np.any(neg >= 0) or np.any(np.diff(neg) >= 0) or neg[-1] <= self.domain.lo):
            raise DomainError("jumps_neg must be negative, decreasing and inside the domain")
        if len(pos) and (np.any(pos <= 0) or np.any(np.diff(pos) <= 0) or pos[-1] >= self.domain.hi):
            raise DomainError("jumps_pos must be positive, increasing and inside the domain")
        object.__setattr__(self, "jumps_neg", neg)
        object.__setattr__(self, "jumps_pos", pos)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.domain.lo) or np.any(t_arr > self.domain.hi):
            raise DomainError("t outside the domain")
        right = np.searchsorted(self.jumps_pos, t_arr, side="right")
        # jumps_neg is decreasing: count entries strictly greater than t
        left = np.sum(self.jumps_neg[None, :] > np.atleast_1d(t_arr)[:, None], axis=1)
        out = right + left.reshape(np.shape(right))
        return int(out) if np.ndim(out) == 0 else out

    def to_step(self) -> StepFn1D:
        breaks = np.r_[self.jumps_neg[::-1], self.jumps_pos]
        nl = len(self.jumps_neg)
        values = np.r_[np.arange(nl, 0, -1), 0, np.arange(1, len(self.jumps_pos) + 1)].astype(float)
        return StepFn1D(self.domain, breaks, values)


def pure_jump_of(psi: Union[PiecewiseProcess, StepFn1D]) -> PureJumpFn:
    """Pure jump function recording where ``psi`` jumps.

    Processes contribute their stored jump lists (representation dependent);
    step functions contribute their actual discontinuities.
    """
    if isinstance(psi, PiecewiseProcess):
        return PureJumpFn(psi.rect.k1, psi.jumps_neg, psi.jumps_pos)
    if isinstance(psi, StepFn1D):
        jumps = psi.canonical().jumps
        if np.any(jumps == 0.0):
            raise DomainError("step function jumps at 0; 0 must separate the one-sided jump sequences")
        return PureJumpFn(psi.domain, jumps[jumps < 0][::-1], jumps[jumps > 0])
    raise TypeError(f"unsupported type {type(psi).__name__}")


# --------------------------------------------------------------------------
# time warps


@dataclass(frozen=True, eq=False)
class TimeWarp:
    """Strictly increasing piecewise-linear bijection of an interval onto itself."""

    domain: Interval
    knots_s: np.ndarray
    knots_u: np.ndarray

    def __post_init__(self):
        if not isinstance(self.domain, Interval):
            object.__setattr__(self, "domain", Interval(*self.domain))
        s, u = _ro(self.knots_s), _ro(self.knots_u)
        if len(s) != len(u) or len(s) < 2:
            raise ValueError("need matching knot arrays with at least two knots")
        lo, hi = self.domain.lo, self.domain.hi
        if s[0] != lo or s[-1] != hi or u[0] != lo or u[-1] != hi:
            raise ValueError("a warp must fix both endpoints of its domain")
        if np.any(np.diff(s) <= 0) or np.any(np.diff(u) <= 0):
            raise ValueError("a warp must be strictly increasing")
        object.__setattr__(self, "knots_s", s)
        object.__setattr__(self, "knots_u", u)
        # interpolation through (lo, lo), (hi, hi) is not exact in floating point
        object.__setattr__(self, "_trivial", bool(np.array_equal(s, u)))

    @classmethod
    def identity(cls, domain) -> "TimeWarp":
        d = domain if isinstance(domain, Interval) else Interval(*domain)
        return cls(d, [d.lo, d.hi], [d.lo, d.hi])

    @classmethod
    def from_knots(cls, domain, knots) -> "TimeWarp":
        knots = np.asarray(knots, dtype=float).reshape(-1, 2)
        return cls(domain, knots[:, 0], knots[:, 1])

    @property
    def knots(self) -> np.ndarray:
        return np.column_stack([self.knots_s, self.knots_u])

    def __call__(self, t):
        if self._trivial:
            out = np.array(t, dtype=float)
        else:
            out = np.interp(t, self.knots_s, self.knots_u)
        return float(out) if np.ndim(out) == 0 else out

    def inverse(self, u):
        if self._trivial:
            out = np.array(u, dtype=float)
        else:
            out = np.interp(u, self.knots_u, self.knots_s)
        return float(out) if np.ndim(out) == 0 else out


def warp_norm(lam: TimeWarp) -> float:
    """``sup_{s != t} |log((lam(t) - lam(s)) / (t - s))|``.

    For piecewise-linear warps every chord slope is a convex combination of
    segment slopes, so the supremum is the largest segment value.
    """
    slopes = np.diff(lam.knots_u) / np.diff(lam.knots_s)
    return float(np.max(np.abs(np.log(slopes))))


def apply_warp(f: StepFn1D, lam: TimeWarp) -> StepFn1D:
    """``t -> f(lam(t))``: same values, jumps moved to ``lam^{-1}(jumps)``."""
    if lam.domain != f.domain:
        raise DomainError("warp and function live on different intervals")
    return StepFn1D(f.domain, np.atleast_1d(lam.inverse(f.jumps)), f.values)


# --------------------------------------------------------------------------
# sup-norm distances


def _gap_mesh(sections, box_lo, box_hi):
    axes = []
    for j, (a, b) in enumerate(zip(box_lo, box_hi)):
        pts = [np.linspace(a, b, GAP_MESH)]
        for s in sections:
            if isinstance(s, GridSection):
                g = s.grid[j]
                pts.append(g[(g >= a) & (g <= b)])
        axes.append(np.unique(np.concatenate(pts)))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def section_gap(V: Section, W: Section, box_lo, box_hi) -> float:
    """``sup_xi |V(xi) - W(xi)|`` over the box ``K2``.

    Exact when neither section is a grid (face enumeration of the quadratic
    difference), and for two grid sections sharing one grid (the difference is
    multilinear per cell, so its extremes sit on vertices). Otherwise the sup is
    taken over a dense mesh: ``GAP_MESH`` points per axis plus every grid node.
    """
    box_lo = np.asarray(box_lo, dtype=float)
    box_hi = np.asarray(box_hi, dtype=float)
    k = len(box_lo)
    if not isinstance(V, GridSection) and not isinstance(W, GridSection):
        cv, wv, Mv = V.as_quadratic(k)
        cw, ww, Mw = W.as_quadratic(k)
        if k > _boxquad.FACE_ENUM_MAX_DIM + 3:
            pts = _gap_mesh((V, W), box_lo, box_hi)
            return float(np.max(np.abs(V.value(pts) - W.value(pts))))
        return float(_boxquad.abs_sup(cv - cw, wv - ww, Mv - Mw, box_lo, box_hi))
    if (
        isinstance(V, GridSection)
        and isinstance(W, GridSection)
        and all(np.array_equal(a, b) for a, b in zip(V.grid, W.grid))
        and all(g[0] == a and g[-1] == b for g, a, b in zip(V.grid, box_lo, box_hi))
    ):
        return float(np.max(np.abs(V.values - W.values)))
    pts = _gap_mesh((V, W), box_lo, box_hi)
    return float(np.max(np.abs(V.value(pts) - W.value(pts))))


class _GapTable:
    """Lazily computed ``section_gap`` for every pair of stretches."""

    def __init__(self, f: PiecewiseProcess, g: PiecewiseProcess):
        self.f, self.g = f, g
        self.lo, self.hi = f.rect.k2_lo, f.rect.k2_hi
        self._cache: dict = {}

    def __call__(self, i, j):
        key = (i, j)
        if key not in self._cache:
            self._cache[key] = section_gap(self.f.sections[i], self.g.sections[j], self.lo, self.hi)
        return self._cache[key]

    def matrix(self):
        nf, ng = len(self.f.sections), len(self.g.sections)
        return np.array([[self(i, j) for j in range(ng)] for i in range(nf)])


def sup_dist(f, g) -> float:
    """Exact ``sup |f - g|`` for two step functions or two processes."""
    if isinstance(f, StepFn1D) and isinstance(g, StepFn1D):
        if f.domain != g.domain:
            raise DomainError("functions live on different intervals")
        pts = np.unique(np.r_[f.domain.lo, f.jumps, g.jumps])
        return float(np.max(np.abs(f(pts) - g(pts))))
    if isinstance(f, PiecewiseProcess) and isinstance(g, PiecewiseProcess):
        if f.rect != g.rect:
            raise DomainError("processes live on different rectangles")
        gaps = _GapTable(f, g)
        pts = np.unique(np.r_[f.rect.k1.lo, f.breaks, g.breaks])
        fi = np.searchsorted(f.breaks, pts, side="right")
        gj = np.searchsorted(g.breaks, pts, side="right")
        return float(max(gaps(i, j) for i, j in set(zip(fi.tolist(), gj.tolist()))))
    raise TypeError("sup_dist needs two StepFn1D or two PiecewiseProcess")


# --------------------------------------------------------------------------
# Skorohod distance by free-space search


def warp_objective(xf, yg, cost, lam: TimeWarp) -> float:
    """``warp_norm(lam) + sup_t cost[i(t), j(lam(t))]`` re-evaluated exactly.

    ``i(t)`` / ``j(u)`` index the stretches cut by the breakpoints ``xf`` / ``yg``.
    """
    xf = np.asarray(xf, dtype=float)
    ginv = np.atleast_1d(lam.inverse(np.asarray(yg, dtype=float)))
    pts = np.unique(np.r_[lam.domain.lo, xf, ginv])
    pts = pts[pts < lam.domain.hi]
    i = np.searchsorted(xf, pts, side="right")
    j = np.searchsorted(ginv, pts, side="right")
    return warp_norm(lam) + float(np.max(cost[i, j]))


def _merge(intervals, tol):
    if len(intervals) <= 1:
        return intervals
    intervals.sort()
    out = [list(intervals[0])]
    for a, b in intervals[1:]:
        if a <= out[-1][1] + tol:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [tuple(x) for x in out]


class _FreeSpace:
    """Monotone paths through the cells ``[x_i, x_i+1) x [y_j, y_j+1)``.

    Cell ``(i, j)`` is free when ``cost[i, j] <= eps``. A warp with every slope
    in ``[exp(-eta), exp(eta)]`` and ``sup cost <= eps`` exists iff a monotone
    path with those slopes runs from ``(lo, lo)`` to ``(hi, hi)`` through free
    cells. Reachable entry sets are kept per cell edge as interval lists,
    together with a flag for entry through the lower-left corner.
    """

    def __init__(self, lo, hi, xf, yg, cost):
        self.X = np.r_[lo, xf, hi]
        self.Y = np.r_[lo, yg, hi]
        self.cost = cost
        self.nf, self.ng = cost.shape
        # tolerance scaled to the smallest cell so that tiny stretches keep
        # their geometry, floored so that it never vanishes
        extent = np.r_[np.diff(self.X), np.diff(self.Y)]
        self.tol = 1e-12 * max(float(extent.min()), 1e-9 * (hi - lo))

    def run(self, eps, eta, keep=False):
        nf, ng, X, Y, tol = self.nf, self.ng, self.X, self.Y, self.tol
        m, M = math.exp(-eta), math.exp(eta)
        free = self.cost <= eps
        L = [[[] for _ in range(ng)] for _ in range(nf)]
        B = [[[] for _ in range(ng)] for _ in range(nf)]
        C = np.zeros((nf, ng), dtype=bool)
        C[0, 0] = free[0, 0]
        for i in range(nf):
            w = X[i + 1] - X[i]
            for j in range(ng):
                if not free[i, j]:
                    continue
                left = _merge(L[i][j], tol)
                bottom = _merge(B[i][j], tol)
                L[i][j], B[i][j] = left, bottom
                if not (left or bottom or C[i, j]):
                    continue
                h = Y[j + 1] - Y[j]
                rel_left = [(a - Y[j], b - Y[j]) for a, b in left]
                if C[i, j]:
                    rel_left.append((0.0, 0.0))
                rel_bottom = [(c - X[i], d - X[i]) for c, d in bottom]
                right_out, top_out, corner = [], [], False
                for a, b in rel_left:
                    right_out.append((a + m * w, b + M * w))
                    top_out.append(((h - b) / M, (h - a) / m))
                    if a <= h - m * w + tol and b >= h - M * w - tol:
                        corner = True
                for c, d in rel_bottom:
                    right_out.append((m * (w - d), M * (w - c)))
                    top_out.append((c + h / M, d + h / m))
                    if c <= w - h / M + tol and d >= w - h / m - tol:
                        corner = True
                if corner:
                    if i + 1 == nf and j + 1 == ng:
                        if keep:
                            self.state = (L, B, C, m, M)
                        return True
                    if i + 1 < nf and j + 1 < ng:
                        C[i + 1, j + 1] = True
                if i + 1 < nf:
                    for p, q in right_out:
                        p, q = max(p, 0.0), min(q, h)
                        if p < h and p <= q + tol:
                            L[i + 1][j].append((Y[j] + p, Y[j] + max(p, q)))
                if j + 1 < ng:
                    for p, q in top_out:
                        p, q = max(p, 0.0), min(q, w)
                        if p < w and p <= q + tol:
                            B[i][j + 1].append((X[i] + p, X[i] + max(p, q)))
        return False

    def path(self):
        """Backtrack one feasible path from the last successful ``run(keep=True)``."""
        L, B, C, m, M = self.state
        X, Y, tol = self.X, self.Y, self.tol
        i, j = self.nf - 1, self.ng - 1
        pt, pu = X[-1], Y[-1]
        points = [(pt, pu)]
        while True:
            x0, y0 = X[i], Y[j]
            dt, du = pt - x0, pu - y0
            if C[i, j] and m * dt - tol <= du <= M * dt + tol:
                points.append((x0, y0))
                if i == 0 and j == 0:
                    break
                i, j = i - 1, j - 1
                pt, pu = x0, y0
                continue
            step = None
            for a, b in L[i][j]:
                lo_u, hi_u = max(a, pu - M * dt), min(b, pu - m * dt)
                if lo_u <= hi_u + tol:
                    step = ("L", 0.5 * (lo_u + min(hi_u, max(lo_u, hi_u))))
                    break
            if step is None:
                for c, d in B[i][j]:
                    lo_t = max(c, pt - du / m) if du > 0 else max(c, pt)
                    hi_t = min(d, pt - du / M)
                    if lo_t <= hi_t + tol:
                        step = ("B", 0.5 * (lo_t + max(lo_t, hi_t)))
                        break
            if step is None:
                raise RuntimeError("free-space backtracking lost the path")
            kind, val = step
            if kind == "L":
                pt, pu = x0, val
                i -= 1
            else:
                pt, pu = val, y0
                j -= 1
            points.append((pt, pu))
        pts = np.array(points[::-1])
        keep = np.r_[True, (np.diff(pts[:, 0]) > 0) & (np.diff(pts[:, 1]) > 0)]
        pts = pts[keep]
        pts[-1] = (X[-1], Y[-1])
        return pts


def _extract_warp(space: _FreeSpace, domain: Interval, eps, eta):
    # at the exact bisection limit the reachable edge sets can be degenerate
    # and backtracking may lose them; widen the budget a hair at a time
    for slack in PATH_SLACKS:
        if not space.run(eps, eta + slack * max(1.0, eta), keep=True):
            continue
        try:
            return TimeWarp.from_knots(domain, space.path())
        except (RuntimeError, ValueError):
            continue
    return None


def _warp_search(domain: Interval, xf, yg, cost):
    """Infimum over warps of ``warp_norm + sup cost`` and a certificate warp.

    The sup term only takes values in ``cost``; for each candidate level
    ``eps`` the smallest feasible log-slope budget is found by bisection, the
    path is extracted and its objective re-evaluated, so the returned value is
    always attained by the returned warp.
    """
    xf = np.asarray(xf, dtype=float)
    yg = np.asarray(yg, dtype=float)
    identity = TimeWarp.identity(domain)
    best_warp = identity
    best = warp_objective(xf, yg, cost, identity)
    space = _FreeSpace(domain.lo, domain.hi, xf, yg, cost)
    for eps in np.unique(cost):
        budget = best - eps
        if budget <= WARP_BISECT_TOL:
            break
        if not space.run(eps, budget):
            continue
        lo, hi = 0.0, budget
        while hi - lo > WARP_BISECT_TOL:
            mid = 0.5 * (lo + hi)
            if space.run(eps, mid):
                hi = mid
            else:
                lo = mid
        lam = _extract_warp(space, domain, eps, hi)
        if lam is None:
            continue
        val = warp_objective(xf, yg, cost, lam)
        if val < best:
            best, best_warp = val, lam
    return best, best_warp


def skorohod_dist_1d(f: StepFn1D, g: StepFn1D, return_warp: bool = False):
    """Skorohod distance ``inf_lam { |||lam||| + ||f - g o lam|| }`` of two step functions."""
    if f.domain != g.domain:
        raise DomainError("functions live on different intervals")
    cost = np.abs(f.values[:, None] - g.values[None, :])
    val, lam = _warp_search(f.domain, f.jumps, g.jumps, cost)
    return (val, lam) if return_warp else val


def tilde_dist(f: PiecewiseProcess, g: PiecewiseProcess) -> tuple[float, TimeWarp]:
    """Upper bound on the first-coordinate-warp metric with its certificate.

    The bound is the objective of the returned warp, re-evaluated. It is exact
    up to the bisection tolerance whenever the section gaps are exact.
    """
    if f.rect != g.rect:
        raise DomainError("processes live on different rectangles")
    cost = _GapTable(f, g).matrix()
    return _warp_search(f.rect.k1, f.breaks, g.breaks, cost)


# --------------------------------------------------------------------------
# JSON round trip


def _interval_dict(iv: Interval):
    return {"lo": iv.lo, "hi": iv.hi}


def _section_dict(s: Section):
    if isinstance(s, ConstSection):
        return {"kind": "const", "c": s.c}
    if isinstance(s, QuadraticSection):
        return {"kind": "quadratic", "c": s.c, "w": s.w.tolist(), "M": s.M.tolist()}
    return {"kind": "grid", "grid": [g.tolist() for g in s.grid], "values": s.values.tolist()}


def _section_from(d):
    kind = d["kind"]
    if kind == "const":
        return ConstSection(d["c"])
    if kind == "quadratic":
        w = np.asarray(d["w"], dtype=float)
        return QuadraticSection(d["c"], w, np.asarray(d["M"], dtype=float).reshape(len(w), len(w)))
    if kind == "grid":
        return GridSection(tuple(d["grid"]), np.asarray(d["values"], dtype=float))
    raise ValueError(f"unknown section kind {kind!r}")


def to_dict(obj) -> dict:
    """Plain-dict form with fields named as in the type definitions."""
    if isinstance(obj, StepFn1D):
        return {
            "type": "StepFn1D",
            "domain": _interval_dict(obj.domain),
            "jumps": obj.jumps.tolist(),
            "values": obj.values.tolist(),
        }
    if isinstance(obj, PiecewiseProcess):
        return {
            "type": "PiecewiseProcess",
            "rect": {"axes": [_interval_dict(a) for a in obj.rect.axes]},
            "jumps_neg": obj.jumps_neg.tolist(),
            "jumps_pos": obj.jumps_pos.tolist(),
            "sections": [_section_dict(s) for s in obj.sections],
        }
    if isinstance(obj, PureJumpFn):
        return {
            "type": "PureJumpFn",
            "domain": _interval_dict(obj.domain),
            "jumps_neg": obj.jumps_neg.tolist(),
            "jumps_pos": obj.jumps_pos.tolist(),
        }
    if isinstance(obj, TimeWarp):
        return {"type": "TimeWarp", "domain": _interval_dict(obj.domain), "knots": obj.knots.tolist()}
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def from_dict(d: dict):
    kind = d.get("type")
    if kind == "StepFn1D":
        return StepFn1D(Interval(**d["domain"]), d["jumps"], d["values"])
    if kind == "PiecewiseProcess":
        rect = Rect(tuple(Interval(**a) for a in d["rect"]["axes"]))
        return PiecewiseProcess(rect, d["jumps_neg"], d["jumps_pos"], tuple(_section_from(s) for s in d["sections"]))
    if kind == "PureJumpFn":
        return PureJumpFn(Interval(**d["domain"]), d["jumps_neg"], d["jumps_pos"])
    if kind == "TimeWarp":
        return TimeWarp.from_knots(Interval(**d["domain"]), d["knots"])
    raise ValueError(f"unknown object type {kind!r}")
