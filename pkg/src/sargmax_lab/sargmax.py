"""Maximizer sets and the smallest/largest argmax of step-in-time processes.

A maximizer of a process in ``D_K^0`` is any point where some quadrant limit
reaches the supremum. In ``t`` the process is constant on each stretch
``[a_k, a_{k+1})`` and the left limit at ``a_{k+1}`` still sees section ``k``,
so the maximizer set is a finite union of closed stretches times the argmax
set of the winning sections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _boxquad
from .skorohod import (
    ConstSection,
    GridSection,
    Interval,
    PiecewiseProcess,
    QuadraticSection,
    StepFn1D,
)

__all__ = [
    "SectionMax",
    "FlatMax",
    "MaximizerReport",
    "section_argmax",
    "maximizer_set",
    "sargmax",
    "largmax",
    "check_unique_flat_max",
    "report_to_dict",
]


@dataclass(frozen=True)
class SectionMax:
    value: float
    lexmin: np.ndarray
    lexmax: np.ndarray
    unique: bool


@dataclass(frozen=True)
class FlatMax:
    stretch_closed: Interval
    section_index: int
    sup_value: float
    section_argmax: np.ndarray


@dataclass(frozen=True)
class MaximizerReport:
    global_sup: float
    flats: tuple
    sargmax_point: np.ndarray
    largmax_point: np.ndarray
    unique_flat: bool


def _grid_vertices(section: GridSection, lo, hi):
    # the interpolant is multilinear on every cell of the grid refined by the
    # box faces, so its extremes over the box sit on these vertices
    axes = []
    for g, a, b in zip(section.grid, lo, hi):
        axes.append(np.unique(np.r_[a, g[(g > a) & (g < b)], b]))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def section_argmax(section, lo, hi) -> SectionMax:
    """Max of one section over the box ``[lo, hi]`` and its lexicographic extremes.

    For grid sections both extremes are vertices: along any axis-parallel
    segment inside a cell the interpolant is affine, so a maximizer in the
    relative interior of such a segment makes the whole segment maximal and
    the lexicographic search can always slide to a vertex.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    k = len(lo)
    if isinstance(section, ConstSection):
        return SectionMax(section.c, lo.copy(), hi.copy(), k == 0)
    if isinstance(section, QuadraticSection):
        value, xmin, xmax, unique = _boxquad.concave_argmax(section.c, section.w, section.M, lo, hi)
        return SectionMax(float(value), np.asarray(xmin, dtype=float), np.asarray(xmax, dtype=float), unique)
    if isinstance(section, GridSection):
        pts = _grid_vertices(section, lo, hi)
        vals = section.value(pts)
        best = float(vals.max())
        hits = pts[vals == best]
        # lexsort keys run from last to first
        order = np.lexsort(hits.T[::-1])
        return SectionMax(best, hits[order[0]].copy(), hits[order[-1]].copy(), len(hits) == 1)
    raise TypeError(f"unsupported section {type(section).__name__}")


def _pieces(psi):
    """Sections, stretch edges and the K2 box of a process or step function."""
    if isinstance(psi, PiecewiseProcess):
        k1 = psi.rect.k1
        return psi.sections, np.r_[k1.lo, psi.breaks, k1.hi], psi.rect.k2_lo, psi.rect.k2_hi
    if isinstance(psi, StepFn1D):
        edges = np.r_[psi.domain.lo, psi.jumps, psi.domain.hi]
        return tuple(ConstSection(v) for v in psi.values), edges, np.zeros(0), np.zeros(0)
    raise TypeError(f"unsupported type {type(psi).__name__}")


def maximizer_set(psi, tie_tol: float = 0.0) -> MaximizerReport:
    """Attaining flats of a :class:`PiecewiseProcess` or a :class:`StepFn1D`.

    Step functions are handled directly, so their domain need not contain 0.
    """
    if tie_tol < 0:
        raise ValueError("tie_tol must be nonnegative")
    sections, edges, lo, hi = _pieces(psi)
    maxima = [section_argmax(s, lo, hi) for s in sections]
    sups = np.array([m.value for m in maxima])
    global_sup = float(sups.max())
    hit = np.flatnonzero(sups >= global_sup - tie_tol)

    # merge runs of adjacent attaining stretches that carry the same section
    groups = [[int(hit[0])]]
    for i in hit[1:]:
        prev = groups[-1][-1]
        if i == prev + 1 and sections[i].same_as(sections[prev]):
            groups[-1].append(int(i))
        else:
            groups.append([int(i)])

    flats = []
    for g in groups:
        closed = Interval(float(edges[g[0]]), float(edges[g[-1] + 1]))
        flats.append(FlatMax(closed, g[0], float(sups[g[0]]), maxima[g[0]].lexmin))
    first_max = maxima[groups[0][0]]
    last_max = maxima[groups[-1][-1]]
    s_point = np.r_[flats[0].stretch_closed.lo, first_max.lexmin]
    l_point = np.r_[flats[-1].stretch_closed.hi, last_max.lexmax]
    unique = len(flats) == 1 and first_max.unique
    return MaximizerReport(global_sup, tuple(flats), s_point, l_point, unique)


def sargmax(psi) -> np.ndarray:
    """Smallest maximizer: first coordinate ``t``, then the K2 axes in order."""
    return maximizer_set(psi).sargmax_point


def largmax(psi) -> np.ndarray:
    """Largest maximizer, the mirror of :func:`sargmax`."""
    return maximizer_set(psi).largmax_point


def check_unique_flat_max(psi, tie_tol: float = 0.0) -> bool:
    """One attaining flat whose section has a single maximizer over K2."""
    return maximizer_set(psi, tie_tol).unique_flat


def report_to_dict(rep: MaximizerReport) -> dict:
    return {
        "global_sup": rep.global_sup,
        "flats": [
            {
                "stretch_closed": {"lo": f.stretch_closed.lo, "hi": f.stretch_closed.hi},
                "section_index": f.section_index,
                "sup_value": f.sup_value,
                "section_argmax": f.section_argmax.tolist(),
            }
            for f in rep.flats
        ],
        "sargmax_point": rep.sargmax_point.tolist(),
        "largmax_point": rep.largmax_point.tolist(),
        "unique_flat": rep.unique_flat,
    }
