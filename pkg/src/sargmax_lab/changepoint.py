"""Least-squares change-point regression with a random design.

Model: ``Y = alpha0 * 1{Z <= zeta0} + beta0 * 1{Z > zeta0} + eps``. The
criterion is ``M_n(theta) = -(1/n) sum (y - alpha 1{z <= zeta} - beta 1{z > zeta})^2``
and the estimator is its smallest maximizer over ``[c1, c2] x R^2``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy import stats

from . import kernels
from ._io import atomic_write_text, csv_text
from .processes import NormalError, Rng, StudentTError
from .skorohod import PiecewiseProcess, PureJumpFn, QuadraticSection, Rect

__all__ = [
    "UniformZ",
    "TruncNormalZ",
    "ChangePointModel",
    "Dataset",
    "CpEstimate",
    "simulate_cp",
    "objective_mn",
    "fit_cp",
    "candidate_splits",
    "localized_process",
    "DEFAULT_WINDOW",
]

DEFAULT_WINDOW = ((-20.0, 20.0), (-10.0, 10.0), (-10.0, 10.0))


@dataclass(frozen=True)
class UniformZ:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")

    def pdf(self, z):
        return np.where((np.asarray(z) >= self.lo) & (np.asarray(z) <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def cdf(self, z):
        return np.clip((np.asarray(z, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def sample(self, gen, size):
        return gen.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class TruncNormalZ:
    mu: float
    sd: float
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.sd > 0 and self.lo < self.hi):
            raise ValueError("need sd > 0 and lo < hi")

    @property
    def _law(self):
        return stats.truncnorm((self.lo - self.mu) / self.sd, (self.hi - self.mu) / self.sd, loc=self.mu, scale=self.sd)

    def pdf(self, z):
        return self._law.pdf(z)

    def cdf(self, z):
        return self._law.cdf(z)

    def sample(self, gen, size):
        # inverse transform keeps one uniform per draw
        return self._law.ppf(gen.uniform(0.0, 1.0, size))


ZLaw = Union[UniformZ, TruncNormalZ]


@dataclass(frozen=True)
class ChangePointModel:
    zeta0: float
    alpha0: float
    beta0: float
    c1: float
    c2: float
    z_law: ZLaw
    eps_law: Union[NormalError, StudentTError]

    def __post_init__(self):
        if not self.c1 < self.zeta0 < self.c2:
            raise ValueError("need c1 < zeta0 < c2")
        if self.alpha0 == self.beta0:
            raise ValueError("alpha0 == beta0: the model has no change-point")
        if not (self.z_law.cdf(self.c1) > 0 and self.z_law.cdf(self.c2) < 1):
            raise ValueError("Z must put mass below c1 and above c2")
        if not self.z_law.pdf(self.zeta0) > 0:
            raise ValueError("the density of Z must be positive at zeta0")

    @property
    def theta0(self):
        return (self.zeta0, self.alpha0, self.beta0)


class Dataset:
    """Rows ``(y, z)`` with pairwise distinct ``z``."""

    def __init__(self, y, z):
        y = np.array(y, dtype=float)
        z = np.array(z, dtype=float)
        if y.ndim != 1 or y.shape != z.shape:
            raise ValueError("y and z must be one-dimensional with equal length")
        if len(y) == 0:
            raise ValueError("empty dataset")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise ValueError("non-finite values in dataset")
        order = np.argsort(z, kind="stable")
        if np.any(np.diff(z[order]) == 0):
            raise ValueError("tied z values")
        for a in (y, z, order):
            a.setflags(write=False)
        self.y, self.z, self.order = y, z, order

    def __len__(self):
        return len(self.y)

    @property
    def z_sorted(self):
        return self.z[self.order]

    @property
    def y_sorted(self):
        return self.y[self.order]

    def to_csv(self, path=None) -> str:
        text = csv_text(["y", "z"], zip(self.y.tolist(), self.z.tolist()))
        if path is not None:
            atomic_write_text(path, text)
        return text

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        return cls.from_csv_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def from_csv_text(cls, text: str) -> "Dataset":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or not {"y", "z"} <= set(reader.fieldnames):
            raise ValueError("CSV needs columns y,z")
        rows = list(reader)
        return cls([float(r["y"]) for r in rows], [float(r["z"]) for r in rows])


@dataclass(frozen=True)
class CpEstimate:
    zeta: float
    alpha: float
    beta: float
    objective_value: float


def simulate_cp(model: ChangePointModel, n: int, rng: Rng) -> Dataset:
    if n < 2:
        raise ValueError("n must be at least 2")
    z = model.z_law.sample(rng.gen, n)
    eps = model.eps_law.sample(rng.gen, n)
    y = np.where(z <= model.zeta0, model.alpha0, model.beta0) + eps
    return Dataset(y, z)


def objective_mn(data: Dataset, zeta, alpha, beta) -> float:
    r = data.y - np.where(data.z <= zeta, alpha, beta)
    return -float(np.mean(r * r))


def _side_means(data: Dataset, zeta):
    left = data.z <= zeta
    overall = float(np.mean(data.y))
    alpha = float(np.mean(data.y[left])) if left.any() else overall
    beta = float(np.mean(data.y[~left])) if not left.all() else overall
    return alpha, beta


def candidate_splits(data: Dataset, c1, c2) -> np.ndarray:
    """``{c1}`` together with every observed ``z`` in ``[c1, c2]``, ascending."""
    zs = data.z_sorted
    inside = zs[(zs >= c1) & (zs <= c2)]
    return np.unique(np.r_[float(c1), inside])


def fit_cp(data: Dataset, c1: float, c2: float) -> CpEstimate:
    """Smallest maximizer of the profiled criterion over ``[c1, c2]``.

    Scores come from running sums; every split within a small band of the
    best score is re-scored directly so that the winner and its value do not
    depend on summation order.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    if not c1 < c2:
        raise ValueError("need c1 < c2")
    cands = candidate_splits(data, c1, c2)
    n_left = np.searchsorted(data.z_sorted, cands, side="right").astype(np.int64)
    scores = kernels.cp_profile(np.ascontiguousarray(data.y_sorted), n_left)
    band = 1e-9 * (float(np.mean(data.y * data.y)) + 1.0)
    near = np.flatnonzero(scores >= scores.max() - band)
    best = None
    for i in near:
        a, b = _side_means(data, cands[i])
        val = objective_mn(data, cands[i], a, b)
        if best is None or val > best.objective_value:
            best = CpEstimate(float(cands[i]), a, b, val)
    return best


def localized_process(data: Dataset, theta0, H: Rect | None = None, bounds=None):
    """Rescaled criterion ``n P_n[m_theta - m_theta0]`` around ``theta0``.

    The local parameter is ``(zeta0 + h1/n, alpha0 + h2/sqrt(n), beta0 + h3/sqrt(n))``.
    Observation ``i`` changes side at ``h1 = n (z_i - zeta0)``; between
    crossings the process is an exact concave quadratic in ``(h2, h3)``.
    Returns the process and the pure jump function of its crossings.
    """
    zeta0, alpha0, beta0 = (float(v) for v in theta0)
    H = Rect.of(*DEFAULT_WINDOW) if H is None else H
    if H.d != 3:
        raise ValueError("the window must be three-dimensional (h1, h2, h3)")
    n = len(data)
    lo, hi = H.k1.lo, H.k1.hi
    if bounds is not None:
        c1, c2 = bounds
        if zeta0 + lo / n < c1 or zeta0 + hi / n > c2:
            raise ValueError("window reaches outside the parameter set")

    zs, ys = data.z_sorted, data.y_sorted
    hz = n * (zs - zeta0)
    if np.any(hz == 0.0):
        raise ValueError("an observation sits exactly at zeta0")
    ra, rb = ys - alpha0, ys - beta0
    win = (hz > lo) & (hz < hi)
    n_out_left = int(np.sum(hz <= lo))
    s = hz[win]
    # change in the constant when a window point sits on the other side
    d_pos = np.where(s > 0, rb[win] ** 2 - ra[win] ** 2, 0.0)
    d_neg = np.where(s < 0, ra[win] ** 2 - rb[win] ** 2, 0.0)
    m = len(s)
    c = np.r_[0.0, np.cumsum(d_pos)] + (np.r_[np.cumsum(d_neg[::-1])[::-1], 0.0])
    n_left = n_out_left + np.arange(m + 1)
    ra_cum = np.r_[0.0, np.cumsum(ra)]
    rb_cum = np.r_[0.0, np.cumsum(rb)]
    sum_left = ra_cum[n_left]
    sum_right = rb_cum[-1] - rb_cum[n_left]
    scale = 2.0 / math.sqrt(n)
    sections = []
    for k in range(m + 1):
        w = np.array([scale * sum_left[k], scale * sum_right[k]])
        M = np.diag([2.0 * n_left[k] / n, 2.0 * (n - n_left[k]) / n])
        sections.append(QuadraticSection(c[k], w, M))
    psi = PiecewiseProcess.from_breaks(H, s, sections)
    return psi, PureJumpFn(H.k1, s[s < 0][::-1], s[s > 0])
