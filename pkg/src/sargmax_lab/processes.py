"""Two-sided compound Poisson processes and the quadratic-plus-jump limit form."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import kernels
from .skorohod import Interval, PiecewiseProcess, QuadraticSection, Rect, StepFn1D

__all__ = [
    "MASK64",
    "mix_seed",
    "Rng",
    "NormalError",
    "StudentTError",
    "Normal",
    "Shifted",
    "PointMass",
    "CompoundPoissonSpec",
    "LimitProcessSpec",
    "NonConvergenceError",
    "sample_cpp",
    "sample_limit_process",
    "sargmax_of_cpp_adaptive",
    "default_initial_horizon",
    "derive_cp_limit_spec",
    "law_to_dict",
    "law_from_dict",
    "cpp_spec_to_dict",
    "cpp_spec_from_dict",
]

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
# events drawn per refill; fixed so that longer horizons extend a path
CHUNK = 64


def mix_seed(master: int, index: int) -> int:
    """64-bit multiply-xor-shift cascade (splitmix64 finaliser) of ``master ^ index``."""
    z = ((int(master) ^ int(index)) + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class Rng:
    """Seeded PCG64 stream; ``child(k)`` derives an independent sub-stream."""

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, index: int) -> "Rng":
        return Rng(mix_seed(self.seed, index))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def exponential(self, scale=1.0, size=None):
        return self.gen.exponential(scale, size)

    def __repr__(self):
        return f"Rng(seed={self.seed})"


# --------------------------------------------------------------------------
# error and jump laws


@dataclass(frozen=True)
class NormalError:
    sigma: float

    def __post_init__(self):
        if not 0 <= self.sigma < math.inf:
            raise ValueError("sigma must be finite and nonnegative")

    def sample(self, gen, size):
        return self.sigma * gen.standard_normal(size)


@dataclass(frozen=True)
class StudentTError:
    """Centered Student-t scaled to standard deviation ``sigma``."""

    df: float
    sigma: float

    def __post_init__(self):
        if not self.df > 2:
            raise ValueError("df must exceed 2 for a finite variance")
        if not 0 < self.sigma < math.inf:
            raise ValueError("sigma must be finite and positive")

    def sample(self, gen, size):
        scale = self.sigma * math.sqrt((self.df - 2.0) / self.df)
        return scale * gen.standard_t(self.df, size)


ErrorLaw = Union[NormalError, StudentTError]


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (0 < self.sigma < math.inf and math.isfinite(self.mu)):
            raise ValueError("need finite mu and finite positive sigma")

    @property
    def mean(self):
        return self.mu

    @property
    def sd(self):
        return self.sigma

    def sample(self, gen, size):
        return self.mu + self.sigma * gen.standard_normal(size)


@dataclass(frozen=True)
class Shifted:
    """``-(c + s * eps)`` with ``eps`` drawn from a centered error law."""

    c: float
    s: float
    error: ErrorLaw

    def __post_init__(self):
        if not self.error.sigma > 0:
            raise ValueError("the error law needs a positive sigma")
        if not (math.isfinite(self.c) and math.isfinite(self.s)):
            raise ValueError("c and s must be finite")

    @property
    def mean(self):
        return -self.c

    @property
    def sd(self):
        return abs(self.s) * self.error.sigma

    def sample(self, gen, size):
        return -(self.c + self.s * self.error.sample(gen, size))


@dataclass(frozen=True)
class PointMass:
    v: float

    def __post_init__(self):
        if not math.isfinite(self.v):
            raise ValueError("v must be finite")

    @property
    def mean(self):
        return self.v

    @property
    def sd(self):
        return 0.0

    def sample(self, gen, size):
        return np.full(size, float(self.v))


JumpLaw = Union[Normal, Shifted, PointMass]


@dataclass(frozen=True)
class CompoundPoissonSpec:
    rate_pos: float
    rate_neg: float
    law_pos: JumpLaw
    law_neg: JumpLaw

    def __post_init__(self):
        if not (self.rate_pos > 0 and self.rate_neg > 0):
            raise ValueError("rates must be strictly positive")
        if not (self.law_pos.mean < 0 and self.law_neg.mean < 0):
            raise ValueError("jump laws need strictly negative means for a finite argmax")


@dataclass(frozen=True)
class LimitProcessSpec:
    q: CompoundPoissonSpec
    gauss_cov: np.ndarray
    info: np.ndarray

    def __post_init__(self):
        cov = np.array(self.gauss_cov, dtype=float, ndmin=2)
        info = np.array(self.info, dtype=float, ndmin=2)
        if cov.shape != info.shape or cov.shape[0] != cov.shape[1]:
            raise ValueError("gauss_cov and info must be square with equal shapes")
        for name, a in (("gauss_cov", cov), ("info", info)):
            if not np.allclose(a, a.T, rtol=0, atol=1e-12) or np.linalg.eigvalsh(a).min() <= 0:
                raise ValueError(f"{name} must be symmetric positive definite")
        cov.setflags(write=False)
        info.setflags(write=False)
        object.__setattr__(self, "gauss_cov", cov)
        object.__setattr__(self, "info", info)


class NonConvergenceError(RuntimeError):
    """The adaptive horizon hit its cap without isolating the maximum."""


# --------------------------------------------------------------------------
# sampling


def _side_events(rate, law, horizon, rng: Rng):
    """Event distances from 0 (< horizon) and their jumps, in chunks of ``CHUNK``."""
    gen = rng.gen
    times, jumps = [], []
    last = 0.0
    while last < horizon:
        gaps = gen.exponential(1.0 / rate, CHUNK)
        sizes = law.sample(gen, CHUNK)
        t = last + np.cumsum(gaps)
        times.append(t)
        jumps.append(sizes)
        last = t[-1]
    t = np.concatenate(times)
    j = np.concatenate(jumps)
    keep = t < horizon
    return t[keep], j[keep]


def sample_cpp(spec: CompoundPoissonSpec, horizon: float, rng: Rng) -> StepFn1D:
    """Two-sided compound Poisson path on ``[-horizon, horizon]`` with ``Q = 0`` around 0.

    Each side uses its own sub-stream of ``rng`` and draws events in fixed
    chunks, so a longer horizon extends the same path.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    tp, jp = _side_events(spec.rate_pos, spec.law_pos, horizon, rng.child(1))
    tn, jn = _side_events(spec.rate_neg, spec.law_neg, horizon, rng.child(0))
    # left of 0: value on [a_{-k-1}, a_{-k}) is the sum of the k nearest jumps
    left_vals = np.cumsum(jn)[::-1]
    right_vals = np.cumsum(jp)
    breaks = np.r_[-tn[::-1], tp]
    values = np.r_[left_vals, 0.0, right_vals]
    return StepFn1D(Interval(-horizon, horizon), breaks, values)


def sample_limit_process(spec: LimitProcessSpec, rect: Rect, rng: Rng) -> PiecewiseProcess:
    """``Q(u) + v.W - v.I.v / 2`` with a single Gaussian ``W`` shared by all stretches."""
    k1 = rect.k1
    if not k1.interior(0.0):
        raise ValueError("K1 must contain 0 in its interior")
    if rect.d - 1 != spec.info.shape[0]:
        raise ValueError("rectangle dimension does not match the spec")
    horizon = max(-k1.lo, k1.hi)
    q = sample_cpp(spec.q, horizon, rng.child(0))
    inside = (q.jumps > k1.lo) & (q.jumps < k1.hi)
    first = int(np.searchsorted(q.jumps, k1.lo, side="right"))
    breaks = q.jumps[inside]
    values = q.values[first:first + len(breaks) + 1]
    chol = np.linalg.cholesky(spec.gauss_cov)
    w = chol @ rng.child(1).gen.standard_normal(len(chol))
    w.setflags(write=False)
    M = spec.info
    sections = [QuadraticSection(v, w, M) for v in values]
    return PiecewiseProcess.from_breaks(rect, breaks, sections)


def default_initial_horizon(spec: CompoundPoissonSpec) -> float:
    """Several mean inter-event gaps, stretched when jumps are noisy relative to drift."""
    rate = min(spec.rate_pos, spec.rate_neg)
    noise = max(
        (spec.law_pos.sd / spec.law_pos.mean) ** 2,
        (spec.law_neg.sd / spec.law_neg.mean) ** 2,
    )
    return 8.0 / rate * max(1.0, noise)


def sargmax_of_cpp_adaptive(
    spec: CompoundPoissonSpec,
    rng: Rng,
    initial_horizon: float | None = None,
    buffer_frac: float = 0.1,
    max_doublings: int = 10,
) -> tuple[float, float]:
    """Smallest and largest argmax of ``Q`` over the whole line.

    The horizon doubles until the best value inside the inner window beats
    every value touching the outer buffers.
    """
    if initial_horizon is None:
        initial_horizon = default_initial_horizon(spec)
    if not initial_horizon > 0:
        raise ValueError("initial_horizon must be positive")
    if not 0 < buffer_frac < 0.5:
        raise ValueError("buffer_frac must lie in (0, 0.5)")
    horizon = float(initial_horizon)
    for _ in range(max_doublings + 1):
        q = sample_cpp(spec, horizon, rng)
        inner = (1.0 - buffer_frac) * horizon
        ok, t_small, t_large = kernels.cpp_window_argmax(q.jumps, q.values, -horizon, horizon, -inner, inner)
        if ok:
            return float(t_small), float(t_large)
        horizon *= 2.0
    raise NonConvergenceError(f"argmax not isolated within horizon {horizon / 2.0}")


def derive_cp_limit_spec(model) -> CompoundPoissonSpec:
    """Jump process limit of the rescaled least-squares change-point objective.

    Moving the threshold right by one observation turns a residual
    ``(y - beta0)`` into ``(y - alpha0)``, changing the objective by
    ``-(beta0 - alpha0)^2 - 2 (beta0 - alpha0) eps``; mirrored on the left.
    Crossings arrive at the design density at the change-point.
    """
    diff = model.beta0 - model.alpha0
    if diff == 0:
        raise ValueError("alpha0 == beta0: the model has no change-point")
    rate = float(model.z_law.pdf(model.zeta0))
    if model.eps_law.sigma == 0:
        law_pos = law_neg = PointMass(-(diff * diff))
    else:
        law_pos = Shifted(diff * diff, 2.0 * diff, model.eps_law)
        law_neg = Shifted(diff * diff, -2.0 * diff, model.eps_law)
    return CompoundPoissonSpec(rate, rate, law_pos, law_neg)


# --------------------------------------------------------------------------
# JSON forms


def law_to_dict(law) -> dict:
    if isinstance(law, Normal):
        return {"kind": "normal", "mu": law.mu, "sigma": law.sigma}
    if isinstance(law, PointMass):
        return {"kind": "point_mass", "v": law.v}
    if isinstance(law, Shifted):
        return {"kind": "shifted", "c": law.c, "s": law.s, "error": law_to_dict(law.error)}
    if isinstance(law, NormalError):
        return {"kind": "normal_error", "sigma": law.sigma}
    if isinstance(law, StudentTError):
        return {"kind": "student_t_error", "df": law.df, "sigma": law.sigma}
    raise TypeError(f"unknown law {type(law).__name__}")


def law_from_dict(d: dict):
    kind = d["kind"]
    if kind == "normal":
        return Normal(float(d["mu"]), float(d["sigma"]))
    if kind == "point_mass":
        return PointMass(float(d["v"]))
    if kind == "shifted":
        return Shifted(float(d["c"]), float(d["s"]), law_from_dict(d["error"]))
    if kind == "normal_error":
        return NormalError(float(d["sigma"]))
    if kind == "student_t_error":
        return StudentTError(float(d["df"]), float(d["sigma"]))
    raise ValueError(f"unknown law kind {kind!r}")


def cpp_spec_to_dict(spec: CompoundPoissonSpec) -> dict:
    return {
        "rate_pos": spec.rate_pos,
        "rate_neg": spec.rate_neg,
        "law_pos": law_to_dict(spec.law_pos),
        "law_neg": law_to_dict(spec.law_neg),
    }


def cpp_spec_from_dict(d: dict) -> CompoundPoissonSpec:
    return CompoundPoissonSpec(
        float(d["rate_pos"]),
        float(d["rate_neg"]),
        law_from_dict(d["law_pos"]),
        law_from_dict(d["law_neg"]),
    )

