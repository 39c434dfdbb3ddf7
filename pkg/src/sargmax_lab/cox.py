"""Cox regression with a change in the ``Z2`` effect at a threshold of ``Z3``.

Hazard: ``lambda(t) exp(alpha.Z1 + beta.Z2 1{Z3 <= zeta} + gamma.Z2 1{Z3 > zeta})``
with time-fixed covariates. The threshold is the smallest maximizer of the
profile partial log-likelihood.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from . import kernels
from ._harness import ExperimentConfig, run_replications
from ._io import atomic_write_text, csv_text
from .processes import Rng, mix_seed
from .skorohod import Interval

__all__ = [
    "ExpCensor",
    "UniformCensor",
    "CoxThresholdModel",
    "SurvivalDataset",
    "CoxFit",
    "RateRow",
    "simulate_cox",
    "partial_loglik",
    "fit_cox_threshold",
    "rate_study",
    "cox_candidates",
    "cox_task",
    "model_to_params",
    "model_from_params",
    "default_model",
    "QUANTILES",
]

NEWTON_TOL = 1e-8
NEWTON_MAX_ITER = 100
SEPARATION_BOUND = 1e3
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class ExpCensor:
    rate: float

    def sample(self, gen, size):
        return gen.exponential(1.0 / self.rate, size)


@dataclass(frozen=True)
class UniformCensor:
    lo: float
    hi: float

    def sample(self, gen, size):
        return gen.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class CoxThresholdModel:
    zeta0: float
    alpha0: tuple
    beta0: tuple
    gamma0: tuple
    baseline_rate: float = 1.0
    censor: Union[ExpCensor, UniformCensor] = ExpCensor(0.2)
    interval: Interval = Interval(0.2, 0.8)
    z3_range: tuple = (0.0, 1.0)
    allow_no_change: bool = False

    def __post_init__(self):
        for name in ("alpha0", "beta0", "gamma0"):
            object.__setattr__(self, name, tuple(float(v) for v in np.atleast_1d(getattr(self, name))))
        if not isinstance(self.interval, Interval):
            object.__setattr__(self, "interval", Interval(*self.interval))
        if len(self.beta0) != len(self.gamma0) or not self.alpha0 or not self.beta0:
            raise ValueError("need p >= 1 and q >= 1 with beta0, gamma0 of equal length")
        if not self.baseline_rate > 0:
            raise ValueError("baseline_rate must be positive")
        lo, hi = self.z3_range
        if not (lo < self.interval.lo and self.interval.hi < hi):
            raise ValueError("the threshold interval must lie inside the support of Z3")
        if not self.interval.interior(self.zeta0):
            raise ValueError("zeta0 must lie strictly inside the threshold interval")
        if self.beta0 == self.gamma0 and not self.allow_no_change:
            raise ValueError("beta0 == gamma0: the model has no change-point")

    @property
    def p(self):
        return len(self.alpha0)

    @property
    def q(self):
        return len(self.beta0)


def default_model() -> CoxThresholdModel:
    return CoxThresholdModel(zeta0=0.5, alpha0=(0.5,), beta0=(0.0,), gamma0=(1.5,))


class SurvivalDataset:
    """Rows ``(t, delta, z1, z2, z3)`` with distinct observed times."""

    def __init__(self, t, delta, z1, z2, z3):
        t = np.array(t, dtype=float)
        delta = np.array(delta, dtype=np.int64)
        z1 = np.array(z1, dtype=float).reshape(len(t), -1)
        z2 = np.array(z2, dtype=float).reshape(len(t), -1)
        z3 = np.array(z3, dtype=float)
        if t.ndim != 1 or len(t) == 0 or len(z3) != len(t) or len(delta) != len(t):
            raise ValueError("inconsistent column lengths")
        if not np.all(np.isin(delta, (0, 1))):
            raise ValueError("delta must be 0/1")
        if np.any(t <= 0) or not np.all(np.isfinite(t)):
            raise ValueError("times must be positive and finite")
        order = np.argsort(-t, kind="stable")
        if np.any(np.diff(t[order]) == 0):
            raise ValueError("tied observation times")
        self.t, self.delta, self.z1, self.z2, self.z3 = t, delta, z1, z2, z3
        # decreasing time: the risk set of row i is rows 0..i
        self.order = order
        for a in (t, delta, z1, z2, z3, order):
            a.setflags(write=False)

    def __len__(self):
        return len(self.t)

    @property
    def n_events(self):
        return int(self.delta.sum())

    def to_csv(self, path=None) -> str:
        p, q = self.z1.shape[1], self.z2.shape[1]
        header = ["t", "delta"] + [f"z1_{i}" for i in range(p)] + [f"z2_{i}" for i in range(q)] + ["z3"]
        rows = (
            [float(self.t[i]), int(self.delta[i])] + self.z1[i].tolist() + self.z2[i].tolist() + [float(self.z3[i])]
            for i in range(len(self))
        )
        text = csv_text(header, rows)
        if path is not None:
            atomic_write_text(path, text)
        return text

    @classmethod
    def from_csv(cls, path) -> "SurvivalDataset":
        return cls.from_csv_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def from_csv_text(cls, text: str) -> "SurvivalDataset":
        reader = csv.DictReader(io.StringIO(text))
        cols = reader.fieldnames or []
        c1 = [c for c in cols if c.startswith("z1_")]
        c2 = [c for c in cols if c.startswith("z2_")]
        if not {"t", "delta", "z3"} <= set(cols) or not c1 or not c2:
            raise ValueError("CSV needs columns t,delta,z1_*,z2_*,z3")
        rows = list(reader)
        return cls(
            [float(r["t"]) for r in rows],
            [int(r["delta"]) for r in rows],
            [[float(r[c]) for c in c1] for r in rows],
            [[float(r[c]) for c in c2] for r in rows],
            [float(r["z3"]) for r in rows],
        )


def simulate_cox(model: CoxThresholdModel, n: int, rng: Rng) -> SurvivalDataset:
    """Exponential event times given covariates, independent censoring."""
    if n < 2:
        raise ValueError("n must be at least 2")
    gen = rng.gen
    z1 = gen.standard_normal((n, model.p))
    z2 = gen.standard_normal((n, model.q))
    z3 = gen.uniform(*model.z3_range, n)
    below = (z3 <= model.zeta0)[:, None]
    eta = z1 @ np.array(model.alpha0) + np.sum(z2 * np.where(below, model.beta0, model.gamma0), axis=1)
    t0 = gen.exponential(1.0, n) / (model.baseline_rate * np.exp(eta))
    c = model.censor.sample(gen, n)
    return SurvivalDataset(np.minimum(t0, c), (t0 <= c).astype(np.int64), z1, z2, z3)


def _design(data: SurvivalDataset, zeta):
    below = (data.z3 <= zeta)[:, None]
    return np.hstack([data.z1, np.where(below, data.z2, 0.0), np.where(below, 0.0, data.z2)])


def partial_loglik(data: SurvivalDataset, zeta, alpha, beta, gamma) -> float:
    """Partial log-likelihood, risk set ``{j : t_j >= t_k}`` for each event ``k``."""
    if data.n_events == 0:
        raise ValueError("no events")
    coef = np.r_[np.atleast_1d(alpha), np.atleast_1d(beta), np.atleast_1d(gamma)].astype(float)
    eta = (_design(data, zeta) @ coef)[data.order]
    log_risk = np.logaddexp.accumulate(eta)
    ev = data.delta[data.order] == 1
    return float(np.sum(eta[ev] - log_risk[ev]))


@dataclass(frozen=True)
class CoxFit:
    zeta: float
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    loglik: float
    separated: bool
    candidates: np.ndarray = field(repr=False)
    profile: np.ndarray = field(repr=False)
    converged: np.ndarray = field(repr=False)
    separated_at: np.ndarray = field(repr=False)
    coefs: np.ndarray = field(repr=False)


def cox_candidates(data: SurvivalDataset, interval: Interval) -> np.ndarray:
    inside = data.z3[(data.z3 >= interval.lo) & (data.z3 <= interval.hi)]
    return np.unique(np.r_[interval.lo, inside])


def fit_cox_threshold(
    data: SurvivalDataset,
    interval: Interval,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
    sep_bound: float = SEPARATION_BOUND,
) -> CoxFit:
    """Profile the threshold over ``{I.lo} u {z3 in I}`` with damped Newton inside."""
    if not isinstance(interval, Interval):
        interval = Interval(*interval)
    if data.n_events == 0:
        raise ValueError("no events")
    cands = cox_candidates(data, interval)
    o = data.order
    values, coefs, conv, sep = kernels.cox_profile(
        np.ascontiguousarray(data.delta[o]),
        np.ascontiguousarray(data.z1[o]),
        np.ascontiguousarray(data.z2[o]),
        np.ascontiguousarray(data.z3[o]),
        cands,
        float(tol),
        int(max_iter),
        float(sep_bound),
    )
    usable = conv | sep
    if not usable.any():
        raise RuntimeError("Newton failed to converge at every candidate threshold")
    masked = np.where(usable, values, -np.inf)
    k = int(np.argmax(masked))
    p, q = data.z1.shape[1], data.z2.shape[1]
    c = coefs[k]
    return CoxFit(
        zeta=float(cands[k]),
        alpha=c[:p].copy(),
        beta=c[p:p + q].copy(),
        gamma=c[p + q:].copy(),
        loglik=float(values[k]),
        separated=bool(sep[k]),
        candidates=cands,
        profile=values,
        converged=conv,
        separated_at=sep,
        coefs=coefs,
    )


# --------------------------------------------------------------------------
# rate study


def model_to_params(model: CoxThresholdModel) -> dict:
    censor = (
        {"kind": "exponential", "rate": model.censor.rate}
        if isinstance(model.censor, ExpCensor)
        else {"kind": "uniform", "lo": model.censor.lo, "hi": model.censor.hi}
    )
    return {
        "zeta0": model.zeta0,
        "alpha0": list(model.alpha0),
        "beta0": list(model.beta0),
        "gamma0": list(model.gamma0),
        "baseline_rate": model.baseline_rate,
        "censor": censor,
        "interval": [model.interval.lo, model.interval.hi],
        "z3_range": list(model.z3_range),
        "allow_no_change": model.allow_no_change,
    }


def model_from_params(d: dict) -> CoxThresholdModel:
    cen = d.get("censor", {"kind": "exponential", "rate": 0.2})
    censor = ExpCensor(float(cen["rate"])) if cen["kind"] == "exponential" else UniformCensor(cen["lo"], cen["hi"])
    return CoxThresholdModel(
        zeta0=float(d["zeta0"]),
        alpha0=tuple(d["alpha0"]),
        beta0=tuple(d["beta0"]),
        gamma0=tuple(d["gamma0"]),
        baseline_rate=float(d.get("baseline_rate", 1.0)),
        censor=censor,
        interval=Interval(*d.get("interval", (0.2, 0.8))),
        z3_range=tuple(d.get("z3_range", (0.0, 1.0))),
        allow_no_change=bool(d.get("allow_no_change", False)),
    )


def cox_task(params: dict, rng: Rng) -> float:
    """One replication: ``zeta_hat - zeta0`` for the model in ``params``."""
    model = model_from_params(params["model"])
    fit = fit_cox_threshold(simulate_cox(model, int(params["n"]), rng), model.interval)
    return fit.zeta - model.zeta0


@dataclass(frozen=True)
class RateRow:
    n: int
    quantiles: tuple  # of n * (zeta_hat - zeta0)
    iqr: float
    iqr_sqrt: float  # IQR of sqrt(n) * (zeta_hat - zeta0)
    failures: int
    errors: np.ndarray = field(repr=False)  # zeta_hat - zeta0, by replication


def rate_study(model: CoxThresholdModel, ns, R: int, master_seed: int, threads: int | None = None):
    """Quantiles of ``n (zeta_hat - zeta0)`` across sample sizes.

    Replication ``r`` at size ``n`` draws from ``mix_seed(mix_seed(master_seed, n), r)``.
    """
    ns = [int(n) for n in ns]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("ns must be increasing")
    if R < 50:
        raise ValueError("R must be at least 50")
    rows = []
    for n in ns:
        cfg = ExperimentConfig(mix_seed(master_seed, n), R, {"model": model_to_params(model), "n": n}, threads)
        reps = run_replications(cfg, cox_task)
        err = np.array([np.nan if v is None else v for v in reps.values])
        good = err[np.isfinite(err)]
        qs = np.quantile(n * good, QUANTILES)
        iqr = float(qs[3] - qs[1])
        q_sqrt = np.quantile(np.sqrt(n) * good, (0.25, 0.75))
        rows.append(RateRow(n, tuple(float(v) for v in qs), iqr, float(q_sqrt[1] - q_sqrt[0]), len(reps.failures), err))
    return rows
