"""Empirical distributions, Monte Carlo drivers and deterministic convergence checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._harness import ExperimentConfig, ExperimentFailure, Replications, run_replications
from .changepoint import ChangePointModel, UniformZ, fit_cp, simulate_cp
from .processes import (
    CompoundPoissonSpec,
    NormalError,
    PointMass,
    Rng,
    StudentTError,
    derive_cp_limit_spec,
    mix_seed,
    sample_cpp,
    sargmax_of_cpp_adaptive,
)
from .sargmax import largmax, maximizer_set, sargmax
from .skorohod import (
    Interval,
    PiecewiseProcess,
    QuadraticSection,
    Rect,
    StepFn1D,
    pure_jump_of,
    skorohod_dist_1d,
    tilde_dist,
)

__all__ = [
    "Ecdf",
    "ecdf",
    "ks_distance",
    "PathRecord",
    "CounterexampleReport",
    "counterexample_trial",
    "counterexample_run",
    "Theorem1Report",
    "theorem1_suite",
    "ExperimentConfig",
    "ExperimentFailure",
    "Replications",
    "run_replications",
    "TASKS",
    "cp_model_from_params",
    "cp_model_to_params",
    "cp_weak_convergence",
]


# --------------------------------------------------------------------------
# empirical distributions


@dataclass(frozen=True, eq=False)
class Ecdf:
    sorted_samples: np.ndarray

    def __call__(self, x):
        out = np.searchsorted(self.sorted_samples, x, side="right") / len(self.sorted_samples)
        return float(out) if np.ndim(out) == 0 else out

    def __len__(self):
        return len(self.sorted_samples)


def ecdf(samples) -> Ecdf:
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if len(s) == 0:
        raise ValueError("ecdf of an empty sample")
    if not np.all(np.isfinite(s)):
        raise ValueError("non-finite sample")
    s.setflags(write=False)
    return Ecdf(s)


def ks_distance(a: Ecdf, b: Ecdf) -> float:
    """``sup_x |F_a(x) - F_b(x)|`` over the merged sample points."""
    return float(kernels.ks_two_sample(a.sorted_samples, b.sorted_samples))


# --------------------------------------------------------------------------
# counterexample: shrinking bumps that keep the argmax away from its limit


@dataclass(frozen=True)
class PathRecord:
    path: int
    n: int
    t_neg1: float
    t_pos1: float
    sargmax_psi_n: float
    largmax_psi_n: float
    sargmax_psi0: float
    largmax_psi0: float
    dist_bound: float
    pure_jump_dist: float
    half_sargmax: bool
    half_largmax: bool
    dist_ok: bool


@dataclass(frozen=True)
class CounterexampleReport:
    records: list
    all_half_sargmax: bool
    all_half_largmax: bool
    all_dist_ok: bool
    pure_jump_bounded_below: bool
    min_pure_jump_dist: float

    @property
    def passed(self):
        return self.all_half_sargmax and self.all_half_largmax and self.all_dist_ok and self.pure_jump_bounded_below

    CSV_HEADER = [
        "path", "n", "t_neg1", "t_pos1", "sargmax_psi_n", "largmax_psi_n", "sargmax_psi0",
        "largmax_psi0", "dist_bound", "pure_jump_dist", "half_sargmax", "half_largmax", "dist_ok",
    ]

    def csv_rows(self):
        for r in self.records:
            yield [getattr(r, h) for h in self.CSV_HEADER]

    def summary(self) -> dict:
        return {
            "paths": len({r.path for r in self.records}),
            "rows": len(self.records),
            "all_half_sargmax": self.all_half_sargmax,
            "all_half_largmax": self.all_half_largmax,
            "all_dist_ok": self.all_dist_ok,
            "pure_jump_bounded_below": self.pure_jump_bounded_below,
            "min_pure_jump_dist": self.min_pure_jump_dist,
            "passed": self.passed,
        }


def _counting_path(rate: float, rng: Rng) -> StepFn1D:
    """Minus a two-sided unit-jump Poisson path, on a domain holding both first events."""
    spec = CompoundPoissonSpec(rate, rate, PointMass(-1.0), PointMass(-1.0))
    horizon = 4.0 / rate
    while True:
        q = sample_cpp(spec, horizon, rng)
        if (q.jumps < 0).any() and (q.jumps > 0).any():
            break
        horizon *= 2.0
    t_neg = q.jumps[q.jumps < 0].max()
    t_pos = q.jumps[q.jumps > 0].min()
    # same stream, longer horizon: the path is extended, not redrawn
    return sample_cpp(spec, 1.0 + 2.0 * max(-t_neg, t_pos), rng)


def _bumped(psi0: StepFn1D, a: float, b: float, height: float) -> StepFn1D:
    breaks = np.unique(np.r_[psi0.jumps, a, b])
    left = np.r_[psi0.domain.lo, breaks]
    vals = psi0(left) + np.where((left >= a) & (left < b), height, 0.0)
    return StepFn1D(psi0.domain, breaks, vals)


def counterexample_trial(rate: float, n_values, rng: Rng, path: int = 0) -> list:
    """Per-``n`` records for one sampled path."""
    if not rate > 0:
        raise ValueError("rate must be positive")
    n_values = [int(n) for n in n_values]
    if not n_values:
        raise ValueError("n_values must be nonempty")
    psi0 = _counting_path(rate, rng)
    t_neg = float(psi0.jumps[psi0.jumps < 0].max())
    t_pos = float(psi0.jumps[psi0.jumps > 0].min())
    s0, l0 = float(sargmax(psi0)[0]), float(largmax(psi0)[0])
    pj0 = pure_jump_of(psi0).to_step()
    records = []
    for n in n_values:
        psi_n = _bumped(psi0, t_neg / 2.0, t_pos / 2.0, 1.0 / n)
        sn, ln = float(sargmax(psi_n)[0]), float(largmax(psi_n)[0])
        dist = skorohod_dist_1d(psi_n, psi0)
        pj = skorohod_dist_1d(pure_jump_of(psi_n).to_step(), pj0)
        records.append(
            PathRecord(
                path, n, t_neg, t_pos, sn, ln, s0, l0, dist, pj,
                sn == s0 / 2.0, ln == l0 / 2.0, dist <= 1.0 / n,
            )
        )
    return records


def _counterexample_task(params, rng):
    return counterexample_trial(params["rate"], params["n_values"], rng, params.get("path", 0))


def counterexample_run(rate: float, n_values, reps: int, master_seed: int, threads=None) -> CounterexampleReport:
    cfg = ExperimentConfig(master_seed, reps, {"rate": float(rate), "n_values": [int(n) for n in n_values]}, threads)
    res = run_replications(cfg, _counterexample_task)
    records = []
    for i, recs in enumerate(res.values):
        if recs is None:
            continue
        records.extend(PathRecord(**{**r.__dict__, "path": i}) for r in recs)
    by_path: dict = {}
    for r in records:
        by_path.setdefault(r.path, []).append(r.pure_jump_dist)
    # path-wise lower bound: the pure-jump distance never drops below its
    # smallest value over n, and that value is positive
    bounded = all(min(v) > 0 for v in by_path.values())
    return CounterexampleReport(
        records,
        all(r.half_sargmax for r in records),
        all(r.half_largmax for r in records),
        all(r.dist_ok for r in records),
        bounded and len(by_path) == reps,
        min((min(v) for v in by_path.values()), default=0.0),
    )


# --------------------------------------------------------------------------
# deterministic suite for the argmax continuous mapping theorem

T1_RECT = Rect.of((-2.0, 2.0), (-1.0, 1.0))
T1_JUMPS = (-1.0, 0.5)
# (c, w, M) per stretch; the middle section wins and has an interior argmax
T1_SECTIONS = ((0.0, 0.2, 1.0), (1.0, 0.3, 2.0), (0.5, -0.4, 1.0))


def _t1_process(jumps, shift=0.0, bump=None):
    secs = [QuadraticSection(c + shift, [w], [[m]]) for c, w, m in T1_SECTIONS]
    breaks = list(jumps)
    if bump is not None:
        a, b, h = bump
        # split the winning stretch and raise its middle part
        mid = secs[1]
        raised = QuadraticSection(mid.c + h, mid.w, mid.M)
        breaks = [jumps[0], a, b, jumps[1]]
        secs = [secs[0], mid, raised, mid, secs[2]]
    return PiecewiseProcess.from_breaks(T1_RECT, breaks, secs)


@dataclass(frozen=True)
class Theorem1Report:
    ns: list
    sargmax_err: list
    largmax_err: list
    tilde: list
    jump_err: list
    counts_match: list
    unique_limit: bool
    C: float
    neg_gap: list
    neg_tilde: list
    neg_counts_match: list
    sargmax0: list = field(default_factory=list)
    largmax0: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def theorem1_suite(ns=(10, 100, 1000, 10000)) -> Theorem1Report:
    """Perturbations of a three-stretch process, with a bump counterexample.

    Positive case: jumps move inward by ``1/n`` and every section gains
    ``1/n``; the pure jump functions converge and so must both argmax
    functionals. Negative control: a bump of height ``1/n`` on
    ``[-0.5, 0.25)`` inside the winning stretch; the process converges in
    the warp metric but its jump count does not.
    """
    psi0 = _t1_process(T1_JUMPS)
    s0, l0 = sargmax(psi0), largmax(psi0)
    pj0 = pure_jump_of(psi0)
    sa, la, td, je, cm, ng, nt, nc = [], [], [], [], [], [], [], []
    for n in ns:
        h = 1.0 / n
        psi_n = _t1_process((T1_JUMPS[0] + h, T1_JUMPS[1] - h), shift=h)
        sa.append(float(np.max(np.abs(sargmax(psi_n) - s0))))
        la.append(float(np.max(np.abs(largmax(psi_n) - l0))))
        td.append(float(tilde_dist(psi_n, psi0)[0]))
        pj = pure_jump_of(psi_n)
        match = len(pj.jumps_neg) == len(pj0.jumps_neg) and len(pj.jumps_pos) == len(pj0.jumps_pos)
        cm.append(bool(match))
        je.append(
            float(max(np.max(np.abs(pj.jumps_neg - pj0.jumps_neg)), np.max(np.abs(pj.jumps_pos - pj0.jumps_pos))))
            if match
            else None
        )
        neg = _t1_process(T1_JUMPS, bump=(-0.5, 0.25, h))
        ng.append(float(np.max(np.abs(sargmax(neg) - s0))))
        nt.append(float(tilde_dist(neg, psi0)[0]))
        pjn = pure_jump_of(neg)
        nc.append(len(pjn.jumps_neg) + len(pjn.jumps_pos) == len(pj0.jumps_neg) + len(pj0.jumps_pos))
    C = max(max(n * e for n, e in zip(ns, sa)), max(n * e for n, e in zip(ns, la)))
    return Theorem1Report(
        list(ns), sa, la, td, je, cm, maximizer_set(psi0).unique_flat, float(C), ng, nt, nc,
        s0.tolist(), l0.tolist(),
    )


# --------------------------------------------------------------------------
# change-point weak convergence


def cp_model_to_params(model: ChangePointModel) -> dict:
    zl, el = model.z_law, model.eps_law
    if not isinstance(zl, UniformZ):
        raise ValueError("only uniform designs are serialised")
    eps = (
        {"kind": "normal", "sigma": el.sigma}
        if isinstance(el, NormalError)
        else {"kind": "student_t", "df": el.df, "sigma": el.sigma}
    )
    return {
        "zeta0": model.zeta0,
        "alpha0": model.alpha0,
        "beta0": model.beta0,
        "c1": model.c1,
        "c2": model.c2,
        "z_law": {"kind": "uniform", "lo": zl.lo, "hi": zl.hi},
        "eps_law": eps,
    }


def cp_model_from_params(d: dict) -> ChangePointModel:
    zl = d.get("z_law", {"kind": "uniform", "lo": 0.0, "hi": 1.0})
    if zl["kind"] != "uniform":
        raise ValueError(f"unsupported z_law kind {zl['kind']!r}")
    el = d.get("eps_law", {"kind": "normal", "sigma": 0.5})
    if el["kind"] == "normal":
        eps = NormalError(float(el["sigma"]))
    elif el["kind"] == "student_t":
        eps = StudentTError(float(el["df"]), float(el["sigma"]))
    else:
        raise ValueError(f"unsupported eps_law kind {el['kind']!r}")
    return ChangePointModel(
        float(d["zeta0"]), float(d["alpha0"]), float(d["beta0"]), float(d["c1"]), float(d["c2"]),
        UniformZ(float(zl["lo"]), float(zl["hi"])), eps,
    )


def _cp_task(params, rng):
    model = cp_model_from_params(params["model"])
    n = int(params["n"])
    est = fit_cp(simulate_cp(model, n, rng), model.c1, model.c2)
    return n * (est.zeta - model.zeta0)


def _cpp_limit_task(params, rng):
    model = cp_model_from_params(params["model"])
    return sargmax_of_cpp_adaptive(derive_cp_limit_spec(model), rng)[0]


TASKS = {"cp": _cp_task, "cpp_limit": _cpp_limit_task, "counterexample": _counterexample_task}


@dataclass(frozen=True)
class CpWeakConvergence:
    ns: list
    samples: dict  # n -> array of n (zeta_hat - zeta0)
    oracle: np.ndarray
    ks: list
    failures: dict

    def summary(self) -> dict:
        return {
            "ns": self.ns,
            "ks": self.ks,
            "oracle_draws": len(self.oracle),
            "replications": {str(n): int(len(self.samples[n])) for n in self.ns},
            "failures": {str(k): v for k, v in self.failures.items()},
        }


def cp_weak_convergence(model: ChangePointModel, ns, R: int, oracle_draws: int, master_seed: int, threads=None):
    """ECDF of ``n (zeta_hat - zeta0)`` per ``n`` against draws from the jump-process limit.

    Stream layout: size ``n`` uses ``mix_seed(master_seed, n)``; the oracle
    uses ``mix_seed(master_seed, 0)``.
    """
    params = {"model": cp_model_to_params(model)}
    oracle_cfg = ExperimentConfig(mix_seed(master_seed, 0), oracle_draws, params, threads)
    oracle_res = run_replications(oracle_cfg, _cpp_limit_task)
    oracle = np.array(oracle_res.ok_values)
    ref = ecdf(oracle)
    samples, ks, failures = {}, [], {"oracle": len(oracle_res.failures)}
    for n in ns:
        cfg = ExperimentConfig(mix_seed(master_seed, int(n)), R, {**params, "n": int(n)}, threads)
        res = run_replications(cfg, _cp_task)
        samples[int(n)] = np.array(res.ok_values)
        failures[int(n)] = len(res.failures)
        ks.append(ks_distance(ecdf(samples[int(n)]), ref))
    return CpWeakConvergence([int(n) for n in ns], samples, oracle, ks, failures)
