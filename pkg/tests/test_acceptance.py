"""Acceptance criteria, each at its stated tolerance and time budget.

Every test prints one ``CRITERION k: PASS|FAIL`` line; the lines are also
gathered at the end of the pytest run. ``python tests/test_acceptance.py``
runs the suite directly.
"""

import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES, GOLDEN  # noqa: E402
from oracles import (  # noqa: E402
    brute_force_cp,
    event_order_dist,
    grid_max_loglik,
    mesh_maximizers,
    random_process,
    random_warp,
    well_separated,
)
from sargmax_lab.changepoint import Dataset, fit_cp  # noqa: E402
from sargmax_lab.cli import main as cli_main  # noqa: E402
from sargmax_lab.cox import default_model, fit_cox_threshold, simulate_cox  # noqa: E402
from sargmax_lab.processes import Rng  # noqa: E402
from sargmax_lab.sargmax import maximizer_set, sargmax  # noqa: E402
from sargmax_lab.skorohod import (  # noqa: E402
    PiecewiseProcess,
    QuadraticSection,
    Rect,
    StepFn1D,
    skorohod_dist_1d,
    sup_dist,
    tilde_dist,
    warp_norm,
)
from sargmax_lab.verify import theorem1_suite  # noqa: E402


def report(k, ok, detail, elapsed, budget):
    within = elapsed < budget
    line = f"CRITERION {k}: {'PASS' if ok and within else 'FAIL'} ({detail}; {elapsed:.1f}s of {budget:.0f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
    assert within, line


def run_cli(argv, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    code = cli_main([str(a) for a in argv] + ["--out-dir", str(out_dir)])
    assert code == 0
    return json.loads((out_dir / f"{argv[0].replace('-', '_')}.json").read_text())


def same_files(a: Path, b: Path):
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    return all((a / n).read_bytes() == (b / n).read_bytes() for n in names)


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """Lazily run a CLI command once per thread count."""
    root = tmp_path_factory.mktemp("acceptance")
    cache = {}

    def get(cmd, threads):
        key = (cmd, threads)
        if key not in cache:
            out = root / f"{cmd}-t{threads}"
            t0 = time.perf_counter()
            summary = run_cli([cmd, "--threads", threads], out)
            cache[key] = (summary, out, time.perf_counter() - t0)
        return cache[key]

    return get


# --------------------------------------------------------------------------


def test_criterion_1_counterexample(runs):
    s, _, elapsed = runs("counterexample", 1)
    ok = (
        s["paths"] == 500
        and s["config"]["n_values"] == [10, 100, 1000]
        and s["all_half_sargmax"]
        and s["all_half_largmax"]
        and s["all_dist_ok"]
        and s["pure_jump_bounded_below"]
    )
    report(1, ok, f"500 paths, exact halves, min pure-jump distance {s['min_pure_jump_dist']:.3g}", elapsed, 60)


def test_criterion_2_deterministic_suite():
    g = json.loads((GOLDEN / "theorem1.json").read_text())
    t0 = time.perf_counter()
    rep = theorem1_suite(g["ns"])
    elapsed = time.perf_counter() - t0
    ns = np.array(rep.ns, dtype=float)
    errs = np.maximum(rep.sargmax_err, rep.largmax_err)
    k = rep.ns.index(1000)
    ok = (
        max(rep.ns) == 10_000
        and bool(np.all(errs <= rep.C / ns * (1 + 1e-12)))
        and rep.C == pytest.approx(g["C"], rel=1e-9)
        and rep.sargmax_err[k] == pytest.approx(g["err_at_1000"], rel=1e-9)
        and errs[k] <= g["err_at_1000_max"]
        and min(rep.neg_gap) > g["neg_gap_min"]
    )
    report(2, ok, f"C={rep.C:.6g}, err(1000)={errs[k]:.3g}, negative gap {min(rep.neg_gap):.3g}", elapsed, 10)


def test_criterion_3_changepoint_weak_convergence(runs):
    s, _, elapsed = runs("mc-changepoint", 1)
    m = s["config"]["model"]
    model_ok = (m["zeta0"], m["alpha0"], m["beta0"], m["c1"], m["c2"]) == (0.5, 0.0, 1.0, 0.1, 0.9)
    model_ok &= m["eps_law"] == {"kind": "normal", "sigma": 0.5} and m["z_law"] == {"kind": "uniform", "lo": 0.0, "hi": 1.0}
    ks = s["ks"]
    ok = (
        model_ok
        and s["ns"] == [250, 1000, 4000]
        and s["replications"] == {"250": 2000, "1000": 2000, "4000": 2000}
        and s["oracle_draws"] == 20000
        and ks[-1] <= 0.06
        and all(b <= a + 0.01 for a, b in zip(ks, ks[1:]))
    )
    report(3, ok, "KS " + ", ".join(f"{v:.4f}" for v in ks), elapsed, 600)


def test_criterion_4_estimator_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240604)
    cp_ok = 0
    for _ in range(1000):
        n = int(rng.integers(2, 51))
        z = rng.permutation(np.unique(rng.uniform(0, 1, n)))
        y = np.where(z <= 0.5, 0.0, 1.0) + rng.choice([0.0, 0.1, 1.0, 3.0]) * rng.standard_normal(len(z))
        if rng.uniform() < 0.3:
            y = np.round(y, 1)
        est = fit_cp(Dataset(y, z), 0.1, 0.9)
        zeta, val = brute_force_cp(y, z, 0.1, 0.9)
        cp_ok += est.zeta == zeta and abs(est.objective_value - val) <= 1e-12
    cox_ok, worst, compared, skipped = 0, 0.0, 0, 0
    model = default_model()
    for s in range(100):
        n = int(rng.integers(15, 41))
        d = simulate_cox(model, n, Rng(5000 + s))
        fit = fit_cox_threshold(d, model.interval)
        good = True
        for k, zeta in enumerate(fit.candidates):
            if not fit.converged[k] or fit.separated_at[k]:
                skipped += 1
                continue
            below = (d.z3 <= zeta)[:, None]
            X = np.hstack([d.z1, np.where(below, d.z2, 0.0), np.where(below, 0.0, d.z2)])
            X = X[:, np.any(X != 0, axis=0)]
            best, center = grid_max_loglik(d.t, d.delta, X)
            if np.max(np.abs(center)) > 6.0:
                skipped += 1
                continue
            gap = abs(fit.profile[k] - best)
            worst = max(worst, gap)
            compared += 1
            good &= gap <= 1e-6
        cox_ok += good
    elapsed = time.perf_counter() - t0
    ok = cp_ok == 1000 and cox_ok == 100 and compared > 0
    detail = f"cp {cp_ok}/1000; cox {cox_ok}/100 datasets, worst gap {worst:.2e} over {compared} thresholds, {skipped} separated"
    report(4, ok, detail, elapsed, 300)


def _random_step(rng, max_jumps, lo=-1.0, hi=1.0):
    k = int(rng.integers(0, max_jumps + 1))
    jumps = np.sort(rng.uniform(lo + 0.01, hi - 0.01, k))
    jumps = jumps[np.abs(jumps) > 1e-6]
    jumps = jumps[np.r_[True, np.diff(jumps) > 1e-6]] if len(jumps) else jumps
    return StepFn1D((lo, hi), jumps, rng.integers(-3, 4, len(jumps) + 1).astype(float))


def test_criterion_5_metric_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240605)
    order_ok = 0
    for _ in range(1000):
        f, g = _random_step(rng, 4), _random_step(rng, 4)
        d = skorohod_dist_1d(f, g)
        dt = tilde_dist(PiecewiseProcess.from_step(f), PiecewiseProcess.from_step(g))[0]
        s = sup_dist(f, g)
        order_ok += d <= dt + 1e-12 and dt <= s + 1e-12 and abs(d - dt) <= 1e-12
    oracle_ok, worst = 0, 0.0
    for _ in range(200):
        f, g = _random_step(rng, 3), _random_step(rng, 3)
        gap = abs(skorohod_dist_1d(f, g) - event_order_dist(f, g))
        worst = max(worst, gap)
        oracle_ok += gap <= 1e-6
    warp_ok = 0
    for _ in range(1000):
        eps = float(rng.uniform(0.01, 3.0))
        length = float(rng.uniform(0.2, 5.0))
        lo = float(rng.uniform(-3, 0))
        delta = min(0.25, eps / (2 * length))
        lam = random_warp(rng, lo, lo + length, delta)
        # a piecewise-linear warp deviates most at a knot
        warp_ok += warp_norm(lam) < delta and np.max(np.abs(lam.knots_u - lam.knots_s)) < eps
    elapsed = time.perf_counter() - t0
    ok = order_ok == 1000 and oracle_ok == 200 and warp_ok == 1000
    detail = f"ordering {order_ok}/1000, oracle {oracle_ok}/200 (worst {worst:.1e}), warp bound {warp_ok}/1000"
    report(5, ok, detail, elapsed, 120)


def _ladder_ok():
    rect = Rect.of((-1, 1), (-1, 1), (-1, 1))
    M = np.array([[2.0, 0.3], [0.3, 1.0]])
    w = np.array([0.4, -0.2])
    v = np.array([0.7, -1.1])
    W = PiecewiseProcess.from_breaks(rect, [], [QuadraticSection(0.5, w, M)])
    target = np.r_[-1.0, np.linalg.solve(M, w)]
    errs, dists = [], []
    for j in range(1, 13):
        delta = 2.0**-j
        Wj = PiecewiseProcess.from_breaks(rect, [], [QuadraticSection(0.5 + delta, w + delta * v, M)])
        errs.append(np.max(np.abs(sargmax(Wj) - target)))
        dists.append(sup_dist(Wj, W))
    return bool(np.all(np.diff(dists) < 0) and np.all(np.diff(errs) < 0) and errs[-1] < 1e-2)


def test_criterion_6_sargmax_suite():
    t0 = time.perf_counter()
    mesh = 1.0 / 64
    agree, inv_ok, n = 0, 0, 0
    seed = 0
    while n < 500:
        rng = np.random.default_rng(10_000 + seed)
        seed += 1
        d = 1 + n % 3
        psi = random_process(rng, d)
        if not well_separated(psi, mesh, 0.01):
            continue
        n += 1
        rep = maximizer_set(psi)
        top, s_mesh, l_mesh = mesh_maximizers(psi, mesh)
        agree += (
            rep.global_sup >= top - 1e-12
            and np.max(np.abs(rep.sargmax_point - s_mesh)) <= 2 * mesh
            and np.max(np.abs(rep.largmax_point - l_mesh)) <= 2 * mesh
        )
        # nonempty, closed stretches, attained at the reported points
        flats = rep.flats
        inv_ok += (
            len(flats) > 0
            and all(f.stretch_closed.lo < f.stretch_closed.hi for f in flats)
            and all(a.stretch_closed.hi <= b.stretch_closed.lo for a, b in zip(flats, flats[1:]))
            and psi.rect.contains(rep.sargmax_point[0], rep.sargmax_point[1:])
            and abs(psi(rep.sargmax_point[0], rep.sargmax_point[1:]) - rep.global_sup) <= 1e-9
        )
    ladder = _ladder_ok()
    elapsed = time.perf_counter() - t0
    ok = agree == 500 and inv_ok == 500 and ladder
    report(6, ok, f"mesh oracle {agree}/500, invariants {inv_ok}/500, ladder {'ok' if ladder else 'broken'}", elapsed, 120)


def test_criterion_7_cox_rate(runs):
    g = json.loads((GOLDEN / "cox_rate.json").read_text())
    s, _, elapsed = runs("mc-cox", 1)
    table = s["table"]
    lo, hi = g["iqr_ratio_band"]
    sqrt_ratio = s["iqr_ratio_sqrt_n"]
    ok = (
        [r["n"] for r in table] == [500, 1000, 2000]
        and lo <= s["iqr_ratio"] <= hi
        and sqrt_ratio <= g["sqrt_n_ratio_max"]
        and all(b["iqr_sqrt_n"] < a["iqr_sqrt_n"] for a, b in zip(table, table[1:]))
    )
    iqrs = ", ".join(f"{r['iqr']:.3f}" for r in table)
    report(7, ok, f"IQR {iqrs}; ratio {s['iqr_ratio']:.3f} in [{lo}, {hi}]; sqrt-n ratio {sqrt_ratio:.3f}", elapsed, 600)


def test_criterion_8_determinism(runs):
    t0 = time.perf_counter()
    same = {}
    for cmd in ("counterexample", "mc-changepoint", "mc-cox"):
        a = runs(cmd, 1)[1]
        b = runs(cmd, 2)[1]
        same[cmd] = same_files(a, b)
    elapsed = time.perf_counter() - t0
    ok = all(same.values())
    # the budget covers the extra multi-worker runs of criteria 1, 3 and 7
    report(8, ok, ", ".join(f"{k} {'identical' if v else 'DIFFERENT'}" for k, v in same.items()), elapsed, 1260)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
