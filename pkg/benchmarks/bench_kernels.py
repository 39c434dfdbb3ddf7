"""Time the compiled and the numpy flavour of every hot kernel on the same inputs.

Usage: python benchmarks/bench_kernels.py [--repeats 5] [--n 2000]

Each row reports the best wall time per call after one warm-up call (which
also triggers compilation) and checks that both flavours agree.
"""

import argparse
import time

import numpy as np

from sargmax_lab import kernels
from sargmax_lab.cox import cox_candidates, default_model, simulate_cox
from sargmax_lab.processes import CompoundPoissonSpec, Normal, Rng, sample_cpp
from sargmax_lab.skorohod import Interval


def best_time(fn, args, repeats):
    fn(*args)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n):
    rng = np.random.default_rng(0)
    y = rng.normal(size=n)
    cp = (y, np.arange(n + 1, dtype=np.int64))

    spec = CompoundPoissonSpec(1.0, 1.0, Normal(-0.2, 1.0), Normal(-0.2, 1.0))
    q = sample_cpp(spec, n / 2.0, Rng(1))
    h = q.domain.hi
    win = (q.jumps, q.values, -h, h, -0.9 * h, 0.9 * h)

    d = simulate_cox(default_model(), min(n, 400), Rng(2))
    o = d.order
    c = np.ascontiguousarray
    cox = (c(d.delta[o]), c(d.z1[o]), c(d.z2[o]), c(d.z3[o]), cox_candidates(d, Interval(0.2, 0.8)), 1e-8, 100, 1e3)

    a, b = np.sort(rng.normal(size=n)), np.sort(rng.normal(0.1, 1.0, size=n))
    return {
        "cp_profile": (kernels.cp_profile_nb, kernels.cp_profile_np, cp),
        "cpp_window_argmax": (kernels.cpp_window_argmax_nb, kernels.cpp_window_argmax_np, win),
        "cox_profile": (kernels.cox_profile_nb, kernels.cox_profile_np, cox),
        "ks_two_sample": (kernels.ks_two_sample_nb, kernels.ks_two_sample_np, (a, b)),
    }


def agree(x, y):
    if isinstance(x, tuple):
        return all(agree(u, v) for u, v in zip(x, y))
    return bool(np.allclose(np.asarray(x, dtype=float), np.asarray(y, dtype=float), atol=1e-6))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--n", type=int, default=2000)
    args = p.parse_args(argv)
    print(f"{'kernel':<20}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}  agree")
    for name, (nb, np_, a) in cases(args.n).items():
        t_nb = best_time(nb, a, args.repeats)
        t_np = best_time(np_, a, args.repeats)
        ok = agree(nb(*a), np_(*a))
        print(f"{name:<20}{1e3 * t_nb:>12.3f}{1e3 * t_np:>12.3f}{t_np / t_nb:>10.1f}  {ok}")


if __name__ == "__main__":
    main()
