"""``sargmax-lab`` command line.

Every subcommand writes its files atomically into ``--out-dir``, echoes the
effective configuration (thread count excluded, since it never changes
results) and prints a one-line JSON summary. Exit status: 0 success,
1 invalid input, 2 too many failed replications.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from ._harness import ExperimentFailure
from ._io import atomic_write_text, csv_text, dumps, write_json
from .changepoint import Dataset, fit_cp
from .cox import QUANTILES, default_model, model_from_params, model_to_params, rate_study
from .processes import Rng, cpp_spec_from_dict, sample_cpp
from .sargmax import maximizer_set, report_to_dict
from .skorohod import (
    PiecewiseProcess,
    StepFn1D,
    from_dict,
    skorohod_dist_1d,
    sup_dist,
    tilde_dist,
    to_dict,
)
from .verify import counterexample_run, cp_model_from_params, cp_weak_convergence, theorem1_suite

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2

CP_DEFAULTS = {
    "master_seed": 20240601,
    "replications": 2000,
    "oracle_draws": 20000,
    "ns": [250, 1000, 4000],
    "model": {
        "zeta0": 0.5,
        "alpha0": 0.0,
        "beta0": 1.0,
        "c1": 0.1,
        "c2": 0.9,
        "z_law": {"kind": "uniform", "lo": 0.0, "hi": 1.0},
        "eps_law": {"kind": "normal", "sigma": 0.5},
    },
}

COX_DEFAULTS = {
    "master_seed": 20240602,
    "replications": 200,
    "ns": [500, 1000, 2000],
    "model": model_to_params(default_model()),
}

CPP_DEFAULTS = {
    "master_seed": 1,
    "horizon": 10.0,
    "spec": {
        "rate_pos": 1.0,
        "rate_neg": 1.0,
        "law_pos": {"kind": "normal", "mu": -1.0, "sigma": 1.0},
        "law_neg": {"kind": "normal", "mu": -1.0, "sigma": 1.0},
    },
}

CE_DEFAULTS = {"master_seed": 7, "rate": 1.0, "n_values": [10, 100, 1000], "replications": 500}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _int_list(text: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from exc


def _merge(base: dict, over: dict, path: str, where: str) -> dict:
    out = dict(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"{where}: unknown field {path}{k}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{where}: field {path}{k} must be a table")
            # tagged tables (laws) are replaced whole, plain tables merge
            out[k] = v if "kind" in base[k] else _merge(base[k], v, f"{path}{k}.", where)
        else:
            out[k] = v
    return out


def load_config(path, defaults: dict) -> dict:
    if path is None:
        return json.loads(json.dumps(defaults))
    p = Path(path)
    try:
        raw = tomllib.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"{p}: file not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return _merge(json.loads(json.dumps(defaults)), raw, "", str(p))


def _override(cfg: dict, **flags) -> dict:
    for k, v in flags.items():
        if v is not None:
            cfg[k] = v
    return cfg


def _emit(args, name: str, summary: dict) -> dict:
    write_json(Path(args.out_dir) / f"{name}.json", summary)
    print(dumps(summary))
    return summary


# --------------------------------------------------------------------------
# subcommands


def cmd_sargmax(args):
    obj = from_dict(json.loads(Path(args.input).read_text(encoding="utf-8")))
    if not isinstance(obj, (StepFn1D, PiecewiseProcess)):
        raise ConfigError(f"{args.input}: expected a StepFn1D or PiecewiseProcess")
    rep = maximizer_set(obj, args.tie_tol)
    return _emit(args, "sargmax", {
        "command": "sargmax",
        "config": {"input": str(args.input), "tie_tol": args.tie_tol},
        "report": report_to_dict(rep),
    })


def cmd_distance(args):
    f = from_dict(json.loads(Path(args.f).read_text(encoding="utf-8")))
    g = from_dict(json.loads(Path(args.g).read_text(encoding="utf-8")))
    out = {"command": "distance", "config": {"f": str(args.f), "g": str(args.g)}}
    if isinstance(f, StepFn1D) and isinstance(g, StepFn1D):
        val, lam = skorohod_dist_1d(f, g, return_warp=True)
        out.update(kind="step", distance=val, sup_dist=sup_dist(f, g), exact=True, warp=to_dict(lam))
    elif isinstance(f, PiecewiseProcess) and isinstance(g, PiecewiseProcess):
        val, lam = tilde_dist(f, g)
        out.update(kind="process", distance=val, sup_dist=sup_dist(f, g), exact=f.rect.d == 1, warp=to_dict(lam))
    else:
        raise ConfigError("distance needs two StepFn1D or two PiecewiseProcess inputs")
    return _emit(args, "distance", out)


def cmd_simulate_cpp(args):
    cfg = _override(load_config(args.config, CPP_DEFAULTS), master_seed=args.seed, horizon=args.horizon)
    try:
        spec = cpp_spec_from_dict(cfg["spec"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"spec: missing or malformed field {exc}") from exc
    q = sample_cpp(spec, float(cfg["horizon"]), Rng(int(cfg["master_seed"])))
    write_json(Path(args.out_dir) / "cpp_path.json", to_dict(q))
    rep = maximizer_set(q)
    return _emit(args, "simulate_cpp", {
        "command": "simulate-cpp",
        "config": cfg,
        "n_jumps": int(len(q.jumps)),
        "sargmax": float(rep.sargmax_point[0]),
        "largmax": float(rep.largmax_point[0]),
        "path_file": "cpp_path.json",
    })


def cmd_fit_changepoint(args):
    data = Dataset.from_csv(args.input)
    est = fit_cp(data, args.c1, args.c2)
    return _emit(args, "fit_changepoint", {
        "command": "fit-changepoint",
        "config": {"input": str(args.input), "c1": args.c1, "c2": args.c2},
        "n": len(data),
        "zeta": est.zeta,
        "alpha": est.alpha,
        "beta": est.beta,
        "objective_value": est.objective_value,
    })


def cmd_mc_changepoint(args):
    cfg = _override(
        load_config(args.config, CP_DEFAULTS),
        master_seed=args.seed, replications=args.reps, ns=args.ns, oracle_draws=args.oracle_draws,
    )
    try:
        model = cp_model_from_params(cfg["model"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"model: missing or malformed field {exc}") from exc
    res = cp_weak_convergence(
        model, cfg["ns"], int(cfg["replications"]), int(cfg["oracle_draws"]), int(cfg["master_seed"]), args.threads
    )
    out = Path(args.out_dir)
    rows = [(n, r, float(v)) for n in res.ns for r, v in enumerate(res.samples[n])]
    atomic_write_text(out / "mc_changepoint.csv", csv_text(["n", "replication", "scaled_error"], rows))
    atomic_write_text(
        out / "mc_changepoint_oracle.csv",
        csv_text(["draw", "sargmax"], [(i, float(v)) for i, v in enumerate(res.oracle)]),
    )
    ks = res.ks
    monotone = all(b <= a + 0.01 for a, b in zip(ks, ks[1:]))
    return _emit(args, "mc_changepoint", {
        "command": "mc-changepoint",
        "config": cfg,
        **res.summary(),
        "ks_last_ok": ks[-1] <= 0.06,
        "ks_monotone_within_0.01": monotone,
    })


def cmd_mc_cox(args):
    cfg = _override(load_config(args.config, COX_DEFAULTS), master_seed=args.seed, replications=args.reps, ns=args.ns)
    try:
        model = model_from_params(cfg["model"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"model: missing or malformed field {exc}") from exc
    rows = rate_study(model, cfg["ns"], int(cfg["replications"]), int(cfg["master_seed"]), args.threads)
    csv_rows = [(r.n, i, float(e)) for r in rows for i, e in enumerate(r.errors)]
    atomic_write_text(Path(args.out_dir) / "mc_cox.csv", csv_text(["n", "replication", "zeta_error"], csv_rows))
    table = [
        {"n": r.n, "quantiles": list(r.quantiles), "iqr": r.iqr, "iqr_sqrt_n": r.iqr_sqrt, "failures": r.failures}
        for r in rows
    ]
    return _emit(args, "mc_cox", {
        "command": "mc-cox",
        "config": cfg,
        "quantile_levels": list(QUANTILES),
        "table": table,
        "iqr_ratio": rows[-1].iqr / rows[0].iqr,
        "iqr_ratio_sqrt_n": rows[-1].iqr_sqrt / rows[0].iqr_sqrt,
    })


def cmd_counterexample(args):
    cfg = _override(
        load_config(args.config, CE_DEFAULTS),
        master_seed=args.seed, rate=args.rate, n_values=args.n, replications=args.reps,
    )
    rep = counterexample_run(cfg["rate"], cfg["n_values"], int(cfg["replications"]), int(cfg["master_seed"]), args.threads)
    atomic_write_text(Path(args.out_dir) / "counterexample.csv", csv_text(rep.CSV_HEADER, rep.csv_rows()))
    return _emit(args, "counterexample", {"command": "counterexample", "config": cfg, **rep.summary()})


def cmd_theorem1(args):
    ns = args.n or [10, 100, 1000, 10000]
    rep = theorem1_suite(ns)
    return _emit(args, "theorem1", {"command": "theorem1", "config": {"ns": ns}, **rep.to_dict()})


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sargmax-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--out-dir", default=".", help="directory for output files (default: .)")
        return sp

    sp = add("sargmax", cmd_sargmax, "smallest/largest argmax of a process given as JSON")
    sp.add_argument("--input", required=True)
    sp.add_argument("--tie-tol", type=float, default=0.0)

    sp = add("distance", cmd_distance, "Skorohod distance of two step functions or processes")
    sp.add_argument("--f", required=True)
    sp.add_argument("--g", required=True)

    sp = add("simulate-cpp", cmd_simulate_cpp, "sample a two-sided compound Poisson path")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--horizon", type=float)

    sp = add("fit-changepoint", cmd_fit_changepoint, "least-squares change-point fit of a y,z CSV")
    sp.add_argument("--input", required=True)
    sp.add_argument("--c1", type=float, default=0.1)
    sp.add_argument("--c2", type=float, default=0.9)

    for name, func, help_ in (
        ("mc-changepoint", cmd_mc_changepoint, "weak convergence of the change-point estimator"),
        ("mc-cox", cmd_mc_cox, "rate study of the Cox threshold estimator"),
        ("counterexample", cmd_counterexample, "argmax counterexample with shrinking bumps"),
    ):
        sp = add(name, func, help_)
        sp.add_argument("--config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, help="worker cap (default: $SARGMAX_LAB_THREADS or 1)")
        if name == "counterexample":
            sp.add_argument("--rate", type=float)
            sp.add_argument("--n", type=_int_list)
            sp.add_argument("--reps", type=int)
        else:
            sp.add_argument("--ns", type=_int_list)
            sp.add_argument("--reps", type=int)
        if name == "mc-changepoint":
            sp.add_argument("--oracle-draws", type=int)

    sp = add("theorem1", cmd_theorem1, "deterministic argmax convergence suite")
    sp.add_argument("--n", type=_int_list)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help/--version
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    try:
        args.func(args)
    except ExperimentFailure as exc:
        print(f"sargmax-lab: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"sargmax-lab: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
