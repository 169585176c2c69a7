"""Command-line front end: parameter sweeps, bounds, channel checks and protocol runs.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .catalgebra import analytic_entries, concurrence_raw, ideal_witness_value, oracle_entries
from .errors import HybridWitnessError, InputError
from .homodyne import METHODS, read_records_csv, run_protocol, analyze_records, simulate_records, write_records_csv
from .kraus import verify_report
from .statefactory import NoiseParams, default_cutoff, noisy_state_fock
from .witnesslab import (
    WitnessConfig,
    correlations,
    critical_noise,
    f_of_n,
    f_of_n_bruteforce,
    f_of_n_hermite,
    m2_config,
    photon_populations,
    separable_bound_m1,
    separable_bound_m2,
    witness_from_correlations,
)

AXIS_NAMES = ("alpha", "eta", "eta_d", "eta_diag")
SIG_DIGITS = 12


class CliInputError(InputError):
    pass


# --- argument helpers -----------------------------------------------------------

def parse_axis(text: str) -> tuple[str, np.ndarray]:
    """'name=start:stop:steps' -> (name, values)."""
    try:
        name, rng = text.split("=", 1)
        start, stop, steps = rng.split(":")
        start, stop, steps = float(start), float(stop), int(steps)
    except ValueError:
        raise CliInputError(f"bad axis {text!r}; expected name=start:stop:steps") from None
    name = name.strip()
    if name not in AXIS_NAMES:
        raise CliInputError(f"unknown axis {name!r}; choose from {AXIS_NAMES}")
    if steps < 2:
        raise CliInputError(f"axis {name}: need at least 2 steps")
    lo, hi = min(start, stop), max(start, stop)
    if name == "alpha" and lo <= 0:
        raise CliInputError("alpha must be > 0")
    if name != "alpha" and (lo < 0 or hi > 1):
        raise CliInputError(f"{name} must lie in [0, 1]")
    return name, np.linspace(start, stop, steps)


def parse_int_list(text: str) -> list[int]:
    """'2:5' (inclusive) or '2,3,5'."""
    try:
        if ":" in text:
            a, b = text.split(":")
            return list(range(int(a), int(b) + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliInputError(f"bad integer list {text!r}") from None


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliInputError(f"bad number list {text!r}") from None


def build_grid(axes: list[str], fixed: dict) -> list[dict]:
    """Row-major cartesian product of the axes over the fixed parameters."""
    parsed = [parse_axis(a) for a in axes]
    names = [n for n, _ in parsed]
    if len(set(names)) != len(names):
        raise CliInputError("each axis may appear once")
    if "eta_diag" in names and ({"eta", "eta_d"} & set(names)):
        raise CliInputError("eta_diag cannot be combined with eta or eta_d")
    points = []
    for combo in itertools.product(*[v for _, v in parsed]):
        p = dict(fixed)
        for n, v in zip(names, combo):
            if n == "eta_diag":
                p["eta"] = p["eta_d"] = float(v)
            else:
                p[n] = float(v)
        points.append(p)
    return points


def parallel_map(fn, items: list, threads: int) -> list:
    """Map preserving input order, with a process pool when threads > 1."""
    if threads and threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(threads) as ex:
            return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))
    return [fn(x) for x in items]


# --- point evaluators (top level so worker processes can import them) ---------------

def _state_for(p: dict):
    noise = NoiseParams(p["eta"], p["eta_d"])
    if noise.eta >= 1.0:
        raise CliInputError("eta = 1 leaves no cat amplitude; keep eta < 1")
    if p.get("source", "analytic") == "oracle":
        return oracle_entries(p["alpha"], noise, p.get("cutoff"))
    return analytic_entries(p["alpha"], noise)


def eval_concurrence(p: dict) -> dict:
    return {"alpha": p["alpha"], "eta": p["eta"], "eta_d": p["eta_d"], "concurrence": concurrence_raw(_state_for(p))}


def eval_ideal_witness(p: dict) -> dict:
    w = ideal_witness_value(_state_for(p))
    return {"alpha": p["alpha"], "eta": p["eta"], "eta_d": p["eta_d"], "witness": w, "neg_witness": -w}


def eval_tilde(p: dict) -> dict:
    cutoff = p.get("cutoff") or default_cutoff(p["alpha"])
    rho = noisy_state_fock(p["alpha"], NoiseParams(p["eta"], p["eta_d"]), cutoff)
    cx, cy = correlations(rho)
    if p["method"] == "m2":
        stats = photon_populations(rho)
        cfg = m2_config(stats) if p.get("n_x") is None else WitnessConfig(p["n_x"], p["n_y"], stats.size - 1)
        bound = separable_bound_m2(stats, cfg)
    else:
        n = 2.0 * f_of_n(p["N"])
        cfg = WitnessConfig(p.get("n_x") or n, p.get("n_y") or n, p["N"])
        bound = separable_bound_m1(cfg)
    return {"alpha": p["alpha"], "eta": p["eta"], "eta_d": p["eta_d"],
            "tilde_witness": witness_from_correlations(cx, cy, cfg.n_x, cfg.n_y),
            "n_x": cfg.n_x, "n_y": cfg.n_y, "bound": bound.value, "certified": bound.certified}


def eval_critical(p: dict) -> dict:
    r = critical_noise(p["alpha"], p["N"], p["method"], cutoff=p.get("cutoff"))
    return {"alpha": r.alpha, "N": r.N, "eta_c": r.eta_c, "f_N": r.f_N, "bound": r.bound,
            "detected_at_zero_noise": r.detected_at_zero_noise, "witness_at_zero_noise": r.witness_at_zero_noise}


# --- output -------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), f".{SIG_DIGITS}g")
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def write_output(args, meta: dict, rows: list[dict] | None = None, result: dict | None = None) -> None:
    meta = {"tool": "hybridwitness", "version": __version__, **meta}
    fmt = args.format
    if rows is None:
        fmt = "json"
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if fmt == "json":
            payload = {"meta": meta}
            if rows is not None:
                payload["data"] = rows
            if result is not None:
                payload["result"] = result
            json.dump(_jsonable(payload), out, indent=2)
            out.write("\n")
        else:
            for k, v in meta.items():
                out.write(f"# {k}: {json.dumps(_jsonable(v))}\n")
            if rows:
                cols = list(rows[0].keys())
                out.write(",".join(cols) + "\n")
                for r in rows:
                    out.write(",".join(_fmt(r[c]) for c in cols) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()


def _clip_rows(rows: list[dict], column: str, clipped: str, sign: float = 1.0) -> None:
    for r in rows:
        r[clipped] = max(0.0, sign * r[column])


def _params(args) -> dict:
    skip = {"func", "config"}
    return {k: v for k, v in vars(args).items() if k not in skip}


# --- commands -----------------------------------------------------------------------

def _sweep_fixed(args) -> dict:
    return {"alpha": args.alpha, "eta": args.eta, "eta_d": args.eta_d, "cutoff": args.fock_cutoff}


def cmd_concurrence_map(args) -> None:
    fixed = _sweep_fixed(args) | {"source": args.source}
    rows = parallel_map(eval_concurrence, build_grid(args.axis, fixed), args.threads)
    if args.clip:
        _clip_rows(rows, "concurrence", "concurrence_clipped")
    write_output(args, {"command": "concurrence-map", "params": _params(args),
                        "certification": "not applicable"}, rows)


def cmd_witness_map(args) -> None:
    fixed = _sweep_fixed(args) | {"source": args.source}
    rows = parallel_map(eval_ideal_witness, build_grid(args.axis, fixed), args.threads)
    if args.clip:
        _clip_rows(rows, "neg_witness", "neg_witness_clipped")
    write_output(args, {"command": "witness-map", "params": _params(args),
                        "certification": "projector witness, valid for all states"}, rows)


def cmd_tilde_sweep(args) -> None:
    if (args.nx is None) != (args.ny is None):
        raise CliInputError("give both --nx and --ny or neither")
    fixed = _sweep_fixed(args) | {"N": args.N, "method": args.method, "n_x": args.nx, "n_y": args.ny}
    if args.method == "m1":
        cfg = WitnessConfig(args.nx or 2 * f_of_n(args.N), args.ny or 2 * f_of_n(args.N), args.N)
        if not cfg.certified and not args.allow_uncertified:
            raise CliInputError(f"scales give bound {cfg.bound_value:.6g} > 1; pass --allow-uncertified to explore")
        cert = separable_bound_m1(cfg).to_dict()
    else:
        cert = {"method": "stats_informed_M2", "note": "bound recomputed per grid point; see columns"}
    rows = parallel_map(eval_tilde, build_grid(args.axis, fixed), args.threads)
    write_output(args, {"command": "tilde-sweep", "params": _params(args), "certification": cert}, rows)


def cmd_critical_noise(args) -> None:
    items = [{"alpha": a, "N": n, "method": args.method, "cutoff": args.fock_cutoff}
             for a in parse_float_list(args.alphas) for n in parse_int_list(args.N_range)]
    if any(i["alpha"] <= 0 for i in items) or any(i["N"] < 1 for i in items):
        raise CliInputError("alphas must be > 0 and N >= 1")
    rows = parallel_map(eval_critical, items, args.threads)
    write_output(args, {"command": "critical-noise", "params": _params(args),
                        "certification": f"default certified scales ({args.method})"}, rows)


def cmd_kraus_verify(args) -> None:
    report = verify_report(alphas=tuple(parse_float_list(args.alphas)), N=args.fock_cutoff, ordering=args.ordering)
    write_output(args, {"command": "kraus-verify", "params": _params(args),
                        "certification": "all_pass" if report["all_pass"] else "failures present"},
                 result=report)


def _require_seed(args) -> None:
    if args.seed is None:
        raise CliInputError("--seed is required for stochastic commands")


def _protocol(args, method: str) -> None:
    _require_seed(args)
    config = None
    if args.nx is not None or args.ny is not None:
        if args.nx is None or args.ny is None:
            raise CliInputError("give both --nx and --ny or neither")
        config = WitnessConfig(args.nx, args.ny, args.N)
    elif method == "M1":
        config = WitnessConfig.default(args.N)
    noise = NoiseParams(args.eta, args.eta_d, args.n_th)
    if args.records:
        records = read_records_csv(args.records)
        result = analyze_records(records, method, config, args.k_sigma, args.pairing)
        result.params.update({"records": args.records})
    else:
        cutoff = args.fock_cutoff or default_cutoff(args.alpha, noise.n_th)
        if args.export_records:
            rho = noisy_state_fock(args.alpha, noise, cutoff)
            z_count = args.z_count if args.z_count is not None else (args.count if method == "M2_two" else 0)
            write_records_csv(simulate_records(rho, args.count, args.seed, z_count, args.workers), args.export_records)
        result = run_protocol(args.alpha, noise, config, args.count, args.seed, method, args.z_count,
                              args.k_sigma, cutoff, args.pairing, args.workers)
    d = result.to_dict()
    write_output(args, {"command": args.command, "params": _params(args),
                        "certification": d["bound"]}, result=d)


def cmd_method2(args) -> None:
    _protocol(args, "M2_two" if args.variant == "two" else "M2_zsup")


def cmd_protocol(args) -> None:
    _protocol(args, args.method)


def cmd_f_of_n(args) -> None:
    rows = []
    for N in parse_int_list(args.N_range):
        if N < 1:
            raise CliInputError("N must be >= 1")
        row = {"N": N, "f_N": f_of_n(N), "f_N_hermite": f_of_n_hermite(N)[0]}
        if args.bruteforce:
            row["f_N_bruteforce"] = f_of_n_bruteforce(N, seed=args.seed or 0)
        rows.append(row)
    write_output(args, {"command": "f-of-n", "params": _params(args), "certification": "not applicable"}, rows)


# --- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, help="master seed (required for stochastic commands)")
    common.add_argument("--fock-cutoff", type=int, help="Fock cutoff for oracle states (default: automatic)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for grid evaluation")
    common.add_argument("--config", help="JSON file of option values; command-line flags take precedence")

    p = argparse.ArgumentParser(prog="hybridwitness", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def sweep(name, help_, func):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--axis", action="append", required=False, default=None,
                       help="name=start:stop:steps with name in alpha, eta, eta_d, eta_diag (repeatable)")
        s.add_argument("--alpha", type=float, default=1.0)
        s.add_argument("--eta", type=float, default=0.0)
        s.add_argument("--eta-d", type=float, default=0.0)
        s.set_defaults(func=func)
        return s

    s = sweep("concurrence-map", "concurrence over a noise grid", cmd_concurrence_map)
    s.add_argument("--source", choices=("analytic", "oracle"), default="analytic")
    s.add_argument("--clip", action="store_true", help="add a column clipped at zero")
    s = sweep("witness-map", "projector-witness value over a grid", cmd_witness_map)
    s.add_argument("--source", choices=("analytic", "oracle"), default="analytic")
    s.add_argument("--clip", action="store_true", help="add -Tr[W rho] clipped at zero")
    s = sweep("tilde-sweep", "homodyne witness value over a grid", cmd_tilde_sweep)
    s.add_argument("--N", type=int, default=2, help="assumed Fock cutoff of separable states (Method 1)")
    s.add_argument("--nx", type=float)
    s.add_argument("--ny", type=float)
    s.add_argument("--method", choices=("m1", "m2"), default="m1")
    s.add_argument("--allow-uncertified", action="store_true")

    s = sub.add_parser("critical-noise", parents=[common], help="largest detectable eta = eta_d per (alpha, N)")
    s.add_argument("--alphas", default="1.0,1.3,1.6")
    s.add_argument("--N-range", default="2:5")
    s.add_argument("--method", choices=("m1", "m2"), default="m1")
    s.set_defaults(func=cmd_critical_noise)

    s = sub.add_parser("kraus-verify", parents=[common], help="Kraus and dilation consistency report (JSON)")
    s.add_argument("--alphas", default="0.7,1.0,1.3")
    s.add_argument("--ordering", choices=("reservoir_major", "system_major"), default="reservoir_major")
    s.set_defaults(func=cmd_kraus_verify)

    def run(name, help_, func):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--alpha", type=float, default=1.0)
        s.add_argument("--eta", type=float, default=0.0)
        s.add_argument("--eta-d", type=float, default=0.0)
        s.add_argument("--n-th", type=float, default=0.0)
        s.add_argument("--count", type=int, default=1_000_000, help="shots per quadrature run")
        s.add_argument("--z-count", type=int, help="conjugate-homodyne records (default: --count)")
        s.add_argument("--N", type=int, default=2, help="Method 1 Fock cutoff assumption")
        s.add_argument("--nx", type=float)
        s.add_argument("--ny", type=float)
        s.add_argument("--k-sigma", type=float, default=3.0)
        s.add_argument("--pairing", choices=("max", "rank"), default="max")
        s.add_argument("--records", help="analyze this CSV (channel,phase,value) instead of simulating")
        s.add_argument("--export-records", help="also write the simulated records to this CSV")
        s.add_argument("--workers", type=int, default=1, help="threads for sampling blocks")
        s.set_defaults(func=func)
        return s

    s = run("method2", "statistics-informed protocol run", cmd_method2)
    s.add_argument("--variant", choices=("two", "zsup"), default="two")
    s = run("protocol", "end-to-end homodyne protocol", cmd_protocol)
    s.add_argument("--method", choices=METHODS, default="M1")

    s = sub.add_parser("f-of-n", parents=[common], help="separable-bound constant f(N)")
    s.add_argument("--N-range", default="1:8")
    s.add_argument("--bruteforce", action="store_true")
    s.set_defaults(func=cmd_f_of_n)
    return p


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliInputError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise CliInputError("config file must hold a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(k.replace("-", "_") for k in cfg) - known
        if unknown:
            raise CliInputError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = parser.parse_args(argv)
    if getattr(args, "axis", "missing") is None:
        raise CliInputError("at least one --axis is required")
    if args.threads < 1:
        raise CliInputError("--threads must be >= 1")
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code not in (None, 0) else 0
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (HybridWitnessError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
