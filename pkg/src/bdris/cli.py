"""Command-line front end.

Exit codes: 0 success / property holds, 1 property failure, 2 usage or IO error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from fractions import Fraction

import numpy as np

from .channel import ScenarioConfig, sample_channels, trial_rng
from .experiment import ArchSpec, ExperimentSpec, report_value, run_sweep, write_sweep
from .network import complex_to_json, sample_susceptance, theta_from_susceptance
from .optimize import OBJECTIVES, OptimizeOptions, optimize_architecture
from .reconstruct import assemble_system, make_target, predicted_rank, rank_report, real_pair, reconstruct
from .suites import SUITES, run_suite
from .topology import (
    InvalidParam,
    SystemDims,
    complexity_count,
    effective_L,
    from_json,
    make_architecture,
    satisfies_theorem1,
    theorem1_complexity,
    to_json,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _L(text: str):
    value = Fraction(text)
    return int(value) if value.denominator == 1 else value


# scenario fields that map one-to-one onto flags; dims are handled separately
_SCALAR_FIELDS = [f for f in dataclasses.fields(ScenarioConfig) if f.name not in ("dims", "seed")]


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario overrides")
    g.add_argument("--config", help="ScenarioConfig JSON file")
    g.add_argument("--n-tx", type=int)
    g.add_argument("--n-ris", type=int)
    g.add_argument("--users", type=_ints, help="antennas per user, e.g. 1,1,1,1")
    g.add_argument("--streams", type=_ints, help="streams per user")
    for f in _SCALAR_FIELDS:
        flag = "--" + f.name.replace("_", "-")
        if f.type in ("bool", bool):
            g.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        elif f.name == "fading":
            g.add_argument(flag, dest=f.name, choices=("rician", "rayleigh"))
        else:
            g.add_argument(flag, dest=f.name, type=float)


def _add_common(p: argparse.ArgumentParser, trials_default: int | None = None) -> None:
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=trials_default)
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--threads", type=int, default=1)


def scenario_from_args(args, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """``--config`` (or ``base``, or the defaults) with every given flag applied on top."""
    if args.config:
        cfg = ScenarioConfig.from_json(args.config)
    else:
        cfg = base if base is not None else ScenarioConfig()
    changes = {f.name: getattr(args, f.name) for f in _SCALAR_FIELDS if getattr(args, f.name) is not None}
    dims = cfg.dims
    if any(getattr(args, k) is not None for k in ("n_tx", "n_ris", "users", "streams")):
        users = args.users if args.users is not None else dims.users
        streams = args.streams if args.streams is not None else (dims.streams if args.users is None else None)
        dims = SystemDims(
            args.n_tx if args.n_tx is not None else dims.n_tx,
            args.n_ris if args.n_ris is not None else dims.n_ris,
            users,
            streams,
        )
    changes["dims"] = dims
    if args.seed is not None:
        changes["seed"] = args.seed
    return cfg.replace(**changes)


def _arch_from_text(text: str, n_ris: int | None, L):
    """An architecture spec string, or a path to an architecture JSON file."""
    if text.endswith(".json"):
        with open(text) as fh:
            return from_json(json.load(fh)), text
    if n_ris is None:
        raise UsageError("--n-ris is required with an architecture spec string")
    spec = ArchSpec.parse(text)
    return spec.build(n_ris, L), spec.label(n_ris, L)


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_check_arch(args) -> int:
    if args.L is None:
        raise UsageError("--L is required")
    arch, label = _arch_from_text(args.arch, args.n_ris, args.L)
    verdict = satisfies_theorem1(arch, args.L)
    _emit(
        {
            "architecture": label,
            "n_elements": arch.n_elements,
            "L": str(args.L),
            "status": verdict.status,
            "ok": verdict.ok,
            # witness ordering, 1-based: canonical position i holds vertex order[i]
            "order": None if verdict.order is None else [v + 1 for v in verdict.order],
            "complexity_count": complexity_count(arch),
        },
        args.out,
    )
    return EXIT_OK if verdict.ok else EXIT_FAIL


def cmd_verify(args) -> int:
    params = {}
    if args.n is not None:
        key = "sizes" if args.suite in ("cayley", "ranks", "roundtrip", "tree-census") else "n"
        params[key] = args.n if key == "sizes" else args.n[0]
    if args.kappa is not None:
        if args.suite == "ranks":
            params["kappas"] = args.kappa
        elif args.suite in ("row-elim", "ubar"):
            params["kappa"] = args.kappa[0]
        elif args.suite == "roundtrip":
            params["dofs"] = args.kappa
        else:
            raise UsageError(f"--kappa does not apply to suite {args.suite}")
    seed = 0 if args.seed is None else args.seed
    report = run_suite(args.suite, seed=seed, trials=args.trials, **params)
    out = report.to_dict()
    out["seed"] = seed
    _emit(out, args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def _target_theta(kind: str, n: int, seed: int) -> np.ndarray:
    if kind == "identity":
        return np.eye(n, dtype=complex)
    return theta_from_susceptance(sample_susceptance(n, trial_rng(seed, 1))).theta


def cmd_reconstruct(args) -> int:
    cfg = scenario_from_args(args)
    dims = cfg.dims
    L = effective_L(dims)
    arch, label = _arch_from_text(args.arch, dims.n_ris, L)
    ch = sample_channels(cfg, trial_rng(cfg.seed, 0))
    theta = _target_theta(args.theta, dims.n_ris, cfg.seed)
    rec = reconstruct(ch, theta, arch, side=args.side)
    sys_ = assemble_system(real_pair(make_target(ch, theta, rec.side)), arch)
    ranks = rank_report(sys_)
    out = {
        "status": "ok" if rec.ok else "inconsistent",
        "side": rec.side,
        "residual": rec.report.residual,
        "rank_a": ranks.rank_a,
        "rank_ab": ranks.rank_ab,
        "predicted_rank": predicted_rank(dims.n_ris, sys_.kappa),
        "near_singular": rec.report.near_singular,
        "roundtrip_error": rec.roundtrip_error,
        "arch": to_json(arch),
        "architecture": label,
        "dims": {"n_tx": dims.n_tx, "n_ris": dims.n_ris, "users": list(dims.users)},
        "seed": cfg.seed,
    }
    if rec.ok and args.dump_b:
        out["susceptance"] = rec.susceptance.b.tolist()
        out["theta"] = complex_to_json(rec.theta.theta)
    _emit(out, args.out)
    return EXIT_OK if rec.ok else EXIT_FAIL


def cmd_optimize(args) -> int:
    cfg = scenario_from_args(args)
    dims = cfg.dims
    L = effective_L(dims)
    arch, label = _arch_from_text(args.arch, dims.n_ris, L)
    ch = sample_channels(cfg, trial_rng(cfg.seed, 0))
    opts = OptimizeOptions(restarts=args.restarts, max_iters=args.max_iters, seed=cfg.seed, threads=args.threads)
    power = cfg.power_budget if args.objective == "sum_rate" else None
    res = optimize_architecture(ch, arch, args.objective, opts, power_budget=power, streams=dims.streams)
    out = {
        "value": report_value(args.objective, res.value),
        "units": "bits/s/Hz" if args.objective == "sum_rate" else "linear",
        "objective": args.objective,
        "restarts": args.restarts,
        "iterations": res.iterations,
        "seed": cfg.seed,
        "architecture": label,
        "complexity_count": complexity_count(arch),
    }
    _emit(out, args.out)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            fh.write("iteration,value\n")
            for i, v in enumerate(res.trace):
                fh.write("%d,%.17g\n" % (i, report_value(args.objective, v)))
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.spec:
        with open(args.spec) as fh:
            obj = json.load(fh)
    else:
        obj = {}
    base = ScenarioConfig.from_dict(obj["scenario"]) if "scenario" in obj else None
    obj["scenario"] = scenario_from_args(args, base)
    for key in ("objective", "trials", "restarts", "max_iters"):
        if getattr(args, key) is not None:
            obj[key] = getattr(args, key)
    if args.arch:
        obj["architectures"] = args.arch
    if args.sweep_axis:
        obj["sweep_axis"] = args.sweep_axis
        obj["sweep_values"] = [v if v == "2L-1" else int(v) for v in args.values.split(",")] if args.values else []
    if args.equalize is not None:
        obj["equalize"] = args.equalize
    spec = ExperimentSpec.from_dict(obj)
    result = run_sweep(spec, threads=args.threads)
    out = args.out or spec.output_path
    if out:
        write_sweep(result, out)
    else:
        sys.stdout.write(result.to_csv())
    return EXIT_OK


def cmd_complexity(args) -> int:
    sizes = args.n or (8, 16, 64)
    rows = []
    for n in sizes:
        L = args.L if args.L is not None else effective_L(SystemDims(args.n_tx, n, (1,) * args.k))
        q = int(2 * Fraction(L) - 1)
        archs = [
            ("single", make_architecture("single", n)),
            ("fully", make_architecture("fully", n)),
            ("tridiagonal", make_architecture("tridiagonal", n)),
            ("arrowhead", make_architecture("arrowhead", n)),
            (f"band(q={q})", make_architecture("band", n, q=q)),
            (f"stem(q={q})", make_architecture("stem", n, q=q)),
        ]
        for gs in args.group_size:
            if n % gs == 0:
                archs.append((f"group(Gs={gs})", make_architecture("group", n, group_size=gs)))
        for label, arch in archs:
            rows.append({"n_ris": n, "L": str(L), "architecture": label, "complexity_count": complexity_count(arch)})
        rows.append({"n_ris": n, "L": str(L), "architecture": "optimal-class", "complexity_count": theorem1_complexity(n, L)})
    lines = ["n_ris,L,architecture,complexity_count"]
    lines += [f"{r['n_ris']},{r['L']},{r['architecture']},{r['complexity_count']}" for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bdris", description="BD-RIS architecture analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-arch", help="test an architecture for the optimal class")
    p.add_argument("arch", help="spec such as band:q=3, stem:q=3, group:G=2, or an architecture JSON file")
    p.add_argument("--n-ris", type=int)
    p.add_argument("--L", type=_L)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check_arch)

    p = sub.add_parser("verify", help="run an invariant suite")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("--n", type=_ints, help="surface sizes (comma-separated)")
    p.add_argument("--kappa", type=_ints, help="kappa values (comma-separated)")
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reconstruct", help="recover a sparse susceptance from a fully-connected target")
    p.add_argument("--arch", required=True)
    p.add_argument("--theta", choices=("random", "identity"), default="random")
    p.add_argument("--side", choices=("receiver", "transmitter"), default=None)
    p.add_argument("--dump-b", action="store_true", help="include B and Theta in the report")
    _add_common(p)
    _add_scenario_flags(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("optimize", help="optimize one architecture on one channel draw")
    p.add_argument("--arch", required=True)
    p.add_argument("--objective", choices=OBJECTIVES, default="sum_channel_gain")
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--trace", help="write the per-iteration trace CSV here")
    _add_common(p)
    _add_scenario_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="Monte Carlo sweep writing one CSV row per (sweep value, architecture)")
    p.add_argument("--spec", help="ExperimentSpec JSON file")
    p.add_argument("--arch", action="append", help="architecture spec (repeatable)")
    p.add_argument("--objective", choices=OBJECTIVES)
    p.add_argument("--sweep-axis", choices=("n_ris", "q", "group_size", "n_users"))
    p.add_argument("--values", help="comma-separated sweep values")
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--equalize", action=argparse.BooleanOptionalAction, default=None)
    _add_common(p)
    _add_scenario_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("complexity", help="admittance counts per architecture")
    p.add_argument("--n", type=_ints)
    p.add_argument("--L", type=_L)
    p.add_argument("--n-tx", type=int, default=4)
    p.add_argument("--k", type=int, default=4, help="single-antenna users (sets L when --L is absent)")
    p.add_argument("--group-size", type=_ints, default=(2, 4))
    p.add_argument("--out")
    p.set_defaults(func=cmd_complexity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "trials", None) is not None and args.trials < 1:
        parser.error("--trials must be at least 1")
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except (UsageError, InvalidParam, ValueError, KeyError, OSError) as exc:
        print(f"bdris: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
