"""Command line entry point: ``linkcap <subcommand> ...``.

Exit codes: 0 success, 2 bad input or config, 3 size-guard refusal.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from .core import (Instance, Params, dump_instance, gpl_gains, in_set_affectance,
                   is_feasible, load_instance, sir)
from .experiments import ConfigError, Scenario, generate, run
from .oracle import (MAX_PC_N, MAX_UNIFORM_N, SizeGuardError, brute_force_opt,
                     brute_force_opt_pc, pc_feasible)
from .rayleigh import fading_report, optimize_probs
from .sched import cluster_select, equilength_capacity, general_capacity
from .shadowing import ShadowingSpec, gn, shadow

EXIT_CONFIG = 2
EXIT_SIZE = 3


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None, help="output file (directory for 'study')")
    p.add_argument("--format", choices=("csv", "json"), default="json")


def _shadowing_args(p: argparse.ArgumentParser):
    p.add_argument("--family", choices=("degenerate", "lognormal", "heavytail"), default="degenerate")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--fixed-signals", action="store_true", help="keep signals at GPL values")
    p.add_argument("--fixed-interference", action="store_true",
                   help="keep interference at GPL values")


def _spec(args) -> ShadowingSpec:
    return ShadowingSpec(args.family, args.sigma, not args.fixed_signals, not args.fixed_interference)


def _gains(args, inst: Instance):
    return shadow(gpl_gains(inst), _spec(args), np.random.default_rng(args.seed))


def _emit(args, payload, rows: list[dict] | None = None):
    if args.format == "csv" and rows is not None:
        buf = io.StringIO()
        if rows:
            wr = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            wr.writeheader()
            wr.writerows(rows)
        text = buf.getvalue()
    else:
        text = json.dumps(payload, indent=2, default=_jsonable) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def _parse_set(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_gen(args):
    params = Params(args.power, args.alpha, args.beta)
    sc = Scenario(kind=args.kind, n=args.n, length=args.length, area=args.area,
                  length_range=(args.lmin, args.lmax), clusters=args.clusters,
                  per_cluster=args.per_cluster, spacing=args.spacing,
                  weights=args.weights, params=params)
    inst = generate(sc, np.random.default_rng(args.seed))
    text = dump_instance(inst, args.out)
    if not args.out:
        print(text)


def cmd_eval(args):
    inst = load_instance(args.instance)
    gains = _gains(args, inst)
    links = _parse_set(args.set) if args.set else list(range(len(inst)))
    beta = inst.params.beta
    aff = in_set_affectance(gains, links)
    rows = [{"link": i, "affectance": float(a), "sir": sir(gains, links, i)}
            for i, a in zip(links, aff)]
    payload = {"set": links, "beta": beta, "feasible": is_feasible(gains, links, beta),
               "pc_feasible": pc_feasible(gains, links, beta), "links": rows}
    _emit(args, payload, rows)


def cmd_solve(args):
    inst = load_instance(args.instance)
    gains = _gains(args, inst)
    beta = inst.params.beta
    if args.algorithm == "cluster":
        res = cluster_select(inst, gains, range(len(inst)), beta)
    elif args.algorithm == "equilength":
        res = equilength_capacity(inst, gains, beta=beta)
    else:
        res = general_capacity(inst, gains, beta)
    payload = res.to_dict()
    payload["value"] = len(res.selected)
    payload["feasible"] = is_feasible(gains, res.selected, beta)
    _emit(args, payload, [{"link": i} for i in res.selected])


def cmd_oracle(args):
    inst = load_instance(args.instance)
    gains = _gains(args, inst)
    beta = inst.params.beta
    w = inst.weights if args.weighted else None
    best, val = brute_force_opt(gains, beta, w)
    payload = {"opt_uniform": val, "set_uniform": list(best)}
    if args.power_control:
        best_pc, val_pc = brute_force_opt_pc(gains, beta, w)
        payload.update(opt_pc=val_pc, set_pc=list(best_pc))
    _emit(args, payload, [payload | {"set_uniform": " ".join(map(str, best))}])


def cmd_fading(args):
    inst = load_instance(args.instance)
    gains = _gains(args, inst)
    beta = inst.params.beta
    if args.probs:
        p = np.array([float(x) for x in args.probs.split(",")])
    else:
        p = optimize_probs(gains, beta, inst.weights)
    rep = fading_report(gains, p, beta, inst.weights)
    _emit(args, {"expected_weight": rep.weight, "links": rep.rows()}, rep.rows())


def cmd_study(args):
    if not args.config:
        raise ConfigError("study needs --config")
    overrides = {"trials": args.trials, "seed": args.seed if args.seed_given else None}
    for path in run(args.config, args.out or ".", args.format, overrides):
        print(path)


def cmd_gn(args):
    spec = ShadowingSpec(args.family, args.sigma)
    rows = []
    for n in args.n:
        est = gn(spec, n)
        rows.append({"n": n, "g": est.g, "f_at_g": est.f_at_g,
                     "lo": est.bracket[0], "hi": est.bracket[1], "flagged": est.flagged})
    _emit(args, rows, rows)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="linkcap", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="emit an instance file")
    _common(p)
    p.add_argument("--kind", choices=("colocated", "cluster_grid", "random_equilength",
                                      "random_general"), default="random_equilength")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--length", type=float, default=1.0)
    p.add_argument("--area", type=float, default=10.0)
    p.add_argument("--lmin", type=float, default=1.0)
    p.add_argument("--lmax", type=float, default=10.0)
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--per-cluster", type=int, default=8)
    p.add_argument("--spacing", type=float, default=7.0)
    p.add_argument("--weights", choices=("unit", "random"), default="unit")
    p.add_argument("--power", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=3.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("eval", help="affectance, SIR and feasibility of a link set")
    _common(p)
    _shadowing_args(p)
    p.add_argument("--instance", required=True)
    p.add_argument("--set", default=None, help="comma-separated link positions (default: all)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("solve", help="run the capacity algorithms")
    _common(p)
    _shadowing_args(p)
    p.add_argument("--instance", required=True)
    p.add_argument("--algorithm", choices=("general", "equilength", "cluster"), default="general")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser(
        "oracle",
        help=f"exact optimum (uniform power n <= {MAX_UNIFORM_N}, power control n <= {MAX_PC_N})")
    _common(p)
    _shadowing_args(p)
    p.add_argument("--instance", required=True)
    p.add_argument("--power-control", action="store_true")
    p.add_argument("--weighted", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("fading", help="Rayleigh success probabilities and bounds")
    _common(p)
    _shadowing_args(p)
    p.add_argument("--instance", required=True)
    p.add_argument("--probs", default=None, help="comma-separated transmission probabilities")
    p.set_defaults(func=cmd_fading)

    p = sub.add_parser("study", help="run a study config (colocated_growth, ss_vs_gpl, "
                                     "fading_equivalence); oracle studies need n <= 16 / 12")
    _common(p)
    p.set_defaults(func=cmd_study, format="csv")

    p = sub.add_parser("gn", help="growth index table")
    _common(p)
    p.add_argument("--family", choices=("degenerate", "lognormal", "heavytail"), default="lognormal")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n", type=int, nargs="+", default=[100, 1000, 10000, 100000, 1000000])
    p.set_defaults(func=cmd_gn, format="csv")
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    args.seed_given = "--seed" in argv
    try:
        args.func(args)
    except SizeGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
