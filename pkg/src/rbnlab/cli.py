"""Command line entry point ``rbnlab``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, occupation as occ
from .paths import generate_fbm, load_path, save_path


def _add_run_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--override-inadmissible", action="store_true",
                   help="run SPDE experiments outside the admissible parameter range")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="output directory (default $RBNLAB_OUT/<kind>)")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--strict", action="store_true", default=None,
                   help="treat advisory checks as mandatory")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rbnlab")
    sub = ap.add_subparsers(dest="cmd", required=True)

    pp = sub.add_parser("paths", help="fractional Brownian paths (without 'gen': run the paths experiment)")
    _add_run_args(pp)
    g = pp.add_subparsers(dest="sub").add_parser("gen", help="generate one path")
    g.add_argument("--H", type=float, required=True)
    g.add_argument("--n", type=int, default=1 << 12, help="number of steps")
    g.add_argument("--T", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--sample", type=int)
    g.add_argument("--out", required=True, help=".csv or raw file")

    po = sub.add_parser("occ", help="local time and averaged fields").add_subparsers(dest="sub", required=True)
    lt = po.add_parser("localtime")
    af = po.add_parser("avgfield")
    for q in (lt, af):
        q.add_argument("--path", required=True, help="path written by 'paths gen'")
        q.add_argument("--bins", type=int, default=512)
        q.add_argument("--out", required=True, help="CSV output")
    af.add_argument("--gamma", type=float, default=0.4)
    af.add_argument("--cap", type=float, default=1e3)
    af.add_argument("--method", choices=("quadrature", "convolution"), default="convolution")
    rg = po.add_parser("region", help="exponent region and admissibility")
    rg.add_argument("--H", type=float, required=True)
    rg.add_argument("--p", type=float, required=True)
    rg.add_argument("--gamma0", type=float)

    sd = sub.add_parser("sew", help="sewing").add_subparsers(dest="sub", required=True)
    d = sd.add_parser("demo")
    d.add_argument("--case", choices=tuple(harness.sew_demo_cases()), default="riemann")
    d.add_argument("--out", help="level,gap CSV (default stdout)")

    for kind in harness.KINDS[1:]:
        _add_run_args(sub.add_parser(kind, help=f"run the {kind} experiment"))

    sw = sub.add_parser("sweep", help="run one experiment over a parameter axis")
    _add_run_args(sw)
    sw.add_argument("--kind", required=True, choices=harness.KINDS)
    sw.add_argument("--axis", required=True)
    sw.add_argument("--values", required=True, help="comma separated")
    return ap


def _load(args, kind: str) -> harness.ExperimentConfig:
    return harness.load_config(args.config, kind=kind, samples=args.samples, seed=args.seed,
                               strict=args.strict, out=args.out)


def _sweep_values(cfg: harness.ExperimentConfig, axis: str, raw: str):
    default = getattr(cfg, axis)
    return [harness._parse_value(axis, v, default) for v in raw.split(",") if v.strip()]


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (harness.ConfigError, harness.InadmissibleConfig, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.cmd == "paths" and args.sub == "gen":
        path = generate_fbm(args.n, args.T, args.H, args.seed, sample=args.sample)
        for f in save_path(path, args.out):
            print(f)
        return 0
    if args.cmd == "occ":
        if args.sub == "region":
            reg = occ.RegularityRegion(args.H, args.p)
            adm = occ.assumption_check(args.H, args.p, args.gamma0)
            print(json.dumps({"lambda_max": reg.lambda_max, "gamma_max_0": reg.gamma_max(0.0),
                              **adm.as_dict()}, indent=1))
            return 0
        path = load_path(args.path)
        grid = occ.SpatialGrid.covering(path.values, args.bins)
        if args.sub == "localtime":
            vals = occ.local_time(path, grid, path.n_steps).values[0]
            header = "x,L"
        else:
            f = occ.truncated_power(args.gamma, args.cap, envelope=False)
            vals = occ.averaged_field(path, f, 0, path.n_steps, grid, args.method).values
            header = "x,Tf"
        np.savetxt(args.out, np.column_stack([grid.centers, vals]), delimiter=",", header=header,
                   comments="", fmt="%.17g")
        print(args.out)
        return 0
    if args.cmd == "sew":
        runner, exact, tol = harness.sew_demo_cases()[args.case]
        res = runner()
        value = float(np.asarray(res.value).ravel()[0])
        first = res.level - len(res.gaps) + 1
        rows = "level,gap\n" + "".join(f"{first + i},{g:.17g}\n" for i, g in enumerate(res.gaps))
        if args.out:
            Path(args.out).write_text(rows)
        else:
            sys.stdout.write(rows)
        print(json.dumps({"case": args.case, "value": value, "exact": exact,
                          "error": abs(value - exact), "level": res.level,
                          "converged": bool(res.converged)}), file=sys.stderr)
        return 0 if abs(value - exact) <= tol else 1
    if args.cmd == "sweep":
        cfg = _load(args, args.kind)
        values = _sweep_values(cfg, args.axis, args.values)
        reports, combined = harness.sweep(cfg, args.axis, values, args.jobs,
                                          args.override_inadmissible, args.out)
        for v, rep in zip(values, reports):
            print(f"{args.axis}={v}: {'PASS' if rep.passed else 'FAIL'}")
        print(combined)
        return 0 if all(r.passed for r in reports) else 1
    cfg = _load(args, args.cmd)
    rep = harness.run(cfg, args.override_inadmissible, args.jobs)
    print(rep.summary())
    print(Path(rep.path))
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
