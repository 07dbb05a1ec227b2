"""Command line entry point: ``equatorflow run|selftest|oracle``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import CATALOG
from .config import load_profile, load_sweep_config
from .errors import EquatorFlowError

log = logging.getLogger("equatorflow")

EXIT_OK, EXIT_UNDECIDED, EXIT_ERROR = 0, 1, 2


def _progress(done, total):
    if done == total or done % 20 == 0:
        print(f"\rfibers {done}/{total}", end="\n" if done == total else "", file=sys.stderr, flush=True)


def _cmd_run(args) -> int:
    from .export import export
    from .sweep import run

    cfg = load_sweep_config(args.config, preset=args.preset, alphas=args.alpha, out_dir=args.out)
    if args.workers is not None:
        cfg.workers = args.workers
    result = run(cfg, progress=None if args.quiet else _progress)
    paths = export(result, cfg.out_dir)
    for r in result.reports:
        sf = "undecided" if r.sf_measured is None else r.sf_measured
        thm = "n/a" if r.sf_thm is None else r.sf_thm
        print(f"alpha={r.alpha:g} sf_measured={sf} sf_thm={thm} sf_bec={r.sf_bec}")
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    print(f"time {result.provenance['timing_total_s']:.1f}s")
    return EXIT_OK if result.all_decided else EXIT_UNDECIDED


def _cmd_selftest(args) -> int:
    from .sweep import self_test

    cfg = load_sweep_config(args.config, preset=args.preset)
    report = self_test(cfg, seed=args.seed)
    print(report.format())
    return EXIT_OK if report.passed else EXIT_UNDECIDED


def _parse_params(items):
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise EquatorFlowError(f"--param expects key=value, got {item!r}")
        out[key] = float(val)
    return out


def _profile(args):
    if args.profile_file:
        return load_profile(args.profile_file)
    if args.profile not in CATALOG:
        raise EquatorFlowError(f"unknown profile {args.profile!r}; choose from {', '.join(sorted(CATALOG))}")
    return CATALOG[args.profile](**_parse_params(args.param))


def _cmd_oracle(args) -> int:
    from . import oracles

    if args.which == "jump":
        pred = oracles.jump_dispersion(args.f_plus, args.f_minus, args.xi)
        if pred is None:
            print(f"no admissible interface mode (-f_o * xi = {-(args.f_plus - args.f_minus) / 2 * args.xi:g})")
            return EXIT_OK
        print(f"E = {pred.E:.10g}")
        print(f"kappa_plus = {pred.kappa_plus:.10g}")
        print(f"kappa_minus = {pred.kappa_minus:.10g}")
        print(f"identity_residual = {abs(pred.identity_residual()):.3e}")
        print(f"quartic_residual = {abs(pred.quartic_residual()):.3e}")
        return EXIT_OK

    profile = _profile(args)
    if args.which == "yanai":
        xi0 = oracles.yanai_crossing(profile, args.quad_tol)
        print(f"xi0 = {xi0:.10g}")
        return EXIT_OK

    # kelvin: closed form plus its discrete residual on a grid
    from .operator import Grid, assemble

    grid = Grid(args.L, args.m)
    E, psi = oracles.kelvin_branch(profile, args.xi, grid)
    op = assemble(profile, grid, args.xi)
    res = float(np.linalg.norm(op.matrix @ psi - E * psi))
    print(f"E = {E:.10g}")
    print(f"discrete_residual = {res:.3e} (L={args.L:g}, m={args.m})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="equatorflow", description="Spectral flow of fibered shallow-water operators.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="sweep, track branches, count the flow and write outputs")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--preset", choices=("paper", "desk"))
    r.add_argument("--alpha", type=float, nargs="+", help="frequency levels (replace those of the config)")
    r.add_argument("--out", type=Path, help="output directory")
    r.add_argument("--workers", type=int)
    r.add_argument("-q", "--quiet", action="store_true")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("selftest", help="structural checks (Hermiticity, Gamma symmetry, window consistency)")
    s.add_argument("--config", required=True, type=Path)
    s.add_argument("--preset", choices=("paper", "desk"))
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_selftest)

    o = sub.add_parser("oracle", help="closed-form predictions")
    osub = o.add_subparsers(dest="which", required=True)
    j = osub.add_parser("jump", help="interface mode of a single jump")
    j.add_argument("--f-plus", type=float, required=True)
    j.add_argument("--f-minus", type=float, required=True)
    j.add_argument("--xi", type=float, required=True)
    for name in ("yanai", "kelvin"):
        q = osub.add_parser(name)
        g = q.add_mutually_exclusive_group()
        g.add_argument("--profile", default="linear", help="catalog profile name")
        g.add_argument("--profile-file", type=Path, help="YAML profile description")
        q.add_argument("--param", action="append", metavar="KEY=VALUE", help="catalog profile parameter")
        if name == "yanai":
            q.add_argument("--quad-tol", type=float, default=1e-10)
        else:
            q.add_argument("--xi", type=float, required=True)
            q.add_argument("--L", type=float, default=11.0)
            q.add_argument("--m", type=int, default=601)
    o.set_defaults(func=_cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except EquatorFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
