"""Command line interface: ``ouarea {simulate,estimate,test,geometry,figures}``.

Exit codes: 0 success, 2 bad input (config, CSV, parameters, method),
3 numerical failure, 4 trajectory too short.  The thread count defaults to
``$OUAREA_THREADS`` and is overridden by ``--threads``.
"""

import argparse
import sys
from dataclasses import replace
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DegenerateEccentricity, InvalidInput, NumericalError, TooShort
from .estimate import (
    LinearObservable,
    area_rate,
    area_rate_se,
    observable_rate,
    two_stage_entropy,
    winding_rate,
)
from .figures import FIGURES, ellipse_rows, geometry_rows, run_figure
from .hypotest import METHODS, STATISTICS, detailed_balance_test
from .errors import ConfigError
from .io import (
    load_json,
    load_model,
    load_run_config,
    read_trajectory_csv,
    write_json,
    write_table_csv,
    write_trajectory_csv,
)
from .simulate import default_threads, simulate
from .twodim import StandardParams2D, ellipse_geometry

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_SHORT = 4

GEOMETRY_COLUMNS = ["omega", "tilt_rad", "s_max", "s_min", "det", "q"]


def _threads(args):
    return args.threads if args.threads is not None else default_threads()


def cmd_simulate(args):
    model, _, cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    traj = simulate(model, cfg)
    write_trajectory_csv(traj, args.out)
    return EXIT_OK


def _observable(path, d):
    obj = load_json(path)
    if not isinstance(obj, dict) or "M" not in obj:
        raise ConfigError("observable JSON needs an 'M' matrix")
    obs = LinearObservable(obj["M"], obj.get("v"))
    if obs.dim != d:
        raise ConfigError(f"observable is {obs.dim}-d, trajectory is {d}-d")
    return obs


def cmd_estimate(args):
    traj = read_trajectory_csv(args.trajectory)
    kw = {"n_boot": args.n_boot, "seed": args.seed, "block_len": args.block_len}
    if args.kind == "area":
        i, j = args.plane[0] - 1, args.plane[1] - 1
        if not (0 <= i < traj.dim and 0 <= j < traj.dim and i != j):
            raise ConfigError(f"bad plane {args.plane} for a {traj.dim}-d trajectory")
        report = area_rate_se(traj, i, j, **kw).to_dict()
        report["plane"] = [i + 1, j + 1]
        report["matrix"] = area_rate(traj)
    elif args.kind == "observable":
        if args.observable is None:
            raise ConfigError("estimate observable needs --observable FILE")
        obs = _observable(args.observable, traj.dim)
        report = observable_rate(traj, obs, args.scheme, **kw).to_dict()
    elif args.kind == "entropy":
        est = two_stage_entropy(traj, args.split, scheme=args.scheme, **kw)
        report = est.to_dict()
        report["observable"] = est.extras["observable"].M
    else:
        report = winding_rate(traj, **kw).to_dict()
    write_json(report, args.out)
    return EXIT_OK


def cmd_test(args):
    traj = read_trajectory_csv(args.trajectory)
    model = load_model(args.model) if args.model else None
    rep = detailed_balance_test(
        traj,
        method=args.method,
        model_hint=model,
        statistic=args.statistic,
        n_boot=args.n_boot,
        seed=args.seed,
        split=args.split,
        block_len=args.block_len,
    )
    write_json(rep.to_dict(), args.out)
    return EXIT_OK


def cmd_geometry(args):
    if args.omega_sweep is not None:
        lo, hi, n = args.omega_sweep
        n = int(n)
        if n < 1:
            raise ConfigError("--omega-sweep needs at least one point")
        omegas = np.linspace(lo, hi, n)
    else:
        omegas = [args.omega]
    plist = [StandardParams2D(args.lambda_bar, args.mu, w) for w in omegas]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_table_csv(out / "geometry.csv", GEOMETRY_COLUMNS, geometry_rows(plist))
    rows, contacts = ellipse_rows(plist, args.n_points)
    write_table_csv(out / "ellipses.csv", ["x", "y", "curve_id"], rows)
    write_table_csv(out / "tangency.csv", ["omega", "ellipse", "x", "y"], contacts)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateEccentricity)
        geos = [ellipse_geometry(p) for p in plist]
    summary = {
        "lambda_bar": args.lambda_bar,
        "mu": args.mu,
        "degenerate": bool(geos[0].degenerate),
        "flags": ["DegenerateEccentricity"] if geos[0].degenerate else [],
        "inner": geos[0].inner,
        "outer": geos[0].outer,
        "curves": [
            {
                "omega": p.omega,
                "covariance": g.sigma,
                "tilt_rad": g.tilt,
                "s_max": g.s_plus,
                "s_min": g.s_minus,
                "inner_dir": g.inner_dir,
                "outer_dir": g.outer_dir,
            }
            for p, g in zip(plist, geos)
        ],
    }
    write_json(summary, out / "geometry.json")
    return EXIT_OK


def cmd_figures(args):
    config = load_json(args.config) if args.config else None
    paths = run_figure(args.which, args.seed, args.out_dir, config, _threads(args))
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: $OUAREA_THREADS or 1)")

    parser = argparse.ArgumentParser(prog="ouarea", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a trajectory from a run config")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_simulate)

    def boot_args(q):
        q.add_argument("--n-boot", type=int, default=200)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--block-len", type=int, default=None)
        q.add_argument("--out", default=None, help="output JSON (default: stdout)")

    p = sub.add_parser("estimate", parents=[common], help="estimate a rate from a trajectory CSV")
    p.add_argument("kind", choices=["area", "observable", "entropy", "winding"])
    p.add_argument("trajectory")
    p.add_argument("--plane", type=int, nargs=2, default=[1, 2], metavar=("I", "J"))
    p.add_argument("--observable", default=None, help='JSON {"M": [[...]], "v": [...]}')
    p.add_argument("--scheme", choices=["midpoint", "ito"], default="midpoint")
    p.add_argument("--split", type=float, default=0.5)
    boot_args(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("test", parents=[common], help="test for broken detailed balance")
    p.add_argument("trajectory")
    p.add_argument("--method", choices=METHODS, default="block_bootstrap")
    p.add_argument("--statistic", choices=STATISTICS, default="entropy")
    p.add_argument("--model", default=None, help="model JSON used by plugin_z")
    p.add_argument("--split", type=float, default=0.5)
    boot_args(p)
    p.set_defaults(func=cmd_test, n_boot=1000)

    p = sub.add_parser("geometry", parents=[common], help="closed-form planar geometry")
    p.add_argument("--lambda-bar", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--omega", type=float)
    g.add_argument("--omega-sweep", type=float, nargs=3, metavar=("LO", "HI", "N"))
    p.add_argument("--n-points", type=int, default=361)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_geometry)

    p = sub.add_parser("figures", parents=[common], help="write the data behind a figure")
    p.add_argument("which", choices=FIGURES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--config", default=None, help="JSON overriding the default figure parameters")
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
        return args.func(args)
    except TooShort as exc:
        print(f"{exc}", file=sys.stderr)
        return EXIT_SHORT
    except InvalidInput as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
