"""Command-line front end: ``matchprior solve|coverage|region|demo``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import demos
from .config import ConfigError, build_run_config, load_json
from .coverage import acceptance_fields, z_map
from .matching import solve_matching, stationarity_gap
from .measure import DiscreteMeasure


def fmt(value) -> str:
    return format(float(value), ".17g")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([fmt(v) for v in row])


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_prior(path, grid) -> DiscreteMeasure:
    """Prior from a ``theta,mass`` CSV whose thetas match the grid."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != grid.size or not np.allclose(data[:, 0], grid.points, rtol=0, atol=1e-12):
        raise ConfigError("prior CSV does not match the configured grid")
    return DiscreteMeasure.from_weights(grid, data[:, 1])


def _load(args):
    if args.config is None:
        raise ConfigError("--config is required")
    overrides = {"alpha": args.alpha, "a": args.a, "tol": args.tol, "max_iters": args.max_iters,
                 "damping": args.damping, "seed": args.seed}
    cfg = build_run_config(load_json(args.config), args.out, overrides)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg


def run_solve(args) -> int:
    cfg = _load(args)
    result = solve_matching(cfg.model, cfg.family, cfg.solver)
    out = cfg.out_dir
    grid = cfg.model.grid
    write_csv(out / "prior.csv", ["theta", "mass"], zip(grid.points, result.prior.mass))
    rep = result.report
    write_csv(out / "coverage.csv", ["theta", "coverage", "z"], zip(rep.theta, rep.coverage, rep.z))
    write_csv(out / "trace.csv", ["iter", "max_z", "w1_step"],
              ((i, mz, step) for i, (mz, step) in enumerate(result.trace)))
    summary = {
        "converged": bool(result.converged),
        "max_z": float(result.max_z),
        "iters": int(result.iterations),
        "params": cfg.params,
        "seed": int(cfg.solver.seed),
        "restarts_used": int(result.restarts_used),
        "stationarity_w1": float(stationarity_gap(cfg.model, cfg.family, result.prior, cfg.solver.plus_convention)),
    }
    write_json(out / "summary.json", summary)
    print(f"converged={summary['converged']} max_z={fmt(summary['max_z'])} iters={summary['iters']}")
    return 0 if result.converged else 1


def _prior_for(args, cfg) -> DiscreteMeasure:
    if args.prior:
        return read_prior(args.prior, cfg.model.grid)
    return DiscreteMeasure.uniform(cfg.model.grid)


def run_coverage(args) -> int:
    cfg = _load(args)
    prior = _prior_for(args, cfg)
    rep = z_map(cfg.model, cfg.family, prior)
    write_csv(cfg.out_dir / "coverage.csv", ["theta", "coverage", "z"], zip(rep.theta, rep.coverage, rep.z))
    write_json(cfg.out_dir / "summary.json",
               {"max_z": rep.max_z, "min_z": rep.min_z, "argmax_theta": float(rep.theta[rep.argmax_theta]),
                "params": cfg.params, "seed": int(cfg.solver.seed)})
    print(f"max_z={fmt(rep.max_z)}")
    return 0


def run_region(args) -> int:
    cfg = _load(args)
    prior = _prior_for(args, cfg)
    fields = acceptance_fields(cfg.model, cfg.family, prior)
    labels = cfg.model.sample_space.labels
    header = ["theta"] + [f"psi_x{label}" for label in labels]
    cols = [f.psi if f is not None else np.full(cfg.model.grid.size, np.nan) for f in fields]
    write_csv(cfg.out_dir / "region.csv", header, zip(cfg.model.grid.points, *cols))
    return 0


def run_demo(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "ball-jump":
        steps = int(round((args.c_max - args.c_min) / args.c_step))
        cs = np.round(args.c_min + args.c_step * np.arange(steps + 1), 10)
        rows = demos.ball_jump(cs, alpha=args.alpha or 0.5, n=args.n or 2200)
        write_csv(out / "ball_jump.csv", ["c", "radius"], rows)
    elif args.kind == "hpd-flip":
        grid, plus, minus = demos.hpd_flip(args.c, alpha=args.alpha or 0.5, n=args.n or 2000)
        write_csv(out / "hpd_flip.csv", ["theta", "psi_plus", "psi_minus"], zip(grid.points, plus, minus))
    else:
        grid, ball, relaxed, perturbed = demos.figure1(n=args.n or 2000, alpha=args.alpha or 0.5)
        write_csv(out / "figure1.csv", ["theta", "psi_ball", "psi_relaxed", "psi_perturbed"],
                  zip(grid.points, ball, relaxed, perturbed))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matchprior", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--alpha", type=float, help="miscoverage level")
        p.add_argument("--a", type=float, help="schedule value: eta = delta = a, gamma = a^4, beta = 1/a")
        p.add_argument("--tol", type=float, help="matching tolerance on max z")
        p.add_argument("--max-iters", type=int, dest="max_iters", help="iteration cap per run")
        p.add_argument("--damping", type=float, help="step weight of the update map, in (0, 1]")
        p.add_argument("--seed", type=int, help="seed for restart priors")
        return p

    common(sub.add_parser("solve", help="synthesize a matching prior")).set_defaults(func=run_solve)
    cov = common(sub.add_parser("coverage", help="coverage map of a prior"))
    cov.add_argument("--prior", help="CSV with columns theta, mass (default: uniform)")
    cov.set_defaults(func=run_coverage)
    reg = common(sub.add_parser("region", help="acceptance fields for every sample point"))
    reg.add_argument("--prior", help="CSV with columns theta, mass (default: uniform)")
    reg.set_defaults(func=run_region)

    demo = sub.add_parser("demo", help="discontinuity examples as CSV")
    demo.add_argument("kind", choices=["ball-jump", "hpd-flip", "figure1"])
    demo.add_argument("--out", default="out")
    demo.add_argument("--alpha", type=float)
    demo.add_argument("--n", type=int, help="grid cells")
    demo.add_argument("--c", type=float, default=0.2)
    demo.add_argument("--c-min", type=float, default=0.3, dest="c_min")
    demo.add_argument("--c-max", type=float, default=0.7, dest="c_max")
    demo.add_argument("--c-step", type=float, default=0.01, dest="c_step")
    demo.set_defaults(func=run_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
