"""Command line entry point.

    vibtransfer noise-check --config bath.toml
    vibtransfer run --config run.toml --out out/run
    vibtransfer sweep --config sweep.toml
    vibtransfer compare out/a out/b --metric transferred
    vibtransfer preset fig2 --out out/fig2

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .config import ConfigError, ExperimentConfig, load_config
from .correlation import CorrelationSpec
from .experiments import (METRICS, PRESETS, GridMismatch, compare, load_bundle_trajectory, noise_check,
                          preset, run, sweep)
from .forster import NonConvergent
from .heom import DepthUnstable, OverdampedRegime
from .noise import FactorizationFailed, TimeGrid

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML config (or a bundle's metadata.json)")
    p.add_argument("--seed", type=int, help="override base_seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--traj", type=int, help="override number of noise trajectories")
    p.add_argument("--dt", type=float, help="override time step [1/J]")
    p.add_argument("--horizon", type=float, help="override final time [1/J]")
    p.add_argument("--workers", type=int, default=1, help="concurrent trajectory blocks / sweep points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vibtransfer", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("noise-check", help="compare sampled noise correlation with its kernel")
    _common(p)
    p.add_argument("--gamma0", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--omega", type=float, default=0.0)

    for name, text in (("run", "run one configured experiment"), ("sweep", "run a configured parameter sweep")):
        _common(sub.add_parser(name, help=text))

    p = sub.add_parser("compare", help="compare a metric between two run bundles")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--metric", choices=METRICS, default="transferred")
    p.add_argument("--file", default="trajectory.csv", help="trajectory CSV name inside each bundle")

    p = sub.add_parser("preset", help="reproduce a figure data set")
    p.add_argument("name", choices=PRESETS)
    _common(p)
    return parser


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.traj is not None:
        changes["n_traj"] = args.traj
    if args.out is not None:
        changes["outputs"] = args.out
    if args.workers and args.workers > 1:
        changes["workers"] = args.workers
    if args.dt is not None or args.horizon is not None:
        dt = args.dt if args.dt is not None else cfg.grid.dt
        horizon = args.horizon if args.horizon is not None else cfg.grid.horizon
        try:
            changes["grid"] = TimeGrid.from_horizon(dt, horizon)
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from exc
    return replace(cfg, **changes).validate()


def _noise_spec(args):
    if args.config:
        cfg = load_config(args.config)
        if not isinstance(cfg.bath, CorrelationSpec):
            raise ConfigError("bath: noise-check needs a kernel-term bath")
        return cfg.bath, cfg.grid, cfg.n_traj, cfg.base_seed
    if args.tau is None or (args.gamma0 is None) == (args.sigma is None):
        raise ConfigError("noise-check: give --config or --tau with exactly one of --gamma0/--sigma")
    try:
        spec = (CorrelationSpec.single(args.gamma0, args.tau, args.omega) if args.gamma0 is not None
                else CorrelationSpec.from_sigma(args.sigma, args.tau, args.omega))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return spec, TimeGrid.from_horizon(0.01, 20.0), 10_000, 0


def _dispatch(args) -> int:
    if args.command == "noise-check":
        spec, grid, n_traj, seed = _noise_spec(args)
        if args.dt is not None or args.horizon is not None:
            grid = TimeGrid.from_horizon(args.dt or grid.dt, args.horizon or grid.horizon)
        report = noise_check(spec, grid, args.traj or n_traj, seed if args.seed is None else args.seed,
                             out=args.out)
        print(json.dumps(report, indent=2))
        return EXIT_OK if report["passed"] else EXIT_NUMERIC

    if args.command in ("run", "sweep"):
        if not args.config:
            raise ConfigError("--config: required")
        cfg = _apply_overrides(load_config(args.config), args)
        bundle = run(cfg) if args.command == "run" else sweep(cfg)
        print(f"wrote {bundle.path} ({', '.join(bundle.files)})")
        if "maxima" in bundle.meta:
            for x, y in bundle.meta["maxima"]:
                print(f"maximum at {bundle.meta['parameter']}={x:g}: {bundle.meta['metric']}={y:.6g}")
        return EXIT_OK

    if args.command == "compare":
        try:
            a = load_bundle_trajectory(args.run_a, args.file)
            b = load_bundle_trajectory(args.run_b, args.file)
        except OSError as exc:
            raise ConfigError(f"compare: {exc}") from exc
        print(json.dumps(compare(a, b, args.metric), indent=2))
        return EXIT_OK

    if args.command == "preset":
        out = args.out or f"out/{args.name}"
        bundle = preset(args.name, out, n_traj=args.traj or 10_000, seed=args.seed or 0, dt=args.dt,
                        horizon=args.horizon, workers=args.workers)
        print(f"wrote {bundle.path} ({len(bundle.files)} files)")
        for x, y in bundle.meta.get("maxima", []):
            print(f"maximum at omega={x:g}: {y:.6g}")
        if "best_case" in bundle.meta:
            print(f"most efficient case: {bundle.meta['best_case']}")
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (ConfigError, GridMismatch, OverdampedRegime) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergent, FactorizationFailed, DepthUnstable) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
