"""Command-line entry point: `sme-lab <subcommand>`.

Subcommands
-----------
lti / pendulum   run the Monte Carlo sweep for one benchmark system
estimate         build the stochastic set from a trajectory CSV (columns x,u)
calibrate        empirical concentration constant for a noise model
version          print the package version

Exit codes: 0 success, 2 invalid arguments or config, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .experiments import (
    ExperimentConfig,
    default_config,
    export_csv,
    run_monte_carlo,
    write_summary,
)
from .noise import NoiseModel, calibrate_kappa, kappa_delta
from .sme import build_stochastic_set, is_empty, set_volume
from .systems import TrajectoryData, rescale_isotropic


def _add_common_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int, help="override config seed")
    p.add_argument("--trials", type=int, help="override config trials")
    p.add_argument("--sigma", type=float, help="restrict sigma_grid to one value")
    p.add_argument("--delta", type=float, help="override config delta")
    p.add_argument("--threads", type=int, default=None,
                   help="max concurrent noise-level blocks "
                        "(default: SME_LAB_THREADS or available parallelism)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sme-lab")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    for system in ("lti", "pendulum"):
        p = sub.add_parser(system, help=f"run the {system} Monte Carlo sweep")
        _add_common_run_flags(p)

    p = sub.add_parser("estimate", help="stochastic set from a trajectory CSV")
    p.add_argument("--data", required=True, help="CSV with one x,u row per step")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--kappa", type=float, help="override the analytic constant")
    p.add_argument("--sigma", type=float, default=1.0,
                   help="assumed noise std (joint rescaling factor)")

    p = sub.add_parser("calibrate", help="empirical concentration constant")
    p.add_argument("--family", default="gaussian")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--nx", type=int, default=1)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)

    sub.add_parser("version", help="print the semantic version")
    return parser


def _resolve_threads(value):
    if value is not None:
        return value
    env = os.environ.get("SME_LAB_THREADS")
    if env:
        return int(env)
    return None  # experiments picks available parallelism


def _run_sweep(args, system: str) -> int:
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
        raw["system"] = system
        cfg = ExperimentConfig.from_dict(raw)
    else:
        cfg = default_config(system)
    overrides = cfg.to_dict()
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.sigma is not None:
        overrides["sigma_grid"] = [args.sigma]
    if args.delta is not None:
        overrides["delta"] = args.delta
    cfg = ExperimentConfig.from_dict(overrides)
    records = run_monte_carlo(cfg, threads=_resolve_threads(args.threads))
    export_csv(records, args.out)
    root, _ = os.path.splitext(args.out)
    write_summary(records, root + ".summary.json")
    return 0


def _read_xu_csv(path) -> TrajectoryData:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}: expected two columns x,u per row")
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError:
                if rows:
                    raise ValueError(f"{path}: non-numeric row {line!r}") from None
                continue  # header line
    if len(rows) < 3:
        raise ValueError(f"{path}: need at least 3 numeric rows")
    x = np.array([r[0] for r in rows])
    u = np.array([r[1] for r in rows])
    X = x[1:].reshape(1, -1)
    Z = np.vstack([x[:-1], u[:-1]])
    return TrajectoryData(X=X, Z=Z)


def _run_estimate(args) -> int:
    data = _read_xu_csv(args.data)
    if args.sigma != 1.0:
        data = rescale_isotropic(data, args.sigma, mode="joint")
    if not 0.0 < args.delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {args.delta}")
    kappa = args.kappa if args.kappa is not None else kappa_delta(args.delta, 1, 1.0, 0.5)
    pset = build_stochastic_set(data, kappa)
    empty = is_empty(pset)
    print(json.dumps({
        "N": pset.N,
        "delta": args.delta,
        "kappa": kappa,
        "center": pset.center.tolist(),
        "radius_eigenvalues": np.linalg.eigvalsh(pset.radius).tolist(),
        "empty": empty,
        "volume": 0.0 if empty else set_volume(pset),
    }, indent=2))
    return 0


def _run_calibrate(args) -> int:
    model = NoiseModel.from_config({"family": args.family, "sigma": args.sigma})
    kappa_hat = calibrate_kappa(model, args.nx, args.N, args.delta,
                                trials=args.trials, seed=args.seed)
    analytic = None
    if model.has_constants():
        analytic = kappa_delta(args.delta, args.nx, model.c1, model.c2)
    print(json.dumps({"kappa_hat": kappa_hat, "analytic_kappa": analytic}, indent=2))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.subcommand in ("lti", "pendulum"):
            return _run_sweep(args, args.subcommand)
        if args.subcommand == "estimate":
            return _run_estimate(args)
        if args.subcommand == "calibrate":
            return _run_calibrate(args)
        if args.subcommand == "version":
            print(__version__)
            return 0
        raise ValueError(f"unknown subcommand {args.subcommand!r}")
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"sme-lab: invalid input: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"sme-lab: {exc}", file=sys.stderr)
        return 1


def run():  # console-script shim
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
