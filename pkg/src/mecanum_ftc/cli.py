"""Command-line interface: single runs, controller comparisons, seed sweeps."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import backend
from .errors import ConfigError, NumericalError
from .runner import run_scenario, write_run
from .scenario import ScenarioConfig, load_config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mecanum-ftc",
        description="Fault-tolerant control scenarios for a four-Mecanum-wheeled robot",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario")
    run_p.add_argument("--config", required=True, help="scenario config JSON")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.add_argument("--out", default="runs", help="output directory (default: runs)")
    run_p.add_argument("--controller", choices=("ftc", "apt", "pid"), default=None,
                       help="override the config controller")
    run_p.add_argument("--run-id", default=None, help="output subdirectory name")

    cmp_p = sub.add_parser("compare", help="run ftc, apt and pid on one scenario")
    cmp_p.add_argument("--config", required=True)
    cmp_p.add_argument("--seed", type=int, default=None)
    cmp_p.add_argument("--out", default="runs")

    sweep_p = sub.add_parser("sweep", help="seed sweep with aggregate statistics")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--seeds", type=int, required=True, help="number of consecutive seeds")
    sweep_p.add_argument("--seed", type=int, default=None, help="first seed (default: config seed)")
    sweep_p.add_argument("--out", default="runs")
    sweep_p.add_argument("--jobs", type=int, default=None, help="parallel workers")
    sweep_p.add_argument("--controller", choices=("ftc", "apt", "pid"), default=None)
    return parser


def _load(args) -> ScenarioConfig:
    config = load_config(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "controller", None) is not None:
        overrides["controller"] = args.controller
    return config.with_(**overrides) if overrides else config


def _cmd_run(args) -> int:
    config = _load(args)
    log, metrics = run_scenario(config)
    run_dir = write_run(log, metrics, config, args.out, args.run_id)
    print(f"run written to {run_dir} (backend: {backend.name()})")
    print(f"  position RMSE  {metrics.position_rmse:.4f} m")
    print(f"  velocity RMSE  {metrics.velocity_rmse:.4f} m/s")
    print(f"  runtime        {metrics.runtime_seconds:.2f} s")
    for i, seg in enumerate(metrics.segments, start=1):
        state = f"converged to {seg.converged_index} in {seg.convergence_time:.1f} s" \
            if seg.converged else f"not converged (final argmax {seg.final_argmax})"
        print(f"  segment {i} (t >= {seg.t_start:g} s, nearest {seg.nearest_index}): {state}")
    return 0


def _cmd_compare(args) -> int:
    config = _load(args)
    rows = []
    out = Path(args.out)
    for controller in ("ftc", "apt", "pid"):
        cfg = config.with_(controller=controller)
        log, metrics = run_scenario(cfg)
        write_run(log, metrics, cfg, out)
        rows.append((controller, metrics))
    print(f"{'controller':<12}{'pos RMSE [m]':>14}{'vel RMSE [m/s]':>16}{'runtime [s]':>13}")
    table = {}
    for controller, metrics in rows:
        print(f"{controller:<12}{metrics.position_rmse:>14.4f}"
              f"{metrics.velocity_rmse:>16.4f}{metrics.runtime_seconds:>13.2f}")
        table[controller] = metrics.to_dict(config.with_(controller=controller))
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.json").write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    return 0


def _sweep_worker(payload):
    config, outdir = payload
    log, metrics = run_scenario(config)
    write_run(log, metrics, config, outdir)
    return config.seed, metrics


def _cmd_sweep(args) -> int:
    config = _load(args)
    first = args.seed if args.seed is not None else config.seed
    if args.seeds < 1:
        raise ConfigError("--seeds must be at least 1")
    jobs = [(config.with_(seed=first + i), args.out) for i in range(args.seeds)]
    if args.jobs is not None and args.jobs <= 1:
        results = [_sweep_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    results.sort(key=lambda r: r[0])

    pos = np.array([m.position_rmse for _, m in results])
    vel = np.array([m.velocity_rmse for _, m in results])
    summary = {
        "controller": config.controller,
        "seeds": [s for s, _ in results],
        "position_rmse_mean": float(pos.mean()),
        "position_rmse_std": float(pos.std()),
        "position_rmse_min": float(pos.min()),
        "position_rmse_max": float(pos.max()),
        "velocity_rmse_mean": float(vel.mean()),
        "velocity_rmse_std": float(vel.std()),
        "per_seed": {str(s): m.to_dict() for s, m in results},
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"{args.seeds} runs complete; position RMSE "
          f"{summary['position_rmse_mean']:.4f} +/- {summary['position_rmse_std']:.4f} m")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "compare":
            return _cmd_compare(args)
        return _cmd_sweep(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
