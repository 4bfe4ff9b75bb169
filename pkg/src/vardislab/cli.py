"""Command-line front end.

Subcommands:
  run       execute a preset or a YAML config and write metrics.csv
  dtmc      hitting-time model: steps and seconds for a loss matrix
  rsm       fit the factorial response surface from a responses CSV
  capacity  search the smallest feasible update period for one deployment
  presets   list the built-in experiment families

Output directory resolution: --out flag, then the VARDIS_LAB_OUT
environment variable, then ./out.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dtmc as dtmc_mod
from .analysis import DEFAULT_LAMBDA_GRID_S, capacity_search, rsm_fit
from .config import ParseError, ValidationError, parse_config
from .deployment import DEPLOYMENT_KINDS, build_deployment
from .experiment import evaluate_point, run_experiment, write_rsm_csv
from .presets import all_presets, get_preset
from .config import ExperimentConfig


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get("VARDIS_LAB_OUT")
    return Path(env) if env else Path("out")


def _apply_overrides(cfg, args):
    updates = {}
    if args.duration is not None:
        updates["duration_s"] = args.duration
    if args.warmup is not None:
        updates["warmup_s"] = args.warmup
    if args.replications is not None:
        updates["replications"] = args.replications
    if args.seed is not None:
        updates["seed"] = args.seed
    return replace(cfg, **updates) if updates else cfg


def _cmd_run(args) -> int:
    if bool(args.preset) == bool(args.config):
        print("run: exactly one of --preset or --config is required",
              file=sys.stderr)
        return 2
    if args.preset:
        preset = get_preset(args.preset)
        mode = preset.mode
        points = list(preset.points)
    else:
        cfg = parse_config(args.config)
        mode = "sweep"
        points = [(cfg.name or Path(args.config).stem, cfg)]
    if args.limit_points:
        points = points[: args.limit_points]
    points = [(label, _apply_overrides(cfg, args)) for label, cfg in points]
    out = _out_dir(args)
    path = run_experiment(
        points,
        out,
        mode=mode,
        jobs=args.jobs,
        write_samples=args.write_samples,
        log=lambda msg: print(msg, file=sys.stderr) if args.verbose else None,
    )
    print(path)
    return 0


def _load_loss_csv(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row:
                rows.append([float(x) for x in row])
    q = np.array(rows)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError(f"loss CSV must be square, got shape {q.shape}")
    return q


def _cmd_dtmc(args) -> int:
    if args.loss_csv:
        q = _load_loss_csv(args.loss_csv)
        k_total = q.shape[0]
    else:
        kind = "line-variable" if args.line_variable else args.deployment
        k = args.line_variable or args.k
        if k is None:
            print("dtmc: need --line-variable K, --k, or --loss-csv",
                  file=sys.stderr)
            return 2
        dep, q = build_deployment(kind, k, per=args.per, span_m=args.span_m)
        k_total = dep.node_count
    steps = dtmc_mod.expected_hitting_steps(q)
    seconds = dtmc_mod.expected_delay_seconds(steps, k_total, args.beta)
    print(f"nodes: {k_total}")
    print(f"steps: {steps!r}")
    print(f"seconds: {seconds!r} (beta = {args.beta:g} Hz, exponential beacons)")
    return 0


def _cmd_rsm(args) -> int:
    with open(args.input, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        factor_names = header[:-1]
        responses = {}
        for row in reader:
            if not row:
                continue
            cell = tuple(int(x) for x in row[:-1])
            responses[cell] = float(row[-1])
    model = rsm_fit(responses)
    print(f"factors: {', '.join(factor_names)}")
    print(f"R^2 (%): {model.r2_pct:.4f}")
    print(f"average: {model.mean:.6g}  min: {model.minimum:.6g}  "
          f"max: {model.maximum:.6g}")
    for i, name in enumerate(factor_names):
        print(f"  {name}: coefficient {model.linear[i]:.6g}, "
              f"contribution {model.contributions[f'x{i + 1}']:.3f}%")
    for (i, j), coeff in sorted(model.interactions.items()):
        key = f"x{i + 1}:x{j + 1}"
        print(f"  {factor_names[i]}:{factor_names[j]}: coefficient "
              f"{coeff:.6g}, contribution {model.contributions[key]:.3f}%")
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    write_rsm_csv(out / "rsm.csv", model, factor_names)
    print(out / "rsm.csv")
    return 0


def _cmd_capacity(args) -> int:
    base = ExperimentConfig(
        deployment_kind=args.deployment,
        k=args.k,
        per=args.per,
        protocol="vardis",
        beacon_rate_hz=args.beta,
        rep_cnt=args.rep_cnt,
        max_sum_cnt=args.max_sum_cnt,
        max_beacon_bytes=args.max_beacon_bytes,
        update_distribution="exponential",
        producers="all",
        duration_s=args.duration or 150.0,
        warmup_s=args.warmup if args.warmup is not None else 30.0,
        replications=args.replications or 2,
        seed=args.seed or 1,
    )
    grid = (
        tuple(float(x) for x in args.lambda_grid.split(","))
        if args.lambda_grid
        else DEFAULT_LAMBDA_GRID_S
    )

    def runner(period):
        _, summary, _ = evaluate_point(
            replace(base, update_period_s=period), jobs=args.jobs
        )
        return summary

    lam = capacity_search(runner, args.kind, grid)
    if lam is None:
        print(f"{args.kind} capacity: infeasible over grid {grid}")
    else:
        print(f"{args.kind} capacity: smallest feasible update period "
              f"{lam!r} s")
    return 0


def _cmd_presets(args) -> int:
    if args.action != "list":
        print("presets: only 'list' is supported", file=sys.stderr)
        return 2
    for name, preset in sorted(all_presets().items()):
        print(f"{name}: {preset.description} "
              f"[{preset.mode}, {len(preset.points)} points; "
              f"{preset.scale_note}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vardislab",
        description="beacon-carried variable dissemination laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a preset or a config file")
    p_run.add_argument("--preset", help="preset name (see `presets list`)")
    p_run.add_argument("--config", help="YAML experiment file")
    p_run.add_argument("--seed", type=int, help="master seed override")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="parallel replications")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--duration", type=float, help="duration override (s)")
    p_run.add_argument("--warmup", type=float, help="warm-up override (s)")
    p_run.add_argument("--replications", type=int,
                       help="replication count override")
    p_run.add_argument("--limit-points", type=int,
                       help="only run the first N points of the preset")
    p_run.add_argument("--write-samples", action="store_true",
                       help="also write per-replication raw sample CSVs")
    p_run.add_argument("--verbose", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_dtmc = sub.add_parser("dtmc", help="hitting-time model")
    p_dtmc.add_argument("--loss-csv", help="square CSV of loss probabilities")
    p_dtmc.add_argument("--line-variable", type=int, metavar="K",
                        help="variable-density line with K nodes")
    p_dtmc.add_argument("--deployment", choices=DEPLOYMENT_KINDS,
                        default="line-variable")
    p_dtmc.add_argument("--k", type=int)
    p_dtmc.add_argument("--per", type=float)
    p_dtmc.add_argument("--span-m", type=float, default=1120.0)
    p_dtmc.add_argument("--beta", type=float, default=10.0,
                        help="beacon rate in Hz")
    p_dtmc.set_defaults(func=_cmd_dtmc)

    p_rsm = sub.add_parser("rsm", help="factorial response-surface fit")
    p_rsm.add_argument("--input", required=True,
                       help="CSV: factor columns in {-1,1}, response last")
    p_rsm.add_argument("--out", help="output directory")
    p_rsm.set_defaults(func=_cmd_rsm)

    p_cap = sub.add_parser("capacity", help="update-capacity search")
    p_cap.add_argument("--kind", choices=("delay", "reliability"),
                       required=True)
    p_cap.add_argument("--deployment", choices=DEPLOYMENT_KINDS,
                       default="grid-variable")
    p_cap.add_argument("--k", type=int, required=True)
    p_cap.add_argument("--per", type=float)
    p_cap.add_argument("--beta", type=float, default=20.0)
    p_cap.add_argument("--rep-cnt", type=int, default=1)
    p_cap.add_argument("--max-sum-cnt", type=int, default=10)
    p_cap.add_argument("--max-beacon-bytes", type=int, default=300)
    p_cap.add_argument("--lambda-grid",
                       help="comma-separated ascending periods in seconds")
    p_cap.add_argument("--duration", type=float)
    p_cap.add_argument("--warmup", type=float)
    p_cap.add_argument("--replications", type=int)
    p_cap.add_argument("--seed", type=int)
    p_cap.add_argument("--jobs", type=int, default=1)
    p_cap.set_defaults(func=_cmd_capacity)

    p_presets = sub.add_parser("presets", help="list experiment families")
    p_presets.add_argument("action", nargs="?", default="list")
    p_presets.set_defaults(func=_cmd_presets)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
