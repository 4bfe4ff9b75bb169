"""Experiment orchestration: replications, aggregation, CSV outputs.

run_experiment executes a list of parameter points (a preset or a single
config), aggregates replications into per-point metrics and writes
metrics.csv; dtmc mode adds the numerical-model columns, capacity mode
searches the update-period grid per point and writes capacity.csv
instead. Output schemas are documented in docs/outputs.md.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

from . import dtmc
from .analysis import (
    DEFAULT_LAMBDA_GRID_S,
    MetricSummary,
    NoSamples,
    capacity_search,
    summarize_replications,
)
from .config import ExperimentConfig
from .simkernel import run_replications, write_samples_csv

METRICS_FIELDS = (
    "point", "protocol", "deployment", "k", "per", "span_m", "beta_hz",
    "timing", "jitter", "rep_cnt", "max_sum_cnt", "summaries",
    "max_beacon_bytes", "update_period_s", "update_distribution", "producers",
    "duration_s", "warmup_s", "replications", "seed", "n_samples",
    "mean_delay_s", "delay_ci95", "mean_gap", "gap_ci95", "pct_received",
    "pct_ci95",
)
DTMC_EXTRA_FIELDS = ("dtmc_steps", "dtmc_delay_s", "delay_rel_err")
CAPACITY_FIELDS = (
    "point", "k", "kind", "threshold", "lambda_min_s", "feasible",
)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    if value is None:
        return ""
    return str(value)


def evaluate_point(cfg: ExperimentConfig, jobs: int = 1):
    """Run one parameter point: replications plus reference-pair summary."""
    sim_cfg = cfg.to_sim_config()
    results = run_replications(sim_cfg, cfg.seed, cfg.replications, jobs=jobs)
    dep = sim_cfg.deployment
    summary = summarize_replications(results, dep.producer, dep.consumer)
    return results, summary, dep


def _config_columns(label: str, cfg: ExperimentConfig) -> dict:
    return {
        "point": label,
        "protocol": cfg.protocol,
        "deployment": cfg.deployment_kind,
        "k": cfg.k,
        "per": cfg.per,
        "span_m": cfg.span_m,
        "beta_hz": cfg.beacon_rate_hz,
        "timing": cfg.beacon_distribution,
        "jitter": cfg.jitter,
        "rep_cnt": cfg.rep_cnt,
        "max_sum_cnt": cfg.max_sum_cnt,
        "summaries": cfg.summaries,
        "max_beacon_bytes": cfg.max_beacon_bytes,
        "update_period_s": cfg.update_period_s,
        "update_distribution": cfg.update_distribution,
        "producers": cfg.producers,
        "duration_s": cfg.duration_s,
        "warmup_s": cfg.warmup_s,
        "replications": cfg.replications,
        "seed": cfg.seed,
    }


def _metric_columns(summary: MetricSummary | None) -> dict:
    if summary is None:
        return {
            "n_samples": 0,
            "mean_delay_s": math.nan, "delay_ci95": math.nan,
            "mean_gap": math.nan, "gap_ci95": math.nan,
            "pct_received": math.nan, "pct_ci95": math.nan,
        }
    return {
        "n_samples": summary.n_samples,
        "mean_delay_s": summary.mean_delay_s,
        "delay_ci95": summary.delay_ci95,
        "mean_gap": summary.mean_gap,
        "gap_ci95": summary.gap_ci95,
        "pct_received": summary.pct_received,
        "pct_ci95": summary.pct_ci95,
    }


def run_experiment(points, out_dir, mode: str = "sweep", jobs: int = 1,
                   write_samples: bool = False,
                   lambda_grid=DEFAULT_LAMBDA_GRID_S, log=None) -> Path:
    """Execute parameter points and write the run's CSV artefacts.

    Returns the path of the primary output (metrics.csv or capacity.csv).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    say = log if log is not None else lambda *_: None
    if mode == "capacity":
        return _run_capacity(points, out, jobs, lambda_grid, say)

    fields = METRICS_FIELDS + (DTMC_EXTRA_FIELDS if mode == "dtmc" else ())
    rows = []
    for label, cfg in points:
        say(f"running point {label}")
        try:
            results, summary, dep = evaluate_point(cfg, jobs=jobs)
        except NoSamples as exc:
            say(f"  point {label}: {exc}")
            results, summary, dep = None, None, None
        row = _config_columns(label, cfg)
        row.update(_metric_columns(summary))
        if mode == "dtmc":
            sim_cfg = cfg.to_sim_config()
            steps = dtmc.expected_hitting_steps(sim_cfg.q)
            model_delay = dtmc.expected_delay_seconds(
                steps, sim_cfg.deployment.node_count, cfg.beacon_rate_hz
            )
            row["dtmc_steps"] = steps
            row["dtmc_delay_s"] = model_delay
            row["delay_rel_err"] = (
                math.nan if summary is None
                else abs(summary.mean_delay_s - model_delay) / model_delay
            )
        rows.append(row)
        if write_samples and results is not None:
            for result in results:
                write_samples_csv(
                    out / f"samples-{label}-rep{result.replication}.csv",
                    result.samples,
                )
    path = out / "metrics.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row[f]) for f in fields])
    return path


def _run_capacity(points, out: Path, jobs: int, lambda_grid, say) -> Path:
    rows = []
    for label, cfg in points:
        for kind, threshold in (("delay", 0.25), ("reliability", 1.5)):
            say(f"searching {kind} capacity for point {label}")

            def runner(period, _cfg=cfg):
                point_cfg = replace(_cfg, update_period_s=period)
                _, summary, _ = evaluate_point(point_cfg, jobs=jobs)
                return summary

            lam = capacity_search(runner, kind, lambda_grid)
            rows.append(
                {
                    "point": label,
                    "k": cfg.k,
                    "kind": kind,
                    "threshold": threshold,
                    "lambda_min_s": lam,
                    "feasible": lam is not None,
                }
            )
    path = out / "capacity.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CAPACITY_FIELDS)
        for row in rows:
            writer.writerow([_fmt(row[f]) for f in CAPACITY_FIELDS])
    return path


def write_rsm_csv(path, model, factor_names=None) -> None:
    """Coefficient table in the layout of the sensitivity-analysis tables."""
    names = list(factor_names or (f"x{i + 1}" for i in range(model.k)))
    if len(names) != model.k:
        raise ValueError(f"expected {model.k} factor names, got {len(names)}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("term", "coefficient", "contribution_pct"))
        writer.writerow(("intercept", _fmt(model.intercept), ""))
        for i, name in enumerate(names):
            writer.writerow(
                (name, _fmt(model.linear[i]),
                 _fmt(model.contributions[f"x{i + 1}"]))
            )
        for (i, j), coeff in sorted(model.interactions.items()):
            writer.writerow(
                (f"{names[i]}:{names[j]}", _fmt(coeff),
                 _fmt(model.contributions[f"x{i + 1}:x{j + 1}"]))
            )
        writer.writerow(("r2_pct", _fmt(model.r2_pct), ""))
        writer.writerow(("mean", _fmt(model.mean), ""))
        writer.writerow(("min", _fmt(model.minimum), ""))
        writer.writerow(("max", _fmt(model.maximum), ""))
