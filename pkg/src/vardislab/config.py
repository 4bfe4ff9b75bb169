"""Experiment configuration: YAML schema, validation, kernel mapping.

A config file describes one parameter point: deployment, protocol,
beaconing, protocol parameters, traffic, and run control (duration,
warm-up, replications, master seed). parse_config collects *all*
violations with their field paths instead of stopping at the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import yaml

from .bp import BeaconTiming
from .deployment import DEPLOYMENT_KINDS, GRID_FIXED, LINE_FIXED
from .simkernel import PROTOCOLS, SimConfig, make_sim_config


class ParseError(Exception):
    pass


class ValidationError(Exception):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ExperimentConfig:
    """One runnable parameter point plus replication control."""

    deployment_kind: str = "line-fixed"
    k: int = 3
    per: float | None = None
    span_m: float = 1120.0
    protocol: str = "vardis"
    beacon_rate_hz: float = 10.0
    beacon_distribution: str = "periodic-jitter"
    jitter: float = 0.10
    rep_cnt: int = 1
    max_sum_cnt: int = 10
    summaries: bool = True
    max_beacon_bytes: int = 200
    update_period_s: float = 5.0
    update_distribution: str = "periodic"
    producers: str = "reference"
    duration_s: float = 600.0
    warmup_s: float = 30.0
    replications: int = 2
    seed: int = 1
    jobs: int = 1
    name: str = ""

    def to_sim_config(self) -> SimConfig:
        return make_sim_config(
            self.deployment_kind,
            self.k,
            per=self.per,
            span_m=self.span_m,
            producers=self.producers,
            protocol=self.protocol,
            timing=BeaconTiming(
                self.beacon_distribution, self.beacon_rate_hz, self.jitter
            ),
            rep_cnt=self.rep_cnt,
            max_sum_cnt=self.max_sum_cnt,
            max_beacon_bytes=self.max_beacon_bytes,
            summaries=self.summaries,
            update_period_s=self.update_period_s,
            update_distribution=self.update_distribution,
            duration_s=self.duration_s,
            warmup_s=self.warmup_s,
        ).validated()


_SCHEMA = {
    "name": str,
    "deployment": {"kind": str, "k": int, "per": float, "span_m": float},
    "protocol": str,
    "beacon": {"rate_hz": float, "distribution": str, "jitter": float},
    "vardis": {"rep_cnt": int, "max_sum_cnt": int, "summaries": bool},
    "max_beacon_bytes": int,
    "traffic": {"update_period_s": float, "distribution": str, "producers": str},
    "run": {
        "duration_s": float,
        "warmup_s": float,
        "replications": int,
        "seed": int,
        "jobs": int,
    },
}


def _check_keys(data: dict, schema: dict, path: str, problems: list) -> None:
    for key, value in data.items():
        where = f"{path}{key}"
        if key not in schema:
            problems.append(f"{where}: unknown key")
            continue
        want = schema[key]
        if isinstance(want, dict):
            if not isinstance(value, dict):
                problems.append(f"{where}: expected a mapping")
            else:
                _check_keys(value, want, where + ".", problems)
        elif want is float:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                problems.append(f"{where}: expected a number, got {value!r}")
        elif want is int:
            if not isinstance(value, int) or isinstance(value, bool):
                problems.append(f"{where}: expected an integer, got {value!r}")
        elif not isinstance(value, want):
            problems.append(f"{where}: expected {want.__name__}, got {value!r}")


def config_from_mapping(data: dict) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from parsed YAML/JSON data."""
    if not isinstance(data, dict):
        raise ValidationError(["top level: expected a mapping"])
    problems: list[str] = []
    _check_keys(data, _SCHEMA, "", problems)

    dep = data.get("deployment", {})
    beacon = data.get("beacon", {})
    vardis = data.get("vardis", {})
    traffic = data.get("traffic", {})
    run_ctl = data.get("run", {})
    for section, name in ((dep, "deployment"), (beacon, "beacon"),
                          (vardis, "vardis"), (traffic, "traffic"),
                          (run_ctl, "run")):
        if not isinstance(section, dict):
            raise ValidationError(problems or [f"{name}: expected a mapping"])

    defaults = ExperimentConfig()
    cfg = ExperimentConfig(
        name=data.get("name", ""),
        deployment_kind=dep.get("kind", defaults.deployment_kind),
        k=dep.get("k", defaults.k),
        per=dep.get("per", defaults.per),
        span_m=dep.get("span_m", defaults.span_m),
        protocol=data.get("protocol", defaults.protocol),
        beacon_rate_hz=beacon.get("rate_hz", defaults.beacon_rate_hz),
        beacon_distribution=beacon.get("distribution", defaults.beacon_distribution),
        jitter=beacon.get("jitter", defaults.jitter),
        rep_cnt=vardis.get("rep_cnt", defaults.rep_cnt),
        max_sum_cnt=vardis.get("max_sum_cnt", defaults.max_sum_cnt),
        summaries=vardis.get("summaries", defaults.summaries),
        max_beacon_bytes=data.get("max_beacon_bytes", defaults.max_beacon_bytes),
        update_period_s=traffic.get("update_period_s", defaults.update_period_s),
        update_distribution=traffic.get("distribution", defaults.update_distribution),
        producers=traffic.get("producers", defaults.producers),
        duration_s=run_ctl.get("duration_s", defaults.duration_s),
        warmup_s=run_ctl.get("warmup_s", defaults.warmup_s),
        replications=run_ctl.get("replications", defaults.replications),
        seed=run_ctl.get("seed", defaults.seed),
        jobs=run_ctl.get("jobs", defaults.jobs),
    )
    problems.extend(validate_config(cfg))
    if problems:
        raise ValidationError(problems)
    return cfg


def validate_config(cfg: ExperimentConfig) -> list[str]:
    problems = []
    if cfg.deployment_kind not in DEPLOYMENT_KINDS:
        problems.append(
            f"deployment.kind: {cfg.deployment_kind!r} not one of {DEPLOYMENT_KINDS}"
        )
    if cfg.k < 2:
        problems.append(f"deployment.k: must be >= 2, got {cfg.k}")
    if cfg.deployment_kind in (LINE_FIXED, GRID_FIXED) and cfg.per is None:
        problems.append("deployment.per: required for fixed-density deployments")
    if cfg.per is not None and not 0 <= cfg.per < 1:
        problems.append(f"deployment.per: must lie in [0, 1), got {cfg.per}")
    if cfg.span_m <= 0:
        problems.append("deployment.span_m: must be positive")
    if cfg.protocol not in PROTOCOLS:
        problems.append(f"protocol: {cfg.protocol!r} not one of {PROTOCOLS}")
    if cfg.beacon_rate_hz <= 0:
        problems.append("beacon.rate_hz: must be positive")
    if cfg.beacon_distribution not in ("periodic-jitter", "exponential"):
        problems.append(
            f"beacon.distribution: {cfg.beacon_distribution!r} unknown"
        )
    if not 0 <= cfg.jitter < 1:
        problems.append("beacon.jitter: must lie in [0, 1)")
    if not 1 <= cfg.rep_cnt <= 15:
        problems.append(f"vardis.rep_cnt: must lie in 1..15, got {cfg.rep_cnt}")
    if cfg.max_sum_cnt < 0:
        problems.append("vardis.max_sum_cnt: must be >= 0")
    if cfg.max_beacon_bytes < 20:
        problems.append("max_beacon_bytes: too small to carry anything")
    if cfg.update_period_s <= 0:
        problems.append("traffic.update_period_s: must be positive")
    if cfg.update_distribution not in ("periodic", "exponential"):
        problems.append(
            f"traffic.distribution: {cfg.update_distribution!r} unknown"
        )
    if cfg.producers not in ("reference", "all"):
        problems.append(f"traffic.producers: {cfg.producers!r} unknown")
    if cfg.duration_s <= 0:
        problems.append("run.duration_s: must be positive")
    if not 0 <= cfg.warmup_s < cfg.duration_s:
        problems.append("run.warmup_s: must lie in [0, duration_s)")
    if cfg.replications < 1:
        problems.append("run.replications: must be >= 1")
    if cfg.jobs < 1:
        problems.append("run.jobs: must be >= 1")
    return problems


def parse_config(path) -> ExperimentConfig:
    """Load a YAML experiment file; raises ParseError or ValidationError."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if data is None:
        data = {}
    return config_from_mapping(data)
