"""Ready-made experiment families.

Each preset expands to a list of runnable parameter points. Defaults are
desk-scaled: the reference study collected >= 100k updates at the chosen
consumer per point, which is far beyond a laptop budget; every preset
documents its scale-down factor. Durations and replication counts can be
overridden from the CLI without touching the grids.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .config import ExperimentConfig


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    mode: str  # "sweep", "dtmc" or "capacity"
    points: tuple  # of (label, ExperimentConfig)
    scale_note: str = ""


def _line_fixed_p20() -> Preset:
    points = []
    for summaries in (True, False):
        for beta in (10.0, 20.0):
            for rep_cnt in (1, 2, 3):
                for k in range(3, 18):
                    label = (
                        f"sum{'on' if summaries else 'off'}-b{beta:g}"
                        f"-r{rep_cnt}-k{k}"
                    )
                    points.append(
                        (
                            label,
                            ExperimentConfig(
                                name=label,
                                deployment_kind="line-fixed",
                                k=k,
                                per=0.20,
                                beacon_rate_hz=beta,
                                rep_cnt=rep_cnt,
                                summaries=summaries,
                                update_period_s=5.0,
                                duration_s=630.0,
                                warmup_s=30.0,
                                replications=2,
                            ),
                        )
                    )
    return Preset(
        "line-fixed-p20",
        "Fixed-density line, 20% per-hop loss: summarisation on/off, "
        "rep_cnt and beacon-rate sweep over K = 3..17",
        "sweep",
        tuple(points),
        scale_note="~240 updates/point vs >=100k in the study (factor ~400)",
    )


def _sensitivity_grid() -> Preset:
    points = []
    for per in (0.10, 0.20):
        for period in (0.3, 1.0):
            for beta in (10.0, 20.0):
                for rep_cnt in (1, 3):
                    for max_sum in (10, 20):
                        label = (
                            f"p{int(per * 100)}-l{period:g}-b{beta:g}"
                            f"-r{rep_cnt}-s{max_sum}"
                        )
                        points.append(
                            (
                                label,
                                ExperimentConfig(
                                    name=label,
                                    deployment_kind="grid-fixed",
                                    k=5,
                                    per=per,
                                    beacon_rate_hz=beta,
                                    rep_cnt=rep_cnt,
                                    max_sum_cnt=max_sum,
                                    max_beacon_bytes=300,
                                    update_period_s=period,
                                    update_distribution="exponential",
                                    producers="all",
                                    duration_s=150.0,
                                    warmup_s=30.0,
                                    replications=2,
                                ),
                            )
                        )
    return Preset(
        "sensitivity-grid",
        "2^3 factorial (beta, rep_cnt, max_sum_cnt) on fixed-density grids "
        "for the response-surface sensitivity analysis",
        "sweep",
        tuple(points),
        scale_note="K=5 grid and two update periods instead of K in {9,13} "
        "and three periods; a few hundred updates per point",
    )


def _flooding_comparison() -> Preset:
    points = []
    for protocol in ("vardis", "flooding"):
        for k in (5, 7):
            for period in (0.2, 1.0):
                for rep_cnt in (1, 2, 3):
                    label = f"{protocol}-k{k}-l{period:g}-r{rep_cnt}"
                    points.append(
                        (
                            label,
                            ExperimentConfig(
                                name=label,
                                deployment_kind="grid-fixed",
                                k=k,
                                per=0.10,
                                protocol=protocol,
                                beacon_rate_hz=20.0,
                                rep_cnt=rep_cnt,
                                max_sum_cnt=10,
                                update_period_s=period,
                                update_distribution="exponential",
                                producers="all",
                                duration_s=150.0,
                                warmup_s=30.0,
                                replications=2,
                            ),
                        )
                    )
    return Preset(
        "flooding-comparison",
        "Percentage of received updates, flooding vs variable dissemination "
        "on fixed-density grids",
        "sweep",
        tuple(points),
        scale_note="grids up to K=7 instead of K=11",
    )


def _line_variable_beta() -> Preset:
    points = []
    for distribution in ("exponential", "periodic-jitter"):
        for k in range(6, 13):
            label = f"{distribution}-k{k}"
            points.append(
                (
                    label,
                    ExperimentConfig(
                        name=label,
                        deployment_kind="line-variable",
                        k=k,
                        beacon_rate_hz=10.0,
                        beacon_distribution=distribution,
                        rep_cnt=3,
                        update_period_s=5.0,
                        duration_s=630.0,
                        warmup_s=30.0,
                        replications=2,
                    ),
                )
            )
    return Preset(
        "line-variable-beta",
        "Variable-density line: effect of the inter-beacon time "
        "distribution on the update delay",
        "sweep",
        tuple(points),
        scale_note="K up to 12 instead of 18",
    )


def _dtmc_validate() -> Preset:
    points = []
    for k in range(6, 13):
        label = f"k{k}"
        points.append(
            (
                label,
                ExperimentConfig(
                    name=label,
                    deployment_kind="line-variable",
                    k=k,
                    protocol="vardis-always-repeat",
                    beacon_rate_hz=10.0,
                    beacon_distribution="exponential",
                    rep_cnt=3,
                    update_period_s=5.0,
                    duration_s=630.0,
                    warmup_s=30.0,
                    replications=2,
                ),
            )
        )
    return Preset(
        "dtmc-validate",
        "Variable-density line in always-repeat mode vs the Markov-chain "
        "hitting-time model, side by side",
        "dtmc",
        tuple(points),
        scale_note="K up to 12; the numerical model is exact, only the "
        "simulation column carries sampling noise",
    )


def _grid_capacity() -> Preset:
    points = []
    for k in (5, 7, 9):
        label = f"k{k}"
        points.append(
            (
                label,
                ExperimentConfig(
                    name=label,
                    deployment_kind="grid-variable",
                    k=k,
                    beacon_rate_hz=20.0,
                    rep_cnt=1,
                    max_sum_cnt=10,
                    max_beacon_bytes=300,
                    update_distribution="exponential",
                    producers="all",
                    duration_s=150.0,
                    warmup_s=30.0,
                    replications=2,
                ),
            )
        )
    return Preset(
        "grid-capacity",
        "Variable-density grids: smallest per-node update period meeting "
        "the delay (250 ms) and reliability (gap 1.5) constraints",
        "capacity",
        tuple(points),
        scale_note="K in {5,7,9} instead of up to 13",
    )


_BUILDERS = (
    _line_fixed_p20,
    _sensitivity_grid,
    _flooding_comparison,
    _line_variable_beta,
    _dtmc_validate,
    _grid_capacity,
)


def all_presets() -> dict[str, Preset]:
    return {p.name: p for p in (b() for b in _BUILDERS)}


def get_preset(name: str) -> Preset:
    presets = all_presets()
    if name not in presets:
        known = ", ".join(sorted(presets))
        raise KeyError(f"unknown preset {name!r}; known presets: {known}")
    return presets[name]
