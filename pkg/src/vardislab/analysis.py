"""Metrics, the analytic gap model, factorial sensitivity fits, capacity search.

Works over the raw per-received-update samples emitted by the kernel:
(consumer, producer, var_id, app_seqno, gen_time_s, recv_time_s). Delay is
recv - gen per sample; the gap is the mean difference of application
sequence numbers between consecutive receptions (1.0 means loss-free);
confidence intervals are Student-t over replication means.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

DELAY_CAPACITY_THRESHOLD_S = 0.250
RELIABILITY_GAP_THRESHOLD = 1.5

DEFAULT_LAMBDA_GRID_S = tuple(
    round(0.15 + 0.025 * i, 3) for i in range(15)
) + (0.75, 1.0, 1.5, 2.0)


class NoSamples(Exception):
    pass


class IncompleteDesign(Exception):
    pass


@dataclass
class MetricSummary:
    mean_delay_s: float
    mean_gap: float
    pct_received: float
    delay_ci95: float = 0.0
    gap_ci95: float = 0.0
    pct_ci95: float = 0.0
    n_samples: int = 0
    n_replications: int = 1


def _gap_mean(seqnos) -> float | None:
    if len(seqnos) < 2:
        return None
    return (seqnos[-1] - seqnos[0]) / (len(seqnos) - 1)


def compute_metrics(samples, issued: int | None = None,
                    by_pair: bool = False):
    """Point metrics for one replication's samples.

    Samples may mix producer/consumer pairs; gaps are computed within each
    pair over receptions ordered by receive time. With by_pair=True a dict
    keyed by (producer, consumer) is returned.
    """
    if not samples:
        raise NoSamples("no received updates")
    pairs: dict[tuple[int, int], list] = {}
    for s in samples:
        pairs.setdefault((s[1], s[0]), []).append(s)
    summaries = {}
    for pair, rows in pairs.items():
        rows.sort(key=lambda s: s[5])
        delays = [s[5] - s[4] for s in rows]
        gap = _gap_mean([s[3] for s in rows])
        pct = math.nan if issued is None else 100.0 * len(rows) / issued
        summaries[pair] = MetricSummary(
            mean_delay_s=float(np.mean(delays)),
            mean_gap=math.nan if gap is None else gap,
            pct_received=pct,
            n_samples=len(rows),
        )
    if by_pair:
        return summaries
    all_delays = [s[5] - s[4] for s in samples]
    gaps = [m.mean_gap for m in summaries.values() if not math.isnan(m.mean_gap)]
    pct = math.nan if issued is None else 100.0 * len(samples) / issued
    return MetricSummary(
        mean_delay_s=float(np.mean(all_delays)),
        mean_gap=float(np.mean(gaps)) if gaps else math.nan,
        pct_received=pct,
        n_samples=len(samples),
    )


def _student_ci(values) -> tuple[float, float]:
    values = [v for v in values if not math.isnan(v)]
    if not values:
        return math.nan, math.nan
    mean = float(np.mean(values))
    if len(values) < 2:
        return mean, 0.0
    half = stats.t.ppf(0.975, len(values) - 1) * np.std(values, ddof=1) / math.sqrt(
        len(values)
    )
    return mean, float(half)


def summarize_replications(results, producer: int, consumer: int) -> MetricSummary:
    """Aggregate RunResults for one producer/consumer pair.

    Each replication contributes one mean per metric; the 95% interval is
    Student-t over those means. Replications without received updates for
    the pair surface as NoSamples rather than being imputed.
    """
    delay_means, gap_means, pcts = [], [], []
    total = 0
    for result in results:
        rows = result.pair_samples(producer, consumer)
        if not rows:
            raise NoSamples(
                f"replication {result.replication} saw no updates for "
                f"pair ({producer}, {consumer})"
            )
        rows.sort(key=lambda s: s[5])
        total += len(rows)
        delay_means.append(float(np.mean([s[5] - s[4] for s in rows])))
        gap = _gap_mean([s[3] for s in rows])
        gap_means.append(math.nan if gap is None else gap)
        issued = result.issued.get(producer, 0)
        pcts.append(100.0 * len(rows) / issued if issued else math.nan)
    mean_delay, delay_ci = _student_ci(delay_means)
    mean_gap, gap_ci = _student_ci(gap_means)
    mean_pct, pct_ci = _student_ci(pcts)
    return MetricSummary(
        mean_delay_s=mean_delay,
        mean_gap=mean_gap,
        pct_received=mean_pct,
        delay_ci95=delay_ci,
        gap_ci95=gap_ci,
        pct_ci95=pct_ci,
        n_samples=total,
        n_replications=len(results),
    )


def expected_gap_model(per: float, rep_cnt: int, k: int) -> float:
    """Analytic mean gap without summaries over K-1 independent hops.

    An update crosses one hop when at least one of rep_cnt repetitions
    survives loss P, so it reaches the consumer with probability
    Q = (1 - P^rep_cnt)^(K-1); the gap is the geometric mean 1/Q.
    """
    if not 0 <= per < 1:
        raise ValueError("per must lie in [0, 1)")
    if rep_cnt < 1 or k < 2:
        raise ValueError("need rep_cnt >= 1 and k >= 2")
    q = (1.0 - per ** rep_cnt) ** (k - 1)
    return 1.0 / q


@dataclass
class RegressionModel:
    """Second-order 2^k factorial fit: intercept, linear and pairwise terms."""

    k: int
    intercept: float
    linear: tuple
    interactions: dict  # (i, j) with i < j -> coefficient
    sst: float
    sse: float
    r2_pct: float
    contributions: dict = field(default_factory=dict)  # term name -> percent
    mean: float = 0.0
    minimum: float = 0.0
    maximum: float = 0.0

    def predict(self, x) -> float:
        y = self.intercept + sum(a * xi for a, xi in zip(self.linear, x))
        for (i, j), a in self.interactions.items():
            y += a * x[i] * x[j]
        return y


def rsm_fit(responses: dict) -> RegressionModel:
    """Least-squares fit of the two-level full factorial response surface.

    `responses` maps tuples over {-1, +1} to observed values; all 2^k
    cells must be present. Thanks to design orthogonality each coefficient
    is the mean of the responses times the matching sign product. Factor
    contributions are 2^k * coefficient^2 / SST; for a constant response
    (SST = 0) contributions are defined as 0 with R^2 = 100%.
    """
    if not responses:
        raise IncompleteDesign("empty design")
    k = len(next(iter(responses)))
    cells = list(itertools.product((-1, 1), repeat=k))
    missing = [c for c in cells if c not in responses]
    extra = [c for c in responses if c not in set(cells)]
    if missing or extra:
        raise IncompleteDesign(
            f"design must cover exactly {{-1,1}}^{k}; "
            f"missing {missing[:3]}, unexpected {extra[:3]}"
        )
    n = 1 << k
    ys = np.array([float(responses[c]) for c in cells])
    xs = np.array(cells, dtype=float)
    ybar = ys.mean()
    intercept = ybar
    linear = tuple((ys * xs[:, i]).mean() for i in range(k))
    interactions = {
        (i, j): float((ys * xs[:, i] * xs[:, j]).mean())
        for i in range(k)
        for j in range(i + 1, k)
    }
    sst = float(((ys - ybar) ** 2).sum())
    fitted = np.full(n, intercept)
    for i in range(k):
        fitted += linear[i] * xs[:, i]
    for (i, j), a in interactions.items():
        fitted += a * xs[:, i] * xs[:, j]
    sse = float(((ys - fitted) ** 2).sum())
    contributions = {}
    for i in range(k):
        name = f"x{i + 1}"
        contributions[name] = 0.0 if sst == 0 else 100.0 * n * linear[i] ** 2 / sst
    for (i, j), a in interactions.items():
        name = f"x{i + 1}:x{j + 1}"
        contributions[name] = 0.0 if sst == 0 else 100.0 * n * a ** 2 / sst
    r2 = 100.0 if sst == 0 else 100.0 * (sst - sse) / sst
    return RegressionModel(
        k=k,
        intercept=float(intercept),
        linear=tuple(float(a) for a in linear),
        interactions=interactions,
        sst=sst,
        sse=sse,
        r2_pct=r2,
        contributions=contributions,
        mean=float(ybar),
        minimum=float(ys.min()),
        maximum=float(ys.max()),
    )


def capacity_search(runner, kind: str, lambda_grid=DEFAULT_LAMBDA_GRID_S):
    """Smallest update period in the grid meeting the capacity constraint.

    `runner` maps an update period to a MetricSummary for the reference
    pair. Feasibility uses the upper end of the 95% interval: mean delay
    below 250 ms for kind="delay", mean gap below 1.5 for
    kind="reliability". Returns None when no grid point qualifies; a
    period whose run yields no samples at all counts as infeasible.
    """
    if kind not in ("delay", "reliability"):
        raise ValueError(f"unknown capacity kind {kind!r}")
    grid = list(lambda_grid)
    if grid != sorted(grid):
        raise ValueError("lambda grid must be ascending")
    for period in grid:
        try:
            summary = runner(period)
        except NoSamples:
            continue
        if kind == "delay":
            upper = summary.mean_delay_s + summary.delay_ci95
            feasible = upper < DELAY_CAPACITY_THRESHOLD_S
        else:
            upper = summary.mean_gap + summary.gap_ci95
            feasible = upper < RELIABILITY_GAP_THRESHOLD
        if feasible and not math.isnan(upper):
            return period
    return None
