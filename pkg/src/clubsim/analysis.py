"""Metrics, Pareto classification, correlation statistics, and pathway mapping.

Protocol variants are compared on two axes: end-of-horizon atmospheric
warming (minimize) and gross output summed over regions and steps
(maximize). Temperature outcomes map onto representative concentration /
shared socioeconomic pathway labels through fixed bands anchored on
three reference temperatures (2.09, 3.20, 4.43 degC).

Correlation p-values come from a seeded two-sided permutation test rather
than a t distribution, so results are identical across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import EpisodeTrace


@dataclass(frozen=True)
class MetricPoint:
    """One protocol variant's (climate, economy) summary."""

    label: str
    temperature_rise: float      # final T_AT, degC
    gross_output_total: float    # trillion USD over all regions and steps
    seed: int = 0


@dataclass(frozen=True)
class CorrelationResult:
    variable: str
    r: float
    p: float
    n: int

    def __post_init__(self):
        if not -1.0 <= self.r <= 1.0:
            raise ValueError("correlation outside [-1, 1]")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p-value outside [0, 1]")
        if self.n < 3:
            raise ValueError("correlation needs at least 3 samples")


@dataclass(frozen=True)
class PathwayLabel:
    rcp: str
    ssp: str


def episode_metrics(trace: EpisodeTrace, label: str = "", seed: int = 0) -> MetricPoint:
    """Final warming and total gross output of one episode."""
    return MetricPoint(
        label=label,
        temperature_rise=trace.final_t_at,
        gross_output_total=trace.total_gross_output,
        seed=seed,
    )


def pareto_front(points: list[MetricPoint]) -> list[bool]:
    """Flag each point as Pareto dominant (True) or dominated (False).

    A point is dominated when some other point is no hotter and no poorer,
    and strictly better on at least one axis. Sort-and-scan; the tests hold
    it against the quadratic pairwise oracle.
    """
    if not points:
        raise ValueError("pareto_front needs at least one point")
    n = len(points)
    order = sorted(
        range(n), key=lambda i: (points[i].temperature_rise, -points[i].gross_output_total)
    )
    dominant = [True] * n
    best_cooler = -np.inf  # max output among strictly cooler points
    i = 0
    while i < n:
        j = i
        temp = points[order[i]].temperature_rise
        while j < n and points[order[j]].temperature_rise == temp:
            j += 1
        group = order[i:j]
        group_best = max(points[k].gross_output_total for k in group)
        for k in group:
            out = points[k].gross_output_total
            if best_cooler >= out or out < group_best:
                dominant[k] = False
        best_cooler = max(best_cooler, group_best)
        i = j
    return dominant


def pareto_front_oracle(points: list[MetricPoint]) -> list[bool]:
    """Quadratic pairwise dominance check; the reference for pareto_front."""
    n = len(points)
    flags = [True] * n
    for i in range(n):
        ti, oi = points[i].temperature_rise, points[i].gross_output_total
        for j in range(n):
            if i == j:
                continue
            tj, oj = points[j].temperature_rise, points[j].gross_output_total
            if tj <= ti and oj >= oi and (tj < ti or oj > oi):
                flags[i] = False
                break
    return flags


def pearson(
    xs,
    ys,
    name: str = "",
    permutations: int = 10_000,
    seed: int = 0,
) -> CorrelationResult:
    """Pearson r with a seeded two-sided permutation p-value."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("series must be one-dimensional and equally long")
    n = x.shape[0]
    if n < 3:
        raise ValueError("correlation needs at least 3 samples")
    sx, sy = x.std(), y.std()
    if sx == 0.0 or sy == 0.0:
        raise ValueError(f"correlation undefined for constant series {name!r}")
    xn = (x - x.mean()) / sx
    yn = (y - y.mean()) / sy
    # mathematically |r| <= 1; float rounding can overshoot by an ulp
    r = float(np.clip(np.mean(xn * yn), -1.0, 1.0))
    rng = np.random.default_rng(seed)
    permuted = rng.permuted(np.tile(yn, (permutations, 1)), axis=1)
    r_null = permuted @ xn / n
    exceed = int(np.count_nonzero(np.abs(r_null) >= abs(r)))
    p = (exceed + 1) / (permutations + 1)
    return CorrelationResult(variable=name, r=r, p=p, n=n)


ABATEMENT_FEATURES = ("capital", "production_factor", "carbon_intensity", "gross_output")


def abatement_correlations(
    traces: list[EpisodeTrace],
    permutations: int = 10_000,
    seed: int = 0,
) -> list[CorrelationResult]:
    """Correlate per-region episode abatement cost with development features.

    Pools (region, run) samples across the ensemble: initial capital,
    initial productivity, and initial carbon intensity are taken from the
    roster; gross output is the episode total.
    """
    cost, capital, tfp, sigma, output = [], [], [], [], []
    for trace in traces:
        n = len(trace.regions_initial)
        total_cost = np.zeros(n)
        total_output = np.zeros(n)
        for record in trace.steps:
            total_cost += np.asarray(record.abatement_cost)
            total_output += np.asarray(record.gross_output)
        for i, region in enumerate(trace.regions_initial):
            cost.append(total_cost[i])
            capital.append(region.capital)
            tfp.append(region.tfp)
            sigma.append(region.carbon_intensity)
            output.append(total_output[i])
    if len(cost) < 3:
        raise ValueError("need at least 3 pooled samples")
    features = {
        "capital": capital,
        "production_factor": tfp,
        "carbon_intensity": sigma,
        "gross_output": output,
    }
    return [
        pearson(features[name], cost, name=name, permutations=permutations, seed=seed)
        for name in ABATEMENT_FEATURES
    ]


# Temperature bands interpolating the three reference anchor temperatures; the
# coolest band extrapolates below the coolest anchor.
PATHWAY_BANDS = (
    (1.8, "RCP 2.6", "SSP 1"),
    (2.6, "RCP 3.4/4.5", "SSP 2"),
    (3.8, "RCP 6.0", "SSP 2/4.5"),
    (float("inf"), "RCP 7.5/8.5", "SSP 7"),
)


def map_to_pathway(temperature_rise: float) -> PathwayLabel:
    """Banded lookup from end-of-horizon warming to (RCP, SSP) labels."""
    if not np.isfinite(temperature_rise):
        raise ValueError("temperature must be finite")
    for upper, rcp, ssp in PATHWAY_BANDS:
        if temperature_rise < upper:
            return PathwayLabel(rcp=rcp, ssp=ssp)
    raise AssertionError("unreachable")
