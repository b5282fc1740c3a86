"""Bilateral trade flows, tariff application, and the club tariff-bound formula.

Mitigation and tariff levels share one discrete scale: integers 0..10, with
rate = level / 10. Both worked examples from the negotiation rules (a club
of 9 tariffs a member of club 7 at least 3; a club of 6 tariffs a member of
club 8 at most 2) are reproduced by the single formula ``10 - exporter
level``, applied as a floor below the club and as a ceiling at or above it.

Settlement arithmetic is exact: flows are snapped onto a dyadic grid of
10 * 2^-40 (about 9e-12 trillion USD) so that splitting a flow into tariff
revenue and export income at rate level/10 incurs no float rounding. Value
conservation then holds bit-for-bit under any summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LEVEL_MAX = 10

# Dyadic quantum divisible by 10: flows snapped here split exactly at k/10.
FLOW_QUANTUM = math.ldexp(10.0, -40)


def check_level(level: int, what: str = "level") -> int:
    if not isinstance(level, (int, np.integer)) or isinstance(level, bool):
        raise ValueError(f"{what} must be an integer, got {level!r}")
    if not 0 <= level <= LEVEL_MAX:
        raise ValueError(f"{what} must lie in [0, {LEVEL_MAX}], got {level}")
    return int(level)


def level_rate(level: int) -> float:
    """Rate carried by a discrete level: level / 10."""
    return check_level(level) / 10.0


def tariff_floor_level(exporter_level: int) -> int:
    """Minimum tariff a club imposes on a lower-mitigation exporter."""
    return LEVEL_MAX - check_level(exporter_level, "exporter level")


def tariff_ceiling_level(exporter_level: int) -> int:
    """Maximum tariff a club may impose on an exporter at or above its level."""
    return LEVEL_MAX - check_level(exporter_level, "exporter level")


def clamp_tariff(proposed: int, low: int, high: int) -> int:
    """Clamp a proposed tariff level into [low, high]; inverted bounds are fatal."""
    check_level(proposed, "proposed tariff")
    check_level(low, "lower bound")
    check_level(high, "upper bound")
    if low > high:
        raise ValueError(f"inverted tariff bounds ({low}, {high})")
    return min(max(proposed, low), high)


@dataclass(frozen=True)
class TariffMatrix:
    """Tariff levels chosen by importer i against exporter j; zero diagonal."""

    levels: np.ndarray

    def __post_init__(self):
        lv = np.asarray(self.levels)
        if lv.ndim != 2 or lv.shape[0] != lv.shape[1]:
            raise ValueError("tariff matrix must be square")
        if not np.issubdtype(lv.dtype, np.integer):
            raise ValueError("tariff levels must be integers")
        if (lv < 0).any() or (lv > LEVEL_MAX).any():
            raise ValueError("tariff levels must lie in [0, 10]")
        if np.diagonal(lv).any():
            raise ValueError("diagonal tariffs must be zero")
        object.__setattr__(self, "levels", lv)

    @classmethod
    def zeros(cls, n: int) -> "TariffMatrix":
        return cls(np.zeros((n, n), dtype=np.int64))

    @property
    def n(self) -> int:
        return self.levels.shape[0]


@dataclass(frozen=True)
class TradeOutcome:
    """Settled trade: who shipped what, who kept what, who collected what."""

    flows: np.ndarray           # x[i][j], value exported j -> i, pre-tariff
    income_by_pair: np.ndarray  # exporter's net take per pair
    revenue_by_pair: np.ndarray  # importer's tariff take per pair
    export_income: np.ndarray   # per exporter j
    tariff_revenue: np.ndarray  # per importer i
    import_value: np.ndarray    # gross import value per importer i


def snap_flow(value: float) -> float:
    """Round a value onto the settlement grid (multiples of FLOW_QUANTUM)."""
    return round(value / FLOW_QUANTUM) * FLOW_QUANTUM


def build_trade_flows(outputs: np.ndarray, openness: float) -> np.ndarray:
    """Allocate each region's exports (openness * output) across importers.

    Importer shares are proportional to importer output; the diagonal is
    zero. An all-zero output vector yields an all-zero matrix. Flows are
    snapped to the settlement grid, so column sums match openness * output
    only to within half a quantum per entry.
    """
    if not 0.0 <= openness <= 1.0:
        raise ValueError("openness must lie in [0, 1]")
    y = np.asarray(outputs, dtype=float)
    if (y < 0.0).any():
        raise ValueError("outputs must be non-negative")
    weight = y.sum() - y
    unit = np.divide(
        openness * y, weight, out=np.zeros_like(y), where=weight > 0.0
    )
    flows = y[:, None] * unit[None, :]
    np.fill_diagonal(flows, 0.0)
    return np.round(flows / FLOW_QUANTUM) * FLOW_QUANTUM


def settle_trade(flows: np.ndarray, tariffs: TariffMatrix) -> TradeOutcome:
    """Split every flow between exporter income and importer tariff revenue.

    Raising any tariff level moves value from the exporter to the importer;
    the two takes always sum to the flow exactly.
    """
    x = np.asarray(flows, dtype=float)
    lv = tariffs.levels
    if x.shape != lv.shape:
        raise ValueError("flows and tariff matrix shapes differ")
    tenth = x / 10.0
    revenue_by_pair = lv * tenth
    income_by_pair = (LEVEL_MAX - lv) * tenth
    return TradeOutcome(
        flows=x,
        income_by_pair=income_by_pair,
        revenue_by_pair=revenue_by_pair,
        export_income=income_by_pair.sum(axis=0),
        tariff_revenue=revenue_by_pair.sum(axis=1),
        import_value=x.sum(axis=1),
    )
