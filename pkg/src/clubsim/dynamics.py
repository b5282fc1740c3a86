"""Climate-economy transition functions on a five-year step.

Each region runs a Cobb-Douglas economy with quadratic temperature damages
and a convex abatement cost; all regions share a three-reservoir linear
carbon cycle and a two-layer energy-balance temperature model. Every
function here is pure: identical inputs give bit-identical outputs, and
nothing holds mutable state.

Units: capital and output in trillion USD (per year for flows), labor in
millions, carbon reservoirs in GtC, emissions in GtCO2 per year,
temperatures in degrees C above preindustrial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

GTC_PER_GTCO2 = 12.0 / 44.0

# Column-stochastic per-5-year transfer fractions between (atmosphere,
# upper ocean, lower ocean). Row = destination, column = source.
DEFAULT_CARBON_TRANSFER = (
    (0.88, 0.196, 0.0),
    (0.12, 0.797, 0.001465),
    (0.0, 0.007, 0.998535),
)


@dataclass(frozen=True)
class ModelConstants:
    """Global calibration shared by every region and the climate."""

    dt_years: float = 5.0
    horizon_steps: int = 20
    capital_elasticity: float = 0.3      # gamma
    depreciation: float = 0.1            # delta, per year
    savings_rate: float = 0.25
    damage_coeff: float = 0.00236        # fraction of output per degC^2
    abatement_exponent: float = 2.6      # theta2
    abatement_scale_decline: float = 0.005   # g_theta, per year
    sigma_decline: float = 0.01          # g_sigma, per year
    tfp_growth: float = 0.01             # g_A, per year
    forcing_per_doubling: float = 3.6813     # F2x, W/m^2
    climate_sensitivity: float = 3.1     # ECS, degC at doubled CO2
    temp_c1: float = 0.1005
    temp_c3: float = 0.088
    temp_c4: float = 0.025
    preindustrial_atmos_carbon: float = 588.0    # GtC
    carbon_transfer: tuple = DEFAULT_CARBON_TRANSFER

    def __post_init__(self):
        if self.dt_years <= 0:
            raise ValueError("dt_years must be positive")
        if self.horizon_steps < 1:
            raise ValueError("horizon_steps must be >= 1")
        if not 0.0 < self.capital_elasticity < 1.0:
            raise ValueError("capital_elasticity must lie in (0, 1)")
        if not 0.0 < self.savings_rate < 1.0:
            raise ValueError("savings_rate must lie in (0, 1)")
        b = np.asarray(self.carbon_transfer, dtype=float)
        if b.shape != (3, 3):
            raise ValueError("carbon_transfer must be a 3x3 matrix")
        if (b < 0.0).any() or (b > 1.0).any():
            raise ValueError("carbon_transfer entries must lie in [0, 1]")
        colsums = b.sum(axis=0)
        if not np.allclose(colsums, 1.0, rtol=0.0, atol=1e-12):
            raise ValueError(
                f"carbon_transfer columns must each sum to 1, got {colsums}"
            )

    def transfer_matrix(self) -> np.ndarray:
        return np.asarray(self.carbon_transfer, dtype=float)


@dataclass(frozen=True)
class RegionState:
    """Slow-moving stocks of one region."""

    capital: float          # K, trillion USD
    tfp: float              # A, total factor productivity
    labor: float            # L, millions, constant by default
    carbon_intensity: float  # sigma, GtCO2 per trillion USD of gross output
    abatement_scale: float  # theta1, output fraction at full mitigation

    def __post_init__(self):
        if self.capital < 0.0:
            raise ValueError("capital must be non-negative")
        if self.tfp <= 0.0 or self.labor <= 0.0:
            raise ValueError("tfp and labor must be positive")
        if self.carbon_intensity < 0.0 or self.abatement_scale < 0.0:
            raise ValueError("carbon_intensity and abatement_scale must be >= 0")


@dataclass(frozen=True)
class ClimateState:
    """Shared carbon reservoirs and two-layer temperatures."""

    m_at: float   # atmosphere, GtC
    m_up: float   # upper ocean, GtC
    m_lo: float   # lower ocean, GtC
    t_at: float   # atmospheric warming, degC above preindustrial
    t_lo: float   # deep-ocean warming, degC above preindustrial

    def __post_init__(self):
        if min(self.m_at, self.m_up, self.m_lo) <= 0.0:
            raise ValueError("reservoir masses must be positive")
        if not (math.isfinite(self.t_at) and math.isfinite(self.t_lo)):
            raise ValueError("temperatures must be finite")


@dataclass(frozen=True)
class RegionFlows:
    """Per-step flows implied by a region state and a mitigation rate."""

    gross_output: float    # Y, trillion USD
    damage_frac: float     # d, fraction of Y lost to warming
    abatement_frac: float  # Lambda, fraction of Y spent on mitigation
    net_output: float      # Y * (1 - d) * (1 - Lambda)
    emissions: float       # GtCO2 per year
    consumption: float     # pre-trade consumption, (1 - s) * net_output
    abatement_cost: float  # Lambda * Y, trillion USD


def default_climate() -> ClimateState:
    """Present-day-style starting climate."""
    return ClimateState(m_at=851.0, m_up=460.0, m_lo=1740.0, t_at=1.1, t_lo=0.27)


def gross_output(region: RegionState, constants: ModelConstants) -> float:
    """Cobb-Douglas production A * K^gamma * L^(1-gamma)."""
    g = constants.capital_elasticity
    return region.tfp * region.capital ** g * region.labor ** (1.0 - g)


def damage_fraction(t_at: float, constants: ModelConstants) -> float:
    """Quadratic damages a * T^2, clamped to [0, 0.99]."""
    d = constants.damage_coeff * t_at * t_at
    return min(max(d, 0.0), 0.99)


def abatement_cost_fraction(mu: float, theta1: float, theta2: float) -> float:
    """Power-law abatement cost theta1 * mu^theta2 as a fraction of output."""
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mitigation rate must lie in [0, 1], got {mu}")
    return theta1 * mu ** theta2


def emissions(sigma: float, mu: float, y: float) -> float:
    """Industrial emissions sigma * (1 - mu) * Y; exactly zero at mu=1."""
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mitigation rate must lie in [0, 1], got {mu}")
    if sigma < 0.0 or y < 0.0:
        raise ValueError("carbon intensity and output must be non-negative")
    return sigma * (1.0 - mu) * y


def region_flows(
    region: RegionState, mu: float, t_at: float, constants: ModelConstants
) -> RegionFlows:
    """All per-step flows for one region at mitigation rate mu."""
    y = gross_output(region, constants)
    d = damage_fraction(t_at, constants)
    lam = abatement_cost_fraction(mu, region.abatement_scale, constants.abatement_exponent)
    net = y * (1.0 - d) * (1.0 - lam)
    return RegionFlows(
        gross_output=y,
        damage_frac=d,
        abatement_frac=lam,
        net_output=net,
        emissions=emissions(region.carbon_intensity, mu, y),
        consumption=(1.0 - constants.savings_rate) * net,
        abatement_cost=lam * y,
    )


def step_carbon_cycle(
    climate: ClimateState, total_emissions: float, constants: ModelConstants
) -> ClimateState:
    """Advance reservoir masses one step, injecting emissions (GtCO2) as GtC.

    Total carbon mass grows by exactly total_emissions * 12/44 because the
    transfer matrix is column-stochastic.
    """
    if total_emissions < 0.0:
        raise ValueError("total_emissions must be non-negative")
    b = constants.transfer_matrix()
    m = np.array([climate.m_at, climate.m_up, climate.m_lo])
    m_next = b @ m
    m_next[0] += total_emissions * GTC_PER_GTCO2
    return replace(climate, m_at=m_next[0], m_up=m_next[1], m_lo=m_next[2])


def step_temperature(climate: ClimateState, constants: ModelConstants) -> ClimateState:
    """Two-layer energy balance: forcing from CO2, slow exchange with the deep ocean."""
    f2x = constants.forcing_per_doubling
    forcing = f2x * math.log2(climate.m_at / constants.preindustrial_atmos_carbon)
    lam = f2x / constants.climate_sensitivity
    t_at = climate.t_at + constants.temp_c1 * (
        forcing - lam * climate.t_at - constants.temp_c3 * (climate.t_at - climate.t_lo)
    )
    t_lo = climate.t_lo + constants.temp_c4 * (climate.t_at - climate.t_lo)
    return replace(climate, t_at=t_at, t_lo=t_lo)


def advance_exogenous(
    region: RegionState, investment: float, constants: ModelConstants
) -> RegionState:
    """Depreciate and invest capital; apply exogenous technology trends.

    investment is the per-year investment flow for this step (the engine
    passes the savings share of the region's post-trade resources).
    """
    dt = constants.dt_years
    capital = region.capital * (1.0 - constants.depreciation) ** dt + dt * investment
    return RegionState(
        capital=capital,
        tfp=region.tfp * math.exp(constants.tfp_growth * dt),
        labor=region.labor,
        carbon_intensity=region.carbon_intensity * math.exp(-constants.sigma_decline * dt),
        abatement_scale=region.abatement_scale
        * math.exp(-constants.abatement_scale_decline * dt),
    )


# Roster generator calibration. Outputs span one order of magnitude so that
# cross-region correlation analyses have signal; abatement_scale follows the
# DICE backstop convention of scaling with carbon intensity. The base cost
# is set low enough that full compliance beats breaking a club's trade ties
# for all but the most carbon-intensive rosters.
ROSTER_OUTPUT_RANGE = (3.0, 30.0)        # trillion USD
ROSTER_LABOR_RANGE = (100.0, 2000.0)     # millions
ROSTER_CAPITAL_OUTPUT_RATIO = (2.5, 3.5)
ROSTER_SIGMA_RANGE = (0.15, 0.9)         # GtCO2 per trillion USD
ROSTER_THETA1_BASE = 0.06
ROSTER_SIGMA_REF = 0.4


def generate_regions(
    n: int, rng: np.random.Generator, constants: ModelConstants
) -> tuple[RegionState, ...]:
    """Draw a heterogeneous region roster from a seeded generator.

    Target outputs, labor and carbon intensity are log-uniform; capital is
    tied to output through a capital/output ratio and tfp is solved so the
    production function reproduces the target output exactly.
    """
    if n < 2:
        raise ValueError("need at least two regions")
    g = constants.capital_elasticity
    regions = []
    for _ in range(n):
        y = math.exp(rng.uniform(*map(math.log, ROSTER_OUTPUT_RANGE)))
        labor = math.exp(rng.uniform(*map(math.log, ROSTER_LABOR_RANGE)))
        kappa = rng.uniform(*ROSTER_CAPITAL_OUTPUT_RATIO)
        sigma = math.exp(rng.uniform(*map(math.log, ROSTER_SIGMA_RANGE)))
        capital = kappa * y
        tfp = y / (capital ** g * labor ** (1.0 - g))
        theta1 = ROSTER_THETA1_BASE * sigma / ROSTER_SIGMA_REF
        regions.append(
            RegionState(
                capital=capital,
                tfp=tfp,
                labor=labor,
                carbon_intensity=sigma,
                abatement_scale=theta1,
            )
        )
    return tuple(regions)
