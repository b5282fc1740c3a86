"""Episode orchestration: negotiation rounds alternating with economic steps.

One episode advances the world ``horizon_steps`` times. Each step runs the
negotiation round (when a protocol is configured), lets every region pick
an executed mitigation level respecting its commitment floor, computes
production and trade under the round's tariffs, advances the carbon cycle
and temperatures with the summed emissions, and accumulates capital.

Per-region resources in a step are
``net_output * (1 - openness) + export_income + tariff_revenue``; the
savings rate splits them between consumption and investment, so globally
consumption + investment + abatement cost + damage losses add back up to
gross output.

Episodes are pure functions of their SimConfig and run index. Ensembles
derive per-run seeds from the master seed by spawn key, so results do not
depend on how many workers execute them.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .agents import Observation, PolicySpec, build_policy, reward
from .dynamics import (
    ClimateState,
    ModelConstants,
    RegionState,
    advance_exogenous,
    default_climate,
    generate_regions,
    region_flows,
    step_carbon_cycle,
    step_temperature,
)
from .protocol import (
    Commitment,
    ProtocolConfig,
    ProtocolError,
    PunishmentRegistry,
    RoundOutcome,
    apply_defection,
    run_negotiation_round,
    tariff_bounds_for,
)
from .trade import LEVEL_MAX, TariffMatrix, build_trade_flows, check_level, settle_trade


class EpisodeError(RuntimeError):
    """An episode aborted; carries the failing step and a diagnostic."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


class EnsembleError(RuntimeError):
    """One or more ensemble episodes aborted."""

    def __init__(self, failures):
        self.failures = failures  # list of (run_index, message)
        lines = ", ".join(f"run {i}: {msg}" for i, msg in failures)
        super().__init__(f"{len(failures)} episode(s) failed: {lines}")


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce one episode or ensemble exactly."""

    constants: ModelConstants = field(default_factory=ModelConstants)
    n_regions: int = 10
    regions: tuple[RegionState, ...] | None = None
    protocol: ProtocolConfig | None = field(default_factory=ProtocolConfig)
    policies: tuple[PolicySpec, ...] | None = None
    openness: float = 0.15
    master_seed: int = 0

    def __post_init__(self):
        if self.n_regions < 2:
            raise ValueError("need at least two regions")
        if self.regions is not None and len(self.regions) != self.n_regions:
            raise ValueError("explicit roster size disagrees with n_regions")
        if self.policies is not None and len(self.policies) != self.n_regions:
            raise ValueError("one policy spec per region required")
        if not 0.0 <= self.openness <= 1.0:
            raise ValueError("openness must lie in [0, 1]")

    def resolved_policies(self) -> tuple[PolicySpec, ...]:
        if self.policies is not None:
            return self.policies
        return tuple(PolicySpec(kind="greedy") for _ in range(self.n_regions))

    def label(self) -> str:
        return "none" if self.protocol is None else self.protocol.label()


def fingerprint(config: SimConfig) -> str:
    """Stable hash of a config, recorded in every trace."""
    digest = hashlib.sha256(repr(config).encode("utf-8"))
    return digest.hexdigest()


@dataclass(frozen=True)
class StepRecord:
    """Everything one step decided and produced, climate state after."""

    step: int
    commit_levels: tuple[int, ...]
    defected: tuple[bool, ...]
    mu_levels: tuple[int, ...]
    gross_output: tuple[float, ...]
    emissions: tuple[float, ...]
    abatement_cost: tuple[float, ...]
    consumption: tuple[float, ...]
    tariff_revenue: tuple[float, ...]
    export_income: tuple[float, ...]
    investment: tuple[float, ...]
    damage_loss: tuple[float, ...]
    climate: ClimateState
    tariffs: TariffMatrix


@dataclass(frozen=True)
class EpisodeTrace:
    fingerprint: str
    master_seed: int
    run_index: int
    regions_initial: tuple[RegionState, ...]
    steps: tuple[StepRecord, ...]
    final_t_at: float
    total_gross_output: float


class StepPreview:
    """One-step forward simulator for planning policies.

    Opponents are held at their last observed actions: last commitments,
    last defection flags, and last executed mitigation. Their tariff stance
    is taken at the recomputed bound ceiling, the revenue-maximizing choice
    every baseline policy makes, so the perceived threat tracks the bounds
    a candidate pledge would actually face.
    """

    def __init__(
        self,
        regions,
        t_at: float,
        constants: ModelConstants,
        openness: float,
        protocol: ProtocolConfig | None,
        registry: PunishmentRegistry,
        last_commits: np.ndarray,
        last_defected: np.ndarray,
        last_mu_levels: np.ndarray,
    ):
        self.regions = regions
        self.t_at = t_at
        self.constants = constants
        self.openness = openness
        self.protocol = protocol
        self.registry = registry
        self.last_commits = last_commits
        self.last_defected = last_defected
        self.has_protocol = protocol is not None
        self.allows_defection = protocol is not None and protocol.discrete_defect
        self._net = np.array(
            [
                region_flows(r, last_mu_levels[i] / 10.0, t_at, constants).net_output
                for i, r in enumerate(regions)
            ]
        )
        self._flow_cache: dict[tuple[int, int], tuple[float, np.ndarray]] = {}

    def _flows_with(self, region: int, mu_level: int):
        cached = self._flow_cache.get((region, mu_level))
        if cached is None:
            f_me = region_flows(
                self.regions[region], mu_level / 10.0, self.t_at, self.constants
            )
            nets = self._net.copy()
            nets[region] = f_me.net_output
            cached = (f_me.net_output, build_trade_flows(nets, self.openness))
            self._flow_cache[(region, mu_level)] = cached
        return cached

    def evaluate(self, region: int, commit: int, defect: bool, mode: str) -> float:
        """Own one-step reward if this region pledged ``commit`` and acted on it."""
        if not self.has_protocol:
            return self.evaluate_mitigation(region, 0 if defect else commit)
        mu_level = 0 if defect else commit
        net_me, flows = self._flows_with(region, mu_level)
        me = Commitment(region=region, level=commit, defected=defect)
        n = len(self.regions)
        income = 0.0
        revenue = 0.0
        for other in range(n):
            if other == region:
                continue
            same_club = commit > 0 and self.last_commits[other] == commit
            peer = Commitment(
                region=other,
                level=int(self.last_commits[other]),
                defected=bool(self.last_defected[other]),
            )
            # Incoming: peer as importer prices me at its bound ceiling.
            if self.protocol.max_punishment and (
                defect or self.registry.punished(region)
            ):
                tau_in = LEVEL_MAX
            else:
                _, tau_in = tariff_bounds_for(
                    peer, me, self.protocol, self.registry, same_club
                )
            income += (1.0 - tau_in / 10.0) * flows[other, region]
            # Outgoing: my own stance at the chosen bound.
            lo, hi = tariff_bounds_for(
                me, peer, self.protocol, self.registry, same_club
            )
            tau_out = lo if mode == "floor" else hi
            revenue += (tau_out / 10.0) * flows[region, other]
        resources = net_me * (1.0 - self.openness) + income + revenue
        consumption = (1.0 - self.constants.savings_rate) * resources
        return reward(consumption, self.regions[region].labor)

    def evaluate_mitigation(self, region: int, mu_level: int) -> float:
        """Reward under no protocol: free trade, no tariffs."""
        net_me, flows = self._flows_with(region, mu_level)
        income = flows[:, region].sum()
        resources = net_me * (1.0 - self.openness) + income
        consumption = (1.0 - self.constants.savings_rate) * resources
        return reward(consumption, self.regions[region].labor)


def run_episode(config: SimConfig, run_index: int = 0) -> EpisodeTrace:
    """Simulate one full episode; bit-identical for identical inputs."""
    constants = config.constants
    n = config.n_regions
    seed_seq = np.random.SeedSequence(
        entropy=config.master_seed, spawn_key=(run_index,)
    )
    children = seed_seq.spawn(n + 1)
    if config.regions is not None:
        regions = config.regions
    else:
        regions = generate_regions(n, np.random.default_rng(children[0]), constants)
    regions_initial = regions
    agents = [
        build_policy(spec, np.random.default_rng(children[1 + i]))
        for i, spec in enumerate(config.resolved_policies())
    ]

    climate = default_climate()
    registry = PunishmentRegistry()
    last_round: RoundOutcome | None = None
    last_flows = [None] * n
    last_commits = np.zeros(n, dtype=np.int64)
    last_defected = np.zeros(n, dtype=bool)
    last_mu = np.zeros(n, dtype=np.int64)
    records = []
    total_gross = 0.0

    for step in range(constants.horizon_steps):
        observations = [
            Observation(
                region=i,
                state=regions[i],
                flows=last_flows[i],
                t_at=climate.t_at,
                last_round=last_round,
                punished=registry.punished(i),
                step=step,
            )
            for i in range(n)
        ]
        preview = StepPreview(
            regions,
            climate.t_at,
            constants,
            config.openness,
            config.protocol,
            registry,
            last_commits,
            last_defected,
            last_mu,
        )

        if config.protocol is not None:
            try:
                outcome = run_negotiation_round(
                    agents, observations, preview, config.protocol, registry, step
                )
            except ProtocolError as exc:
                raise EpisodeError(step, str(exc)) from exc
            commitments = outcome.commitments
            tariffs = outcome.tariffs
        else:
            for agent, obs in zip(agents, observations):
                agent.begin_round(obs, preview)
            outcome = None
            commitments = tuple(Commitment(region=i, level=0) for i in range(n))
            tariffs = TariffMatrix.zeros(n)

        mu_levels = []
        for i in range(n):
            if config.protocol is not None:
                floor, forced = apply_defection(
                    commitments[i].level, commitments[i].defected, config.protocol
                )
            else:
                floor, forced = 0, False
            level = check_level(
                agents[i].choose_mitigation(observations[i], floor, forced),
                f"mitigation by region {i}",
            )
            if forced and level != 0:
                raise EpisodeError(step, f"region {i} ignored the forced-zero rule")
            if not commitments[i].defected and level < floor:
                raise EpisodeError(
                    step, f"region {i} executed {level} below its commitment {floor}"
                )
            mu_levels.append(level)

        flows = [
            region_flows(regions[i], mu_levels[i] / 10.0, climate.t_at, constants)
            for i in range(n)
        ]
        nets = np.array([f.net_output for f in flows])
        trade = settle_trade(build_trade_flows(nets, config.openness), tariffs)

        resources = (
            nets * (1.0 - config.openness) + trade.export_income + trade.tariff_revenue
        )
        consumption = (1.0 - constants.savings_rate) * resources
        investment = constants.savings_rate * resources

        step_emissions = constants.dt_years * sum(f.emissions for f in flows)
        climate = step_temperature(
            step_carbon_cycle(climate, step_emissions, constants), constants
        )

        records.append(
            StepRecord(
                step=step,
                commit_levels=tuple(c.level for c in commitments),
                defected=tuple(c.defected for c in commitments),
                mu_levels=tuple(mu_levels),
                gross_output=tuple(f.gross_output for f in flows),
                emissions=tuple(f.emissions for f in flows),
                abatement_cost=tuple(f.abatement_cost for f in flows),
                consumption=tuple(consumption),
                tariff_revenue=tuple(trade.tariff_revenue),
                export_income=tuple(trade.export_income),
                investment=tuple(investment),
                damage_loss=tuple(
                    f.damage_frac * (1.0 - f.abatement_frac) * f.gross_output
                    for f in flows
                ),
                climate=climate,
                tariffs=tariffs,
            )
        )
        total_gross += sum(f.gross_output for f in flows)

        regions = tuple(
            advance_exogenous(regions[i], float(investment[i]), constants)
            for i in range(n)
        )
        last_flows = flows
        last_round = outcome
        last_commits = np.array([c.level for c in commitments], dtype=np.int64)
        last_defected = np.array([c.defected for c in commitments], dtype=bool)
        last_mu = np.array(mu_levels, dtype=np.int64)

    return EpisodeTrace(
        fingerprint=fingerprint(config),
        master_seed=config.master_seed,
        run_index=run_index,
        regions_initial=regions_initial,
        steps=tuple(records),
        final_t_at=climate.t_at,
        total_gross_output=total_gross,
    )


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    return max(1, int(os.environ.get("CLUBSIM_WORKERS", "1")))


def _run_indexed(payload):
    config, index = payload
    return run_episode(config, index)


def run_ensemble(
    config: SimConfig, n_runs: int, workers: int | None = None
) -> list[EpisodeTrace]:
    """Run n_runs independent episodes with per-run spawned seeds.

    Results are ordered by run index regardless of worker count. If any
    episode aborts, the rest still run and an EnsembleError reporting every
    failure is raised at the end.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    count = _worker_count(workers)
    results: list = [None] * n_runs
    failures = []
    if count == 1 or n_runs == 1:
        for index in range(n_runs):
            try:
                results[index] = run_episode(config, index)
            except EpisodeError as exc:
                failures.append((index, str(exc)))
    else:
        with ProcessPoolExecutor(max_workers=count) as pool:
            payloads = [(config, index) for index in range(n_runs)]
            futures = [pool.submit(_run_indexed, p) for p in payloads]
            for index, future in enumerate(futures):
                try:
                    results[index] = future.result()
                except EpisodeError as exc:
                    failures.append((index, str(exc)))
    if failures:
        raise EnsembleError(failures)
    return results


def mean_region_rewards(config: SimConfig, n_runs: int) -> np.ndarray:
    """Mean per-region log-utility reward across runs and steps."""
    traces = run_ensemble(config, n_runs, workers=1)
    totals = np.zeros(config.n_regions)
    count = 0
    for trace in traces:
        labor = np.array([r.labor for r in trace.regions_initial])
        for record in trace.steps:
            totals += np.array(
                [reward(c, labor[i]) for i, c in enumerate(record.consumption)]
            )
            count += 1
    return totals / count


def _fmt(x: float) -> str:
    return f"{x:.17g}"


TRACE_HEADER = (
    "step,region,commit_level,defected,mu,gross_output,emissions,"
    "abatement_cost,consumption,tariff_revenue,t_at"
)
CLIMATE_HEADER = "step,m_at,m_up,m_lo,t_at,t_lo"


def trace_csv(trace: EpisodeTrace) -> str:
    """Per-step per-region trace with 17-significant-digit numbers."""
    lines = [TRACE_HEADER]
    for rec in trace.steps:
        for i in range(len(rec.mu_levels)):
            lines.append(
                ",".join(
                    [
                        str(rec.step),
                        str(i),
                        str(rec.commit_levels[i]),
                        str(int(rec.defected[i])),
                        _fmt(rec.mu_levels[i] / 10.0),
                        _fmt(rec.gross_output[i]),
                        _fmt(rec.emissions[i]),
                        _fmt(rec.abatement_cost[i]),
                        _fmt(rec.consumption[i]),
                        _fmt(rec.tariff_revenue[i]),
                        _fmt(rec.climate.t_at),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def climate_csv(trace: EpisodeTrace) -> str:
    lines = [CLIMATE_HEADER]
    for rec in trace.steps:
        c = rec.climate
        lines.append(
            ",".join(
                [
                    str(rec.step),
                    _fmt(c.m_at),
                    _fmt(c.m_up),
                    _fmt(c.m_lo),
                    _fmt(c.t_at),
                    _fmt(c.t_lo),
                ]
            )
        )
    return "\n".join(lines) + "\n"
