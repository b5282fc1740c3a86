"""The club negotiation round: propose, vote, commit, form clubs, bound tariffs.

Runs once per five-year step. Stage order: every region proposes one
mitigation level, votes on all proposals, commits to the highest level it
accepted (zero if none), clubs form as the sets of regions sharing a
committed level, then - when the discrete-defect element is active - each
committed region may defect, and finally importers choose tariffs within
the bounds the protocol derives.

Four optional design elements modify the base rules:

* dd - adds the defect action; a defector is freed from its pledge.
* ft - free trade: no tariffs on exporters at or above the importer's level.
* mp - max punishment: one defection earns a permanent (10, 10) bound.
* hd - hard defect: defecting forces zero mitigation for the step.

Bound precedence, importer i against exporter j (levels are commitments):

1. mp active and j ever defected           -> (10, 10)
2. j defected this round and i is in j's club -> (10, 10)
3. ft active and level_j >= level_i        -> (0, 0)
4. level_j < level_i                       -> (10 - level_j, 10)
5. otherwise                               -> (0, 10 - level_j)

Rule 2 is the only way a plain-dd defection has consequences: the betrayed
club retaliates within the round (defection is declared before tariffs are
chosen), while outsiders still price the defector by its pledge. Clubless
importers (level 0) fall under rule 5 for every exporter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .trade import (
    LEVEL_MAX,
    TariffMatrix,
    check_level,
    clamp_tariff,
    tariff_ceiling_level,
    tariff_floor_level,
)


class ProtocolError(RuntimeError):
    """A protocol-logic inconsistency that aborts the episode."""


@dataclass(frozen=True)
class ProtocolConfig:
    """Which design elements are active on top of the base club protocol."""

    discrete_defect: bool = False
    free_trade: bool = False
    max_punishment: bool = False
    hard_defect: bool = False

    def __post_init__(self):
        if (self.max_punishment or self.hard_defect) and not self.discrete_defect:
            raise ValueError("mp and hd modify defection and require dd")

    def label(self) -> str:
        parts = ["bc"]
        if self.discrete_defect:
            parts.append("dd")
        if self.free_trade:
            parts.append("ft")
        if self.hard_defect:
            parts.append("hd")
        if self.max_punishment:
            parts.append("mp")
        return "+".join(parts)

    @classmethod
    def from_elements(cls, elements) -> "ProtocolConfig":
        known = {"dd", "ft", "mp", "hd"}
        names = set(elements)
        unknown = names - known
        if unknown:
            raise ValueError(f"unknown protocol elements: {sorted(unknown)}")
        return cls(
            discrete_defect="dd" in names,
            free_trade="ft" in names,
            max_punishment="mp" in names,
            hard_defect="hd" in names,
        )


@dataclass(frozen=True)
class Proposal:
    proposer: int
    level: int


@dataclass(frozen=True)
class BallotSheet:
    """accept[voter, proposal_index] - one row per region."""

    accept: np.ndarray


@dataclass(frozen=True)
class Commitment:
    region: int
    level: int
    defected: bool = False


@dataclass(frozen=True)
class Club:
    level: int
    members: tuple[int, ...]


@dataclass
class PunishmentRegistry:
    """Regions that ever defected, with the step of first defection. Only grows."""

    first_defection: dict[int, int] = field(default_factory=dict)

    def punished(self, region: int) -> bool:
        return region in self.first_defection

    def record(self, defectors, step: int) -> "PunishmentRegistry":
        for region in defectors:
            self.first_defection.setdefault(region, step)
        return self

    def copy(self) -> "PunishmentRegistry":
        return PunishmentRegistry(dict(self.first_defection))


@dataclass(frozen=True)
class RoundOutcome:
    """Everything one negotiation round decided."""

    proposals: tuple[Proposal, ...]
    ballots: BallotSheet
    commitments: tuple[Commitment, ...]
    clubs: tuple[Club, ...]
    defectors: tuple[int, ...]
    bounds_low: np.ndarray    # per (importer, exporter)
    bounds_high: np.ndarray
    tariffs: TariffMatrix

    def commit_levels(self) -> np.ndarray:
        return np.array([c.level for c in self.commitments], dtype=np.int64)


def resolve_commitments(
    proposals: list[Proposal], ballots: BallotSheet
) -> list[Commitment]:
    """Each region commits to the highest proposal level it accepted, else 0.

    Proposing does not bind: only acceptance does, including of one's own
    proposal.
    """
    accept = np.asarray(ballots.accept, dtype=bool)
    n_regions, n_proposals = accept.shape
    if n_proposals != len(proposals):
        raise ProtocolError("ballot sheet does not match the proposal list")
    levels = np.array([p.level for p in proposals], dtype=np.int64)
    commitments = []
    for region in range(n_regions):
        accepted = levels[accept[region]]
        level = int(accepted.max()) if accepted.size else 0
        commitments.append(Commitment(region=region, level=level))
    return commitments


def form_clubs(commitments: list[Commitment]) -> list[Club]:
    """One club per distinct positive committed level; level-0 regions are clubless."""
    by_level: dict[int, list[int]] = {}
    for c in commitments:
        if c.level > 0:
            by_level.setdefault(c.level, []).append(c.region)
    return [Club(level=lv, members=tuple(sorted(by_level[lv]))) for lv in sorted(by_level)]


def tariff_bounds_for(
    importer: Commitment,
    exporter: Commitment,
    config: ProtocolConfig,
    registry: PunishmentRegistry,
    same_club: bool = False,
) -> tuple[int, int]:
    """(min, max) tariff level importer may set against exporter.

    same_club marks that the two regions committed to the same positive
    level this round, which is what lets rule 2 (club retaliation against a
    fresh defector) fire.
    """
    if config.max_punishment and registry.punished(exporter.region):
        return LEVEL_MAX, LEVEL_MAX
    if exporter.defected and same_club:
        return LEVEL_MAX, LEVEL_MAX
    if config.free_trade and exporter.level >= importer.level:
        return 0, 0
    if exporter.level < importer.level:
        return tariff_floor_level(exporter.level), LEVEL_MAX
    return 0, tariff_ceiling_level(exporter.level)


def apply_defection(
    commit_level: int, defected: bool, config: ProtocolConfig
) -> tuple[int, bool]:
    """Mitigation floor for the economic step, and whether zero is forced.

    Without defection the region must mitigate at least its commitment.
    A dd defection removes the floor; under hd the executed level is
    forced to exactly zero instead.
    """
    check_level(commit_level, "commitment level")
    if defected and not config.discrete_defect:
        raise ProtocolError("defect action emitted while dd is disabled")
    if not defected:
        return commit_level, False
    if config.hard_defect:
        return 0, True
    return 0, False


def update_punishments(
    registry: PunishmentRegistry, defectors, step: int, config: ProtocolConfig
) -> PunishmentRegistry:
    """Record defectors permanently when max punishment is active."""
    if config.max_punishment:
        registry.record(defectors, step)
    return registry


def run_negotiation_round(
    agents, observations, preview, config: ProtocolConfig,
    registry: PunishmentRegistry, step: int,
) -> RoundOutcome:
    """Run one full round and return an internally consistent outcome.

    ``agents`` supply the five decisions in stage order; ``preview`` is the
    one-step forward simulator handed to policies that plan with lookahead.
    Deterministic given the agents' policies and the world snapshot.
    """
    n = len(agents)
    for agent, obs in zip(agents, observations):
        agent.begin_round(obs, preview)

    proposals = []
    for region, (agent, obs) in enumerate(zip(agents, observations)):
        level = check_level(agent.propose(obs), f"proposal by region {region}")
        proposals.append(Proposal(proposer=region, level=level))

    accept = np.zeros((n, len(proposals)), dtype=bool)
    for region, (agent, obs) in enumerate(zip(agents, observations)):
        row = np.asarray(agent.vote(obs, tuple(proposals)), dtype=bool)
        if row.shape != (len(proposals),):
            raise ProtocolError(f"region {region} returned a malformed ballot")
        accept[region] = row
    ballots = BallotSheet(accept=accept)

    commitments = resolve_commitments(proposals, ballots)
    clubs = form_clubs(commitments)

    defectors: list[int] = []
    if config.discrete_defect:
        for region, (agent, obs) in enumerate(zip(agents, observations)):
            if agent.decide_defect(obs, commitments[region]):
                commitments[region] = Commitment(
                    region=region, level=commitments[region].level, defected=True
                )
                defectors.append(region)
        update_punishments(registry, defectors, step, config)

    club_of = {c.region: c.level if c.level > 0 else None for c in commitments}
    low = np.zeros((n, n), dtype=np.int64)
    high = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            same_club = club_of[i] is not None and club_of[i] == club_of[j]
            lo, hi = tariff_bounds_for(
                commitments[i], commitments[j], config, registry, same_club
            )
            if lo > hi:
                raise ProtocolError(f"inverted bounds ({lo}, {hi}) for pair ({i}, {j})")
            low[i, j], high[i, j] = lo, hi

    levels = np.zeros((n, n), dtype=np.int64)
    for i, (agent, obs) in enumerate(zip(agents, observations)):
        row = agent.choose_tariffs(obs, low[i], high[i])
        for j in range(n):
            if i == j:
                continue
            levels[i, j] = clamp_tariff(int(row[j]), int(low[i, j]), int(high[i, j]))

    return RoundOutcome(
        proposals=tuple(proposals),
        ballots=ballots,
        commitments=tuple(commitments),
        clubs=tuple(clubs),
        defectors=tuple(defectors),
        bounds_low=low,
        bounds_high=high,
        tariffs=TariffMatrix(levels),
    )
