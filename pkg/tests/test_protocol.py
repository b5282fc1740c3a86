import numpy as np
import pytest

from clubsim.agents import FixedPolicy, Observation, RandomPolicy
from clubsim.dynamics import ModelConstants, RegionState
from clubsim.engine import StepPreview
from clubsim.protocol import (
    BallotSheet,
    Club,
    Commitment,
    Proposal,
    ProtocolConfig,
    ProtocolError,
    PunishmentRegistry,
    apply_defection,
    form_clubs,
    resolve_commitments,
    run_negotiation_round,
    tariff_bounds_for,
    update_punishments,
)

BC = ProtocolConfig()
DD = ProtocolConfig(discrete_defect=True)


def commit(region, level, defected=False):
    return Commitment(region=region, level=level, defected=defected)


class TestProtocolConfig:
    def test_modifiers_require_dd(self):
        with pytest.raises(ValueError):
            ProtocolConfig(hard_defect=True)
        with pytest.raises(ValueError):
            ProtocolConfig(max_punishment=True)

    def test_labels(self):
        assert ProtocolConfig().label() == "bc"
        assert DD.label() == "bc+dd"
        assert ProtocolConfig(
            discrete_defect=True, max_punishment=True, free_trade=True
        ).label() == "bc+dd+ft+mp"

    def test_from_elements(self):
        assert ProtocolConfig.from_elements(["dd", "ft"]) == ProtocolConfig(
            discrete_defect=True, free_trade=True
        )
        with pytest.raises(ValueError):
            ProtocolConfig.from_elements(["xx"])
        with pytest.raises(ValueError):
            ProtocolConfig.from_elements(["hd"])


class TestResolveCommitments:
    def test_highest_accepted_wins(self):
        proposals = [Proposal(0, 3), Proposal(1, 7), Proposal(2, 9)]
        accept = np.array([[True, True, False]])
        (c,) = resolve_commitments(proposals, BallotSheet(accept))
        assert c.level == 7

    def test_empty_acceptance_defaults_to_zero(self):
        proposals = [Proposal(0, 5)]
        accept = np.array([[False]])
        (c,) = resolve_commitments(proposals, BallotSheet(accept))
        assert c.level == 0

    def test_proposing_does_not_bind(self):
        # region 0 proposed 5 without accepting it, but accepted the 9
        proposals = [Proposal(0, 5), Proposal(1, 9)]
        accept = np.array([[False, True], [False, False]])
        c0, c1 = resolve_commitments(proposals, BallotSheet(accept))
        assert c0.level == 9
        assert c1.level == 0

    def test_malformed_ballots(self):
        with pytest.raises(ProtocolError):
            resolve_commitments([Proposal(0, 5)], BallotSheet(np.ones((1, 2), dtype=bool)))


class TestFormClubs:
    def test_partition_by_level(self):
        clubs = form_clubs([commit(0, 7), commit(1, 7), commit(2, 9), commit(3, 0)])
        assert clubs == [Club(level=7, members=(0, 1)), Club(level=9, members=(2,))]

    def test_single_club(self):
        clubs = form_clubs([commit(i, 5) for i in range(4)])
        assert clubs == [Club(level=5, members=(0, 1, 2, 3))]

    def test_no_commitments_no_clubs(self):
        assert form_clubs([commit(i, 0) for i in range(3)]) == []


class TestTariffBounds:
    def test_floor_worked_example(self):
        # importer club 9 versus exporter committed 7
        reg = PunishmentRegistry()
        assert tariff_bounds_for(commit(0, 9), commit(1, 7), BC, reg) == (3, 10)

    def test_ceiling_worked_example(self):
        # importer club 6 versus exporter committed 8
        reg = PunishmentRegistry()
        assert tariff_bounds_for(commit(0, 6), commit(1, 8), BC, reg) == (0, 2)

    def test_free_trade_zeroes_compliant_exporters(self):
        ft = ProtocolConfig(free_trade=True)
        reg = PunishmentRegistry()
        assert tariff_bounds_for(commit(0, 6), commit(1, 8), ft, reg) == (0, 0)
        assert tariff_bounds_for(commit(0, 6), commit(1, 6), ft, reg) == (0, 0)
        # below the club the floor still applies
        assert tariff_bounds_for(commit(0, 6), commit(1, 3), ft, reg) == (7, 10)

    def test_max_punishment_overrides_everything(self):
        mp = ProtocolConfig(discrete_defect=True, max_punishment=True, free_trade=True)
        reg = PunishmentRegistry().record([1], step=0)
        assert tariff_bounds_for(commit(0, 6), commit(1, 8), mp, reg) == (10, 10)
        assert tariff_bounds_for(commit(0, 0), commit(1, 10), mp, reg) == (10, 10)

    def test_clubless_importer_uses_ceiling_rule(self):
        reg = PunishmentRegistry()
        assert tariff_bounds_for(commit(0, 0), commit(1, 8), BC, reg) == (0, 2)
        assert tariff_bounds_for(commit(0, 0), commit(1, 0), BC, reg) == (0, 10)

    def test_club_retaliates_against_fresh_defector(self):
        reg = PunishmentRegistry()
        bounds = tariff_bounds_for(
            commit(0, 9), commit(1, 9, defected=True), DD, reg, same_club=True
        )
        assert bounds == (10, 10)
        # outsiders still price the defector by its pledge
        bounds = tariff_bounds_for(
            commit(0, 7), commit(1, 9, defected=True), DD, reg, same_club=False
        )
        assert bounds == (0, 1)

    def test_min_never_exceeds_max_over_full_grid(self):
        reg = PunishmentRegistry()
        for cfg in (BC, DD, ProtocolConfig(free_trade=True)):
            for li in range(11):
                for lj in range(11):
                    lo, hi = tariff_bounds_for(commit(0, li), commit(1, lj), cfg, reg)
                    assert lo <= hi


class TestApplyDefection:
    def test_honest_commitment_is_the_floor(self):
        assert apply_defection(7, False, BC) == (7, False)

    def test_dd_defection_lifts_the_floor(self):
        assert apply_defection(7, True, DD) == (0, False)

    def test_hd_defection_forces_zero(self):
        hd = ProtocolConfig(discrete_defect=True, hard_defect=True)
        assert apply_defection(7, True, hd) == (0, True)

    def test_defect_without_dd_rejected(self):
        with pytest.raises(ProtocolError):
            apply_defection(7, True, BC)


class TestPunishments:
    def test_first_defection_recorded(self):
        mp = ProtocolConfig(discrete_defect=True, max_punishment=True)
        reg = PunishmentRegistry()
        update_punishments(reg, [1], 4, mp)
        assert reg.punished(1) and reg.first_defection[1] == 4

    def test_permanent_and_union(self):
        mp = ProtocolConfig(discrete_defect=True, max_punishment=True)
        reg = PunishmentRegistry()
        update_punishments(reg, [1], 0, mp)
        update_punishments(reg, [], 1, mp)
        update_punishments(reg, [1, 2], 2, mp)
        assert reg.first_defection == {1: 0, 2: 2}

    def test_inactive_without_mp(self):
        reg = PunishmentRegistry()
        update_punishments(reg, [1], 0, DD)
        assert not reg.punished(1)


def make_observations(regions, step=0):
    return [
        Observation(
            region=i, state=r, flows=None, t_at=1.1,
            last_round=None, punished=False, step=step,
        )
        for i, r in enumerate(regions)
    ]


def make_preview(regions, protocol, registry):
    n = len(regions)
    return StepPreview(
        regions, 1.1, ModelConstants(), 0.15, protocol, registry,
        np.zeros(n, dtype=np.int64), np.zeros(n, dtype=bool), np.zeros(n, dtype=np.int64),
    )


def fixture_regions(n):
    return tuple(
        RegionState(capital=30.0, tfp=1.2, labor=500.0, carbon_intensity=0.4,
                    abatement_scale=0.06)
        for _ in range(n)
    )


class TestRound:
    def test_scripted_four_agent_scenario(self):
        # two fixed-9 agents, one fixed-7, one fixed-0
        regions = fixture_regions(4)
        agents = [FixedPolicy(9), FixedPolicy(9), FixedPolicy(7), FixedPolicy(0)]
        reg = PunishmentRegistry()
        outcome = run_negotiation_round(
            agents, make_observations(regions), make_preview(regions, BC, reg), BC, reg, 0
        )
        assert [c.level for c in outcome.commitments] == [9, 9, 7, 0]
        assert outcome.clubs == (
            Club(level=7, members=(2,)),
            Club(level=9, members=(0, 1)),
        )
        # bounds follow the precedence table
        assert (outcome.bounds_low[0, 2], outcome.bounds_high[0, 2]) == (3, 10)
        assert (outcome.bounds_low[2, 0], outcome.bounds_high[2, 0]) == (0, 1)
        assert (outcome.bounds_low[0, 3], outcome.bounds_high[0, 3]) == (10, 10)
        assert (outcome.bounds_low[3, 0], outcome.bounds_high[3, 0]) == (0, 1)
        # fixed agents tariff at the lower bound
        assert outcome.tariffs.levels[0, 2] == 3
        assert outcome.tariffs.levels[2, 0] == 0

    def test_null_round(self):
        regions = fixture_regions(3)
        agents = [FixedPolicy(0)] * 3
        reg = PunishmentRegistry()
        outcome = run_negotiation_round(
            agents, make_observations(regions), make_preview(regions, BC, reg), BC, reg, 0
        )
        assert all(c.level == 0 for c in outcome.commitments)
        assert outcome.clubs == ()
        off_diag = ~np.eye(3, dtype=bool)
        assert (outcome.bounds_low[off_diag] == 0).all()
        assert (outcome.bounds_high[off_diag] == 10).all()

    def test_deterministic_with_seeded_random_agents(self):
        regions = fixture_regions(5)

        def run_once():
            agents = [RandomPolicy(np.random.default_rng(100 + i)) for i in range(5)]
            reg = PunishmentRegistry()
            return run_negotiation_round(
                agents, make_observations(regions), make_preview(regions, DD, reg),
                DD, reg, 0,
            )

        a, b = run_once(), run_once()
        assert a.commitments == b.commitments
        assert np.array_equal(a.tariffs.levels, b.tariffs.levels)
        assert a.defectors == b.defectors

    def test_round_consistency_under_random_agents(self):
        regions = fixture_regions(6)
        rng = np.random.default_rng(0)
        for trial in range(25):
            agents = [RandomPolicy(np.random.default_rng(rng.integers(1 << 30))) for _ in range(6)]
            reg = PunishmentRegistry()
            outcome = run_negotiation_round(
                agents, make_observations(regions), make_preview(regions, DD, reg),
                DD, reg, 0,
            )
            levels = np.array([p.level for p in outcome.proposals])
            accept = outcome.ballots.accept
            for i, c in enumerate(outcome.commitments):
                expected = levels[accept[i]].max() if accept[i].any() else 0
                assert c.level == expected
            for club in outcome.clubs:
                for member in club.members:
                    assert outcome.commitments[member].level == club.level
            off = ~np.eye(6, dtype=bool)
            assert (outcome.bounds_low[off] <= outcome.bounds_high[off]).all()
            assert (outcome.tariffs.levels[off] >= outcome.bounds_low[off]).all()
            assert (outcome.tariffs.levels[off] <= outcome.bounds_high[off]).all()
            assert set(outcome.defectors) == {
                c.region for c in outcome.commitments if c.defected
            }
