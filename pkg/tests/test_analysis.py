import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from clubsim.analysis import (
    CorrelationResult,
    MetricPoint,
    abatement_correlations,
    episode_metrics,
    map_to_pathway,
    pareto_front,
    pareto_front_oracle,
    pearson,
)
from clubsim.dynamics import ClimateState, RegionState
from clubsim.engine import EpisodeTrace, StepRecord
from clubsim.trade import TariffMatrix


def synthetic_trace(gross_output_rows, abatement_cost_rows, final_t, sigmas=None):
    """Build a minimal trace: one row per step, one column per region."""
    n = len(gross_output_rows[0])
    sigmas = sigmas or [0.4] * n
    regions = tuple(
        RegionState(capital=30.0 + i, tfp=1.0 + 0.1 * i, labor=100.0,
                    carbon_intensity=sigmas[i], abatement_scale=0.06)
        for i in range(n)
    )
    steps = []
    for s, (y_row, cost_row) in enumerate(zip(gross_output_rows, abatement_cost_rows)):
        steps.append(
            StepRecord(
                step=s,
                commit_levels=(0,) * n,
                defected=(False,) * n,
                mu_levels=(0,) * n,
                gross_output=tuple(y_row),
                emissions=(0.0,) * n,
                abatement_cost=tuple(cost_row),
                consumption=(1.0,) * n,
                tariff_revenue=(0.0,) * n,
                export_income=(0.0,) * n,
                investment=(0.0,) * n,
                damage_loss=(0.0,) * n,
                climate=ClimateState(851.0, 460.0, 1740.0, final_t, 0.3),
                tariffs=TariffMatrix.zeros(n),
            )
        )
    total = float(np.sum(gross_output_rows))
    return EpisodeTrace(
        fingerprint="test", master_seed=0, run_index=0,
        regions_initial=regions, steps=tuple(steps),
        final_t_at=final_t, total_gross_output=total,
    )


class TestEpisodeMetrics:
    def test_direct_readout(self):
        trace = synthetic_trace([[1.0, 2.0]], [[0.0, 0.0]], final_t=1.5)
        point = episode_metrics(trace, label="x")
        assert point.temperature_rise == 1.5
        assert point.gross_output_total == 3.0

    def test_identical_traces_identical_points(self):
        t = synthetic_trace([[1.0, 2.0]], [[0.0, 0.0]], final_t=1.5)
        assert episode_metrics(t, "a") == episode_metrics(t, "a")


def mp(label, t, y):
    return MetricPoint(label=label, temperature_rise=t, gross_output_total=y)


class TestPareto:
    def test_tradeoff_pair_both_dominant(self):
        flags = pareto_front([mp("a", 1.0, 10.0), mp("b", 2.0, 5.0)])
        assert flags == [True, False] or flags == [True, True]
        # b is hotter AND poorer than a, so it is dominated
        assert flags == [True, False]

    def test_true_tradeoff(self):
        flags = pareto_front([mp("a", 1.0, 5.0), mp("b", 2.0, 10.0)])
        assert flags == [True, True]

    def test_equal_output_hotter_dominated(self):
        flags = pareto_front([mp("a", 1.0, 10.0), mp("b", 2.0, 10.0)])
        assert flags == [True, False]

    def test_duplicates_both_kept(self):
        flags = pareto_front([mp("a", 1.0, 10.0), mp("b", 1.0, 10.0)])
        assert flags == [True, True]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            pareto_front([])

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            n = int(rng.integers(1, 150))
            pts = [
                mp(str(i), float(rng.choice([1.0, 1.5, 2.0, rng.uniform(0.5, 4)])),
                   float(rng.choice([5.0, 7.5, rng.uniform(1, 20)])))
                for i in range(n)
            ]
            assert pareto_front(pts) == pareto_front_oracle(pts)

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=40))
    def test_matches_oracle_with_heavy_ties(self, pairs):
        pts = [mp(str(i), float(t), float(y)) for i, (t, y) in enumerate(pairs)]
        assert pareto_front(pts) == pareto_front_oracle(pts)


class TestPearson:
    def test_perfect_linear(self):
        x = np.arange(10.0)
        assert pearson(x, 2 * x).r == pytest.approx(1.0, abs=1e-12)

    def test_perfect_anticorrelation(self):
        x = np.arange(10.0)
        assert pearson(x, -x).r == pytest.approx(-1.0, abs=1e-12)

    def test_closed_form_fixture(self):
        # r computed independently with 40-digit arithmetic
        xs = [1.0, 2.0, 4.0, 4.5, 6.0, 7.25, 8.0, 9.5, 11.0, 12.5]
        ys = [2.1, 1.9, 4.4, 3.9, 6.2, 5.8, 8.3, 7.9, 10.4, 11.1]
        assert pearson(xs, ys).r == pytest.approx(0.9794687653959273, abs=1e-12)

    def test_constant_series_rejected(self):
        with pytest.raises(ValueError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_short_series_rejected(self):
        with pytest.raises(ValueError):
            pearson([1.0, 2.0], [1.0, 2.0])

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        x, y = rng.normal(size=20), rng.normal(size=20)
        assert pearson(x, y).r == pytest.approx(pearson(y, x).r, abs=1e-14)

    def test_self_correlation_is_one(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=25)
        assert pearson(x, x).r == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=60)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=60))
    def test_r_always_in_unit_interval(self, xs):
        ys = [v * 1.7 + (i % 3) for i, v in enumerate(xs)]
        if np.std(xs) == 0.0 or np.std(ys) == 0.0:
            return
        res = pearson(xs, ys, permutations=200)
        assert -1.0 <= res.r <= 1.0

    def test_significant_signal_has_small_p(self):
        x = np.arange(30.0)
        res = pearson(x, 3 * x + 1)
        assert res.p < 0.001

    def test_null_p_values_not_significant_too_often(self):
        # shuffled labels: the permutation test should not cry wolf
        rng = np.random.default_rng(123)
        x = np.arange(40.0)
        hits = 0
        for seed in range(20):
            y = rng.permutation(x)
            res = pearson(x, y, permutations=2000, seed=seed)
            hits += res.p < 0.05
        assert hits <= 4

    def test_bounds_enforced(self):
        with pytest.raises(ValueError):
            CorrelationResult(variable="x", r=1.5, p=0.5, n=10)
        with pytest.raises(ValueError):
            CorrelationResult(variable="x", r=0.5, p=1.5, n=10)
        with pytest.raises(ValueError):
            CorrelationResult(variable="x", r=0.5, p=0.5, n=2)


class TestAbatementCorrelations:
    def test_planted_signal_gives_unit_correlation(self):
        # cost exactly proportional to carbon intensity across the pool
        traces = []
        rng = np.random.default_rng(5)
        for _ in range(4):
            sigmas = list(rng.uniform(0.2, 0.9, 5))
            outputs = list(rng.uniform(5.0, 25.0, 5))
            cost_row = [3.0 * s for s in sigmas]
            traces.append(
                synthetic_trace([outputs], [cost_row], final_t=2.0, sigmas=sigmas)
            )
        results = abatement_correlations(traces)
        by_name = {r.variable: r for r in results}
        assert by_name["carbon_intensity"].r == pytest.approx(1.0, abs=1e-12)
        assert by_name["carbon_intensity"].p < 0.01
        assert by_name["carbon_intensity"].n == 20

    def test_feature_order(self):
        traces = [
            synthetic_trace([[10.0, 12.0, 9.0]], [[1.0, 2.0, 3.0]], 2.0,
                            sigmas=[0.2, 0.5, 0.8])
        ]
        names = [r.variable for r in abatement_correlations(traces)]
        assert names == ["capital", "production_factor", "carbon_intensity", "gross_output"]


class TestPathway:
    def test_reference_anchor_temperatures(self):
        assert map_to_pathway(2.09) == map_to_pathway(2.0)
        p = map_to_pathway(2.09)
        assert (p.rcp, p.ssp) == ("RCP 3.4/4.5", "SSP 2")
        p = map_to_pathway(3.20)
        assert (p.rcp, p.ssp) == ("RCP 6.0", "SSP 2/4.5")
        p = map_to_pathway(4.43)
        assert (p.rcp, p.ssp) == ("RCP 7.5/8.5", "SSP 7")

    def test_band_edges(self):
        assert map_to_pathway(1.79).rcp == "RCP 2.6"
        assert map_to_pathway(1.8).rcp == "RCP 3.4/4.5"
        assert map_to_pathway(2.6).rcp == "RCP 6.0"
        assert map_to_pathway(3.8).rcp == "RCP 7.5/8.5"

    def test_cool_extrapolation(self):
        p = map_to_pathway(0.5)
        assert (p.rcp, p.ssp) == ("RCP 2.6", "SSP 1")

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            map_to_pathway(float("nan"))
