import numpy as np

from clubsim.analysis import MetricPoint, pareto_front
from clubsim.charts import emit_charts, emit_correlation_charts
from clubsim.dynamics import ModelConstants
from clubsim.engine import SimConfig, run_ensemble
from clubsim.protocol import ProtocolConfig


def small_traces(protocol, runs=2):
    cfg = SimConfig(
        constants=ModelConstants(horizon_steps=3),
        n_regions=3,
        protocol=protocol,
        master_seed=5,
    )
    return run_ensemble(cfg, runs)


def test_emit_charts_files_and_byte_identity(tmp_path):
    traces = {"bc": small_traces(ProtocolConfig()), "none": small_traces(None)}
    metrics = [
        MetricPoint(label="bc", temperature_rise=1.5, gross_output_total=100.0),
        MetricPoint(label="none", temperature_rise=2.5, gross_output_total=110.0),
        MetricPoint(label="bad", temperature_rise=2.6, gross_output_total=90.0),
    ]
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    files_a = emit_charts(traces, metrics, out_a)
    files_b = emit_charts(traces, metrics, out_b)
    names = sorted(p.name for p in files_a)
    assert names == [
        "abatement_cost.csv", "abatement_cost.svg",
        "mitigation_rate.csv", "mitigation_rate.svg",
        "pareto_points.csv", "pareto_scatter.svg",
        "temperature_trajectories.csv", "temperature_trajectories.svg",
    ]
    for pa, pb in zip(sorted(files_a), sorted(files_b)):
        assert pa.read_bytes() == pb.read_bytes()


def test_pareto_csv_marks_match_oracle(tmp_path):
    rng = np.random.default_rng(3)
    metrics = [
        MetricPoint(label=f"v{i}", temperature_rise=float(rng.uniform(1, 4)),
                    gross_output_total=float(rng.uniform(50, 150)))
        for i in range(8)
    ]
    emit_charts({}, metrics, tmp_path)
    lines = (tmp_path / "pareto_points.csv").read_text().strip().split("\n")[1:]
    flags_csv = [bool(int(line.split(",")[-1])) for line in lines]
    assert flags_csv == pareto_front(metrics)


def test_single_trace_single_line_per_chart(tmp_path):
    traces = {"bc": small_traces(ProtocolConfig(), runs=1)}
    emit_charts(traces, [], tmp_path)
    lines = (tmp_path / "temperature_trajectories.csv").read_text().strip().split("\n")
    labels = {line.split(",")[0] for line in lines[1:]}
    assert labels == {"bc"}
    assert len(lines) == 1 + 3  # header + one row per step


def test_correlation_charts(tmp_path):
    from clubsim.analysis import pearson

    rng = np.random.default_rng(0)
    x = rng.uniform(1, 2, 30)
    cost = 3 * x + rng.normal(0, 0.1, 30)
    features = {"carbon_intensity": x}
    results = [pearson(x, cost, name="carbon_intensity")]
    files = emit_correlation_charts(features, cost, results, tmp_path)
    assert [p.name for p in files] == ["correlation_carbon_intensity.svg"]
    again = emit_correlation_charts(features, cost, results, tmp_path / "again")
    assert files[0].read_bytes() == again[0].read_bytes()
