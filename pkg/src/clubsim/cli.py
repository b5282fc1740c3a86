"""Command-line entry point: run, compare, pareto, and correlate experiments.

Configuration is a flat dotted-key text file (``model.gamma = 0.3``,
``protocol.elements = dd,ft``) resolved over documented defaults; unknown
keys are hard errors. Every output directory receives a manifest.json that
pins the resolved configuration, the config file hash, and the seed
schedule, which is enough to reproduce all outputs byte-identically.

Exit codes: 0 success, 1 configuration error, 2 simulation abort,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .agents import PolicySpec
from .analysis import (
    ABATEMENT_FEATURES,
    MetricPoint,
    abatement_correlations,
    episode_metrics,
    map_to_pathway,
    pareto_front,
)
from .charts import emit_charts, emit_correlation_charts
from .dynamics import ModelConstants
from .engine import (
    EnsembleError,
    EpisodeError,
    SimConfig,
    climate_csv,
    run_ensemble,
    run_episode,
    trace_csv,
)
from .protocol import ProtocolConfig


class ConfigError(Exception):
    """Bad configuration file, key, value, or variant name."""


def _fmt(x: float) -> str:
    return f"{x:.17g}"


# --------------------------------------------------------------------------
# Flat dotted-key configuration
# --------------------------------------------------------------------------

MODEL_KEYS = {
    "model.dt_years": ("dt_years", float),
    "model.horizon_steps": ("horizon_steps", int),
    "model.gamma": ("capital_elasticity", float),
    "model.delta": ("depreciation", float),
    "model.savings_rate": ("savings_rate", float),
    "model.damage_coeff": ("damage_coeff", float),
    "model.theta2": ("abatement_exponent", float),
    "model.g_theta": ("abatement_scale_decline", float),
    "model.g_sigma": ("sigma_decline", float),
    "model.g_a": ("tfp_growth", float),
    "model.f2x": ("forcing_per_doubling", float),
    "model.ecs": ("climate_sensitivity", float),
    "model.c1": ("temp_c1", float),
    "model.c3": ("temp_c3", float),
    "model.c4": ("temp_c4", float),
    "model.m_pre": ("preindustrial_atmos_carbon", float),
    "model.b_row1": (None, "row"),
    "model.b_row2": (None, "row"),
    "model.b_row3": (None, "row"),
}

POLICY_FIELDS = {
    "kind": str,
    "level": int,
    "seed": int,
    "propose_level": int,
    "accept_threshold": int,
    "defect_propensity": float,
    "tariff_aggressiveness": float,
}

SCALAR_KEYS = {
    "regions.count": int,
    "protocol.enabled": bool,
    "protocol.elements": str,
    "sim.openness": float,
    "sim.seed": int,
}


def _parse_value(raw: str, kind, key: str, line_no: int):
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in ("true", "yes", "1"):
                return True
            if lowered in ("false", "no", "0"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if kind == "row":
            parts = [float(p) for p in raw.split(",")]
            if len(parts) != 3:
                raise ValueError("expected three comma-separated numbers")
            return tuple(parts)
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"line {line_no}: {key}: {exc}") from exc


def read_config_text(text: str) -> dict:
    """Parse dotted-key lines into a raw {key: (value, line_no)} map."""
    entries: dict[str, tuple[str, int]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not key or not raw:
            raise ConfigError(f"line {line_no}: empty key or value")
        if key in entries:
            raise ConfigError(f"line {line_no}: duplicate key {key}")
        entries[key] = (raw, line_no)
    return entries


def _policy_key_parts(key: str):
    parts = key.split(".")
    if len(parts) == 2 and parts[0] == "policy":
        return None, parts[1]
    if len(parts) == 3 and parts[0] == "policy" and parts[1].isdigit():
        return int(parts[1]), parts[2]
    return "bad", None


def build_sim_config(entries: dict) -> tuple[SimConfig, dict]:
    """Resolve raw entries over defaults into a SimConfig plus a flat echo."""
    model_kwargs: dict = {}
    b_rows: dict[int, tuple] = {}
    scalars = {"regions.count": 10, "protocol.enabled": True,
               "protocol.elements": "", "sim.openness": 0.15, "sim.seed": 0}
    default_policy: dict = {}
    overrides: dict[int, dict] = {}

    for key, (raw, line_no) in entries.items():
        if key in MODEL_KEYS:
            field, kind = MODEL_KEYS[key]
            value = _parse_value(raw, kind if kind != "row" else "row", key, line_no)
            if kind == "row":
                b_rows[int(key[-1])] = value
            else:
                model_kwargs[field] = value
        elif key in SCALAR_KEYS:
            scalars[key] = _parse_value(raw, SCALAR_KEYS[key], key, line_no)
        elif key.startswith("policy."):
            index, field = _policy_key_parts(key)
            if index == "bad" or field not in POLICY_FIELDS:
                raise ConfigError(f"line {line_no}: unknown key {key}")
            value = _parse_value(raw, POLICY_FIELDS[field], key, line_no)
            if index is None:
                default_policy[field] = value
            else:
                overrides.setdefault(index, {})[field] = value
        else:
            raise ConfigError(f"line {line_no}: unknown key {key}")

    if b_rows:
        if set(b_rows) != {1, 2, 3}:
            raise ConfigError("model.b_row1..3 must be given together")
        model_kwargs["carbon_transfer"] = (b_rows[1], b_rows[2], b_rows[3])

    if "capital_elasticity" in model_kwargs and not 0.0 < model_kwargs["capital_elasticity"] < 1.0:
        raise ConfigError("model.gamma must lie in (0, 1)")
    if "savings_rate" in model_kwargs and not 0.0 < model_kwargs["savings_rate"] < 1.0:
        raise ConfigError("model.savings_rate must lie in (0, 1)")
    try:
        constants = ModelConstants(**model_kwargs)
    except ValueError as exc:
        raise ConfigError(f"model.*: {exc}") from exc

    if scalars["protocol.enabled"]:
        elements = [e.strip() for e in scalars["protocol.elements"].split(",") if e.strip()]
        try:
            protocol = ProtocolConfig.from_elements(elements)
        except ValueError as exc:
            raise ConfigError(f"protocol.elements: {exc}") from exc
    else:
        protocol = None

    n = scalars["regions.count"]
    if n < 2:
        raise ConfigError("regions.count must be at least 2")
    try:
        base = PolicySpec(**default_policy) if default_policy else PolicySpec()
        policies = []
        for i in range(n):
            fields = overrides.get(i)
            policies.append(replace(base, **fields) if fields else base)
        bad = [i for i in overrides if not 0 <= i < n]
        if bad:
            raise ConfigError(f"policy overrides for unknown regions {sorted(bad)}")
        config = SimConfig(
            constants=constants,
            n_regions=n,
            protocol=protocol,
            policies=tuple(policies),
            openness=scalars["sim.openness"],
            master_seed=scalars["sim.seed"],
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    resolved = dict(scalars)
    for key, (field, kind) in MODEL_KEYS.items():
        if kind == "row":
            row = constants.transfer_matrix()[int(key[-1]) - 1]
            resolved[key] = ",".join(_fmt(v) for v in row)
        else:
            resolved[key] = getattr(constants, field)
    for i, spec in enumerate(config.resolved_policies()):
        for field, value in spec.to_dict().items():
            resolved[f"policy.{i}.{field}"] = value
    return config, resolved


def parse_config(path: str | None) -> tuple[SimConfig, dict, str]:
    """Load a config file (or defaults when path is None).

    Returns (config, resolved flat map, sha256 of the file bytes).
    """
    if path is None:
        return (*build_sim_config({}), hashlib.sha256(b"").hexdigest())
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    data = p.read_bytes()
    entries = read_config_text(data.decode("utf-8"))
    config, resolved = build_sim_config(entries)
    return config, resolved, hashlib.sha256(data).hexdigest()


# --------------------------------------------------------------------------
# Variant grammar
# --------------------------------------------------------------------------

def parse_variant(name: str) -> ProtocolConfig | None:
    """'none', 'bc', or 'bc+<elements>' -> protocol configuration."""
    canonical = name.strip().lower()
    if canonical == "none":
        return None
    parts = canonical.split("+")
    if parts[0] != "bc":
        raise ConfigError(f"unknown variant {name!r} (expected none, bc, bc+dd, ...)")
    try:
        return ProtocolConfig.from_elements(parts[1:])
    except ValueError as exc:
        raise ConfigError(f"variant {name!r}: {exc}") from exc


def variant_label(protocol: ProtocolConfig | None) -> str:
    return "none" if protocol is None else protocol.label()


def all_valid_variants() -> list[str]:
    """Canonical labels of every valid element combination on top of bc."""
    labels = []
    for dd in (False, True):
        for ft in (False, True):
            for mp in (False, True):
                for hd in (False, True):
                    if (mp or hd) and not dd:
                        continue
                    labels.append(
                        ProtocolConfig(
                            discrete_defect=dd, free_trade=ft,
                            max_punishment=mp, hard_defect=hd,
                        ).label()
                    )
    return labels


# --------------------------------------------------------------------------
# Manifest and output helpers
# --------------------------------------------------------------------------

def write_manifest(
    out_dir: Path, command: str, args_echo: dict, resolved: dict,
    config_hash: str, seeds: dict, outputs: list[str],
) -> None:
    manifest = {
        "tool": "clubsim",
        "version": __version__,
        "command": command,
        "args": args_echo,
        "config_sha256": config_hash,
        "resolved_config": {k: resolved[k] for k in sorted(resolved)},
        "seed_schedule": seeds,
        "outputs": sorted(outputs),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _prepare_out(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_run(args) -> int:
    config, resolved, config_hash = parse_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
        resolved["sim.seed"] = args.seed
    out = _prepare_out(args.out)
    trace = run_episode(config)
    (out / "trace.csv").write_text(trace_csv(trace))
    (out / "climate.csv").write_text(climate_csv(trace))
    write_manifest(
        out, "run", {"config": args.config, "seed": config.master_seed, "out": args.out},
        resolved, config_hash,
        {"master": config.master_seed, "run_indices": [0]},
        ["trace.csv", "climate.csv"],
    )
    print(f"run: variant={config.label()} final_t_at={trace.final_t_at:.3f} "
          f"total_gross_output={trace.total_gross_output:.1f}")
    return 0


def _variant_config(base: SimConfig, protocol: ProtocolConfig | None) -> SimConfig:
    return replace(base, protocol=protocol)


def cmd_compare(args) -> int:
    config, resolved, config_hash = parse_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
        resolved["sim.seed"] = args.seed
    names = [v.strip() for v in args.variants.split(",") if v.strip()]
    if not names:
        raise ConfigError("no variants given")
    variants = [(variant_label(parse_variant(v)), parse_variant(v)) for v in names]
    if args.runs < 1:
        raise ConfigError("--runs must be at least 1")
    out = _prepare_out(args.out)

    metrics_rows: list[MetricPoint] = []
    mean_points: list[MetricPoint] = []
    traces_by_label: dict[str, list] = {}
    for label, protocol in variants:
        traces = run_ensemble(_variant_config(config, protocol), args.runs)
        traces_by_label[label] = traces
        points = [episode_metrics(t, label=label, seed=i) for i, t in enumerate(traces)]
        metrics_rows.extend(points)
        mean_points.append(
            MetricPoint(
                label=label,
                temperature_rise=float(np.mean([p.temperature_rise for p in points])),
                gross_output_total=float(np.mean([p.gross_output_total for p in points])),
            )
        )

    dominant = pareto_front(mean_points)
    flag_by_label = {p.label: d for p, d in zip(mean_points, dominant)}
    lines = ["label,seed,temp_rise,gross_output_total,pareto_dominant"]
    for point in metrics_rows:
        lines.append(
            f"{point.label},{point.seed},{_fmt(point.temperature_rise)},"
            f"{_fmt(point.gross_output_total)},{int(flag_by_label[point.label])}"
        )
    (out / "metrics.csv").write_text("\n".join(lines) + "\n")

    path_lines = ["label,temp_rise_mean,rcp,ssp"]
    report = []
    for point in mean_points:
        pathway = map_to_pathway(point.temperature_rise)
        path_lines.append(
            f"{point.label},{_fmt(point.temperature_rise)},{pathway.rcp},{pathway.ssp}"
        )
        report.append(
            f"  {point.label:<16} {point.temperature_rise:6.2f} degC   "
            f"{pathway.rcp:<12} {pathway.ssp}"
        )
    (out / "pathways.csv").write_text("\n".join(path_lines) + "\n")

    chart_files = emit_charts(traces_by_label, mean_points, out)
    write_manifest(
        out, "compare",
        {"config": args.config, "seed": config.master_seed, "out": args.out,
         "variants": [label for label, _ in variants], "runs": args.runs},
        resolved, config_hash,
        {"master": config.master_seed, "run_indices": list(range(args.runs))},
        ["metrics.csv", "pathways.csv"] + [p.name for p in chart_files],
    )
    print("protocol         temp rise   pathway")
    print("\n".join(report))
    return 0


def cmd_pareto(args) -> int:
    config, resolved, config_hash = parse_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
        resolved["sim.seed"] = args.seed
    if args.variants:
        names = [v.strip() for v in args.variants.split(",") if v.strip()]
    else:
        names = all_valid_variants()
    if args.runs < 1:
        raise ConfigError("--runs must be at least 1")
    out = _prepare_out(args.out)

    swept: list[tuple[str, ProtocolConfig | None]] = []
    for name in names:
        try:
            protocol = parse_variant(name)
        except ConfigError as exc:
            print(f"pareto: skipping invalid combination {name!r}: {exc}", file=sys.stderr)
            continue
        swept.append((variant_label(protocol), protocol))
    if not swept:
        raise ConfigError("no valid variants in the sweep")

    metrics_rows: list[MetricPoint] = []
    mean_points: list[MetricPoint] = []
    traces_by_label: dict[str, list] = {}
    for label, protocol in swept:
        traces = run_ensemble(_variant_config(config, protocol), args.runs)
        traces_by_label[label] = traces
        points = [episode_metrics(t, label=label, seed=i) for i, t in enumerate(traces)]
        metrics_rows.extend(points)
        mean_points.append(
            MetricPoint(
                label=label,
                temperature_rise=float(np.mean([p.temperature_rise for p in points])),
                gross_output_total=float(np.mean([p.gross_output_total for p in points])),
            )
        )

    dominant = pareto_front(mean_points)
    flag_by_label = {p.label: d for p, d in zip(mean_points, dominant)}
    lines = ["label,seed,temp_rise,gross_output_total,pareto_dominant"]
    for point in metrics_rows:
        lines.append(
            f"{point.label},{point.seed},{_fmt(point.temperature_rise)},"
            f"{_fmt(point.gross_output_total)},{int(flag_by_label[point.label])}"
        )
    (out / "metrics.csv").write_text("\n".join(lines) + "\n")

    chart_files = emit_charts(traces_by_label, mean_points, out)
    write_manifest(
        out, "pareto",
        {"config": args.config, "seed": config.master_seed, "out": args.out,
         "variants": [label for label, _ in swept], "runs": args.runs},
        resolved, config_hash,
        {"master": config.master_seed, "run_indices": list(range(args.runs))},
        ["metrics.csv"] + [p.name for p in chart_files],
    )
    for point, flag in zip(mean_points, dominant):
        tag = "dominant" if flag else "dominated"
        print(f"  {point.label:<16} T={point.temperature_rise:6.2f}  "
              f"Y={point.gross_output_total:10.1f}  {tag}")
    return 0


def cmd_correlate(args) -> int:
    config, resolved, config_hash = parse_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
        resolved["sim.seed"] = args.seed
    if args.runs < 3:
        raise ConfigError("--runs must be at least 3 for a correlation")
    out = _prepare_out(args.out)

    protocol = ProtocolConfig(discrete_defect=True)
    traces = run_ensemble(_variant_config(config, protocol), args.runs)
    results = abatement_correlations(traces)

    lines = ["variable,r,p,n"]
    for res in results:
        lines.append(f"{res.variable},{_fmt(res.r)},{_fmt(res.p)},{res.n}")
    (out / "correlations.csv").write_text("\n".join(lines) + "\n")

    cost, features = [], {name: [] for name in ABATEMENT_FEATURES}
    for trace in traces:
        n = len(trace.regions_initial)
        total_cost = np.zeros(n)
        total_output = np.zeros(n)
        for record in trace.steps:
            total_cost += np.asarray(record.abatement_cost)
            total_output += np.asarray(record.gross_output)
        for i, region in enumerate(trace.regions_initial):
            cost.append(total_cost[i])
            features["capital"].append(region.capital)
            features["production_factor"].append(region.tfp)
            features["carbon_intensity"].append(region.carbon_intensity)
            features["gross_output"].append(total_output[i])
    chart_files = emit_correlation_charts(
        {k: np.asarray(v) for k, v in features.items()}, np.asarray(cost), results, out
    )

    write_manifest(
        out, "correlate",
        {"config": args.config, "seed": config.master_seed, "out": args.out,
         "variant": protocol.label(), "runs": args.runs},
        resolved, config_hash,
        {"master": config.master_seed, "run_indices": list(range(args.runs))},
        ["correlations.csv"] + [p.name for p in chart_files],
    )
    for res in results:
        print(f"  {res.variable:<18} r={res.r:+.4f}  p={res.p:.4f}  n={res.n}")
    return 0


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clubsim",
        description="Climate-club negotiation protocols over a climate-economy simulator",
    )
    parser.add_argument("--version", action="version", version=f"clubsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="dotted-key config file")
        p.add_argument("--seed", type=int, default=None, help="override sim.seed")
        p.add_argument("--out", default="out", help="output directory")

    p_run = sub.add_parser("run", help="run one episode and export its trace")
    common(p_run)

    p_cmp = sub.add_parser("compare", help="compare protocol variants")
    common(p_cmp)
    p_cmp.add_argument("--variants", default="none,bc,bc+dd",
                       help="comma-separated variant names")
    p_cmp.add_argument("--runs", type=int, default=5, help="episodes per variant")

    p_par = sub.add_parser("pareto", help="sweep element combinations")
    common(p_par)
    p_par.add_argument("--variants", default=None,
                       help="override the sweep (default: all valid combinations)")
    p_par.add_argument("--runs", type=int, default=5, help="episodes per variant")

    p_cor = sub.add_parser("correlate", help="abatement-cost correlations on bc+dd")
    common(p_cor)
    p_cor.add_argument("--runs", type=int, default=40, help="ensemble size")

    return parser


COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "pareto": cmd_pareto,
    "correlate": cmd_correlate,
}


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"clubsim: config error: {exc}", file=sys.stderr)
        return 1
    except (EpisodeError, EnsembleError) as exc:
        print(f"clubsim: simulation aborted: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"clubsim: I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
