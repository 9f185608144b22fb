import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import typer

from temporal_gossip.config import settings
from temporal_gossip.engine import build_graph, run_experiment
from temporal_gossip.experiment_config import (
    ConfigError,
    ExperimentConfig,
    config_from_mapping,
    read_config_values,
)
from temporal_gossip.graph import GraphGenerationError, track_health, write_edge_list
from temporal_gossip.harness import (
    GAP_STEM_STEPS,
    TABLE_TARGETS,
    ExperimentResult,
    TuningError,
    broadcast_config,
    efficiency_table,
    failsafe_delay_gaps,
    run_single,
    run_sweep,
    tune_parameter,
)
from temporal_gossip.metrics import MetricsError
from temporal_gossip.report import EpochRecordWriter, emit_report
from temporal_gossip.schemas import ReportFormat
from temporal_gossip.seeding import spawn_streams

logger = logging.getLogger(__name__)

cli_app = typer.Typer(
    help="Temporal gossip simulator. Run experiments, sweeps, tuning and overlay health checks."
)

FAILURES = (ConfigError, GraphGenerationError, MetricsError, TuningError, OSError)


@cli_app.callback()
def main(
    log_level: str = typer.Option(
        settings.log_level, "--log-level", help="Logging level (DEBUG, INFO, ...)."
    ),
):
    logging.basicConfig(
        level=log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _fail(exc: Exception) -> None:
    logger.error(f"❌ {exc}")
    typer.echo(f"Error: {exc}", err=True)
    raise typer.Exit(code=1)


def _load_config(config_path: Optional[Path], overrides: Dict[str, Any]) -> ExperimentConfig:
    """Config file values (if any), then command-line overrides, then validation"""
    values: Dict[str, Any] = {}
    line_of: Dict[str, int] = {}
    if config_path is not None:
        values, line_of = read_config_values(config_path.read_text(encoding="utf-8"))
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
            line_of.pop(key, None)
    return config_from_mapping(values, line_of)


def _parse_sweep(text: str) -> Tuple[str, List[str]]:
    if "=" not in text:
        raise ConfigError("--sweep expects axis=v1,v2,...")
    axis, raw = (part.strip() for part in text.split("=", 1))
    values = [v.strip() for v in raw.split(",") if v.strip()]
    if not values:
        raise ConfigError("--sweep needs at least one value", key=axis)
    return axis, values


def _parse_targets(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"invalid coverage targets '{text}'") from None


def _report_format(fmt: str) -> ReportFormat:
    try:
        return ReportFormat(fmt.lower())
    except ValueError:
        raise ConfigError(f"unknown format '{fmt}' (csv or text)") from None


@cli_app.command(name="run")
def run(
    config_path: Optional[Path] = typer.Option(
        None, "--config", "-c", help="Flat key=value experiment config file."
    ),
    protocol: Optional[str] = typer.Option(
        None,
        "--protocol",
        help="Broadcast, ProbabilisticBroadcast, FixedProbability, FixedFanout, "
        "DegreeDependent, Dandelion or DandelionPP. Default: Broadcast.",
    ),
    p: Optional[float] = typer.Option(None, "--p", help="Forwarding percentage (0-100)."),
    fanout: Optional[int] = typer.Option(None, "--fanout", help="Fixed fanout n."),
    ddf_x: Optional[float] = typer.Option(None, "--ddf-x", help="Degree dependent parameter x."),
    ddf_mode: Optional[str] = typer.Option(None, "--ddf-mode", help="Log or Exp. Default: Log."),
    fluff_kind: Optional[str] = typer.Option(
        None, "--fluff-kind", help="Fluff rule for Dandelion(PP). Default: Broadcast."
    ),
    stem_steps: Optional[int] = typer.Option(None, "--stem-steps", help="Dandelion stem length. Default: 4."),
    relayer_fraction: Optional[float] = typer.Option(
        None, "--relayer-fraction", help="Dandelion++ relayer fraction. Default: 0.8."
    ),
    failsafe: Optional[bool] = typer.Option(
        None, "--failsafe/--no-failsafe", help="Fail-safe timer. Default: on for DandelionPP only."
    ),
    nodes: Optional[int] = typer.Option(None, "--nodes", "-n", help="Node count. Default: 10000."),
    avg_degree: Optional[float] = typer.Option(None, "--avg-degree", help="Average degree. Default: 15."),
    active_fraction: Optional[float] = typer.Option(
        None, "--active-fraction", help="Initially active fraction. Default: 0.8."
    ),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="Epochs. Default: 10000."),
    ttl: Optional[int] = typer.Option(None, "--ttl", help="Hop budget. Default: 20."),
    max_steps: Optional[int] = typer.Option(None, "--max-steps", help="Timestep budget per epoch."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Experiment seed. Default: 0."),
    topology: Optional[str] = typer.Option(None, "--topology", help="Random or Hierarchical."),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Report file. Default: stdout."),
    fmt: str = typer.Option("csv", "--format", "-f", help="Report format: csv or text."),
    records: Optional[Path] = typer.Option(
        None, "--records", help="Per-epoch CSV (single runs only)."
    ),
    sweep: Optional[str] = typer.Option(None, "--sweep", help="Sweep one axis: axis=v1,v2,..."),
    replications: int = typer.Option(1, "--replications", help="Seeded replications per sweep value."),
    tune_coverage: Optional[float] = typer.Option(
        None, "--tune-coverage", help="Tune the protocol parameter to this success rate."
    ),
    tolerance: float = typer.Option(0.0, "--tolerance", help="Coverage tolerance when tuning."),
    baseline: bool = typer.Option(
        False, "--baseline", help="Also run broadcast to fill the ratio columns."
    ),
):
    """
    Runs one experiment, a sweep, or a coverage-targeted tuning, and emits a report.
    """
    overrides = {
        "protocol": protocol,
        "p": p,
        "fanout_n": fanout,
        "ddf_x": ddf_x,
        "ddf_mode": ddf_mode,
        "fluff_kind": fluff_kind,
        "stem_steps": stem_steps,
        "relayer_fraction": relayer_fraction,
        "failsafe_enabled": failsafe,
        "n": nodes,
        "avg_degree": avg_degree,
        "active_fraction": active_fraction,
        "epochs": epochs,
        "ttl": ttl,
        "max_steps": max_steps,
        "seed": seed,
        "topology": topology,
    }
    try:
        report_format = _report_format(fmt)
        config = _load_config(config_path, overrides)
        if sweep is not None:
            axis, values = _parse_sweep(sweep)
            results = run_sweep(config, axis, values, replications, with_baseline=baseline)
        elif tune_coverage is not None:
            tuned = tune_parameter(config, tune_coverage, tolerance)
            reference = run_experiment(broadcast_config(tuned.config)) if baseline else None
            typer.echo(f"Tuned {tuned.field_name}={tuned.value} ({len(tuned.trials)} trials)", err=True)
            results = [
                ExperimentResult(
                    config=tuned.config,
                    metrics=tuned.metrics,
                    param=tuned.config.protocol.parameter_label,
                    baseline=reference,
                    target=tune_coverage,
                )
            ]
        elif records is not None:
            with EpochRecordWriter(records) as writer:
                results = [run_single(config, baseline, record_sink=writer)]
        else:
            results = [run_single(config, baseline)]
        emit_report(results, report_format, output)
        if report_format is ReportFormat.TEXT and len(results) == 1:
            typer.echo(results[0].metrics.report_block(), err=True)
    except FAILURES as exc:
        _fail(exc)


@cli_app.command(name="table")
def table(
    config_path: Optional[Path] = typer.Option(
        None, "--config", "-c", help="Base experiment config (protocol keys are ignored)."
    ),
    nodes: Optional[int] = typer.Option(None, "--nodes", "-n", help="Node count."),
    avg_degree: Optional[float] = typer.Option(None, "--avg-degree", help="Average degree."),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="Epochs per tuning trial."),
    ttl: Optional[int] = typer.Option(None, "--ttl", help="Hop budget."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Experiment seed."),
    topology: Optional[str] = typer.Option(None, "--topology", help="Random or Hierarchical."),
    targets: str = typer.Option(
        ",".join(f"{t:g}" for t in TABLE_TARGETS), "--targets", help="Coverage targets."
    ),
    tolerance: float = typer.Option(0.0, "--tolerance", help="Coverage tolerance."),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Report file. Default: stdout."),
    fmt: str = typer.Option("csv", "--format", "-f", help="Report format: csv or text."),
):
    """
    Tunes PB, FP, DDF and F-FAN to each coverage target and compares them with broadcast.
    """
    overrides = {
        "n": nodes,
        "avg_degree": avg_degree,
        "epochs": epochs,
        "ttl": ttl,
        "seed": seed,
        "topology": topology,
    }
    try:
        report_format = _report_format(fmt)
        base = broadcast_config(_load_config(config_path, overrides))
        results = efficiency_table(base, targets=_parse_targets(targets), tolerance=tolerance)
        emit_report(results, report_format, output)
    except FAILURES as exc:
        _fail(exc)


@cli_app.command(name="gaps")
def gaps(
    config_path: Optional[Path] = typer.Option(
        None, "--config", "-c", help="Base experiment config (protocol keys are ignored)."
    ),
    nodes: Optional[int] = typer.Option(None, "--nodes", "-n", help="Node count."),
    avg_degree: Optional[float] = typer.Option(None, "--avg-degree", help="Average degree."),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="Epochs per run."),
    ttl: Optional[int] = typer.Option(None, "--ttl", help="Hop budget."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Experiment seed."),
    stem_steps: str = typer.Option(
        ",".join(str(s) for s in GAP_STEM_STEPS), "--stem-steps", help="Stem lengths."
    ),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Report file. Default: stdout."),
    fmt: str = typer.Option("csv", "--format", "-f", help="Report format: csv or text."),
):
    """
    Measures the delay the Dandelion fail-safe adds over ideal stem delivery.
    """
    overrides = {
        "n": nodes,
        "avg_degree": avg_degree,
        "epochs": epochs,
        "ttl": ttl,
        "seed": seed,
    }
    try:
        report_format = _report_format(fmt)
        try:
            lengths = [int(v) for v in stem_steps.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"invalid stem lengths '{stem_steps}'") from None
        base = broadcast_config(_load_config(config_path, overrides))
        measured = failsafe_delay_gaps(base, lengths)
        results = [row for gap in measured for row in (gap.failsafe, gap.ideal)]
        emit_report(results, report_format, output)
        for gap in measured:
            shown = "n/a" if gap.gap is None else f"{gap.gap:.4f}"
            typer.echo(f"stem_steps={gap.stem_steps}: delay gap {shown}", err=True)
    except FAILURES as exc:
        _fail(exc)


@cli_app.command(name="health")
def health(
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Experiment config file."),
    nodes: Optional[int] = typer.Option(None, "--nodes", "-n", help="Node count."),
    avg_degree: Optional[float] = typer.Option(None, "--avg-degree", help="Average degree."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Experiment seed."),
    topology: Optional[str] = typer.Option(None, "--topology", help="Random or Hierarchical."),
    steps: int = typer.Option(10_000, "--steps", help="Dynamics steps to simulate."),
    sample_every: int = typer.Option(1000, "--sample-every", help="Steps between samples."),
    diameter_samples: int = typer.Option(16, "--diameter-samples", help="BFS sources per diameter estimate."),
    snapshot: Optional[Path] = typer.Option(
        None, "--snapshot", help="Write the final overlay as an edge list."
    ),
):
    """
    Evolves the overlay without traffic and reports active fraction, degree, components and diameter.
    """
    overrides = {"n": nodes, "avg_degree": avg_degree, "seed": seed, "topology": topology}
    try:
        if steps < 0 or sample_every < 1:
            raise ConfigError("--steps must be >= 0 and --sample-every >= 1")
        config = _load_config(config_path, overrides)
        graph_rng, dynamics_rng, _, _ = spawn_streams(config.seed)
        graph = build_graph(config, graph_rng)
        params = config.dynamics_params(graph.hubs)
        typer.echo(
            f"steady-state active fraction {params.steady_state_active_fraction:.4f}"
        )
        samples = track_health(
            graph, params, steps, sample_every, diameter_samples, dynamics_rng
        )
        typer.echo("timestep  active  mean_degree  components  diameter")
        for sample in samples:
            typer.echo(
                f"{sample.timestep:>8}  {sample.active_fraction:.4f}  "
                f"{sample.mean_degree:>11.3f}  {sample.components:>10}  {sample.diameter:>8}"
            )
        fractions = np.array([s.active_fraction for s in samples])
        typer.echo(f"mean active fraction {fractions.mean():.4f}")
        if snapshot is not None:
            snapshot.parent.mkdir(parents=True, exist_ok=True)
            write_edge_list(graph, snapshot)
            typer.echo(f"Snapshot written to {snapshot}")
    except FAILURES as exc:
        _fail(exc)
