#!/usr/bin/env python3
"""
Experiment Harness
Parameter sweeps with seeded replications, coverage-targeted tuning of a
protocol's scalar parameter, and the protocol efficiency table.

Each trial is an independent run_experiment call, so trials can execute in a
process pool; results are always reassembled in submission order.
"""

import logging
import multiprocessing
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import settings
from .engine import RecordSink, run_experiment
from .experiment_config import ConfigError, ExperimentConfig, with_field
from .metrics import AggregateMetrics, MetricsError, message_fraction, time_overhead
from .models import ProtocolSpec
from .schemas import DDFMode, ProtocolKind
from .seeding import derive_seed

logger = logging.getLogger(__name__)

SWEEPABLE_AXES = frozenset(
    {
        "n",
        "avg_degree",
        "active_fraction",
        "attach_count",
        "min_degree",
        "hub_count",
        "hub_degree_min",
        "hub_degree_max",
        "total_directed_entries",
        "p_activate",
        "p_deactivate",
        "warmup_steps",
        "ttl",
        "max_steps",
        "p",
        "fanout_n",
        "ddf_x",
        "stem_steps",
        "relayer_fraction",
        "role_epoch_len",
        "failsafe_timeout",
    }
)

TABLE_KINDS = (
    ProtocolKind.PROBABILISTIC_BROADCAST,
    ProtocolKind.FIXED_PROBABILITY,
    ProtocolKind.DEGREE_DEPENDENT,
    ProtocolKind.FIXED_FANOUT,
)
TABLE_TARGETS = (1.0, 0.99, 0.95, 0.90)

GAP_STEM_STEPS = (2, 4, 8, 16)

GRID_POINTS = 60


class TuningError(RuntimeError):
    """A coverage target is unattainable anywhere on the tuning grid"""

    def __init__(
        self,
        message: str,
        best_value: Optional[float] = None,
        best_metrics: Optional[AggregateMetrics] = None,
        best_config: Optional[ExperimentConfig] = None,
    ):
        super().__init__(message)
        self.best_value = best_value
        self.best_metrics = best_metrics
        # the tried config, seed included, that produced best_metrics
        self.best_config = best_config


@dataclass(frozen=True)
class ExperimentResult:
    """One reported row: a config, what it measured, and its broadcast baseline"""

    config: ExperimentConfig
    metrics: AggregateMetrics
    param: str = ""
    baseline: Optional[AggregateMetrics] = None
    target: Optional[float] = None
    replication: int = 0

    @property
    def msg_fraction(self) -> Optional[float]:
        if self.baseline is None:
            return None
        try:
            return message_fraction(self.metrics, self.baseline)
        except MetricsError:
            return None

    @property
    def time_overhead(self) -> Optional[float]:
        if self.baseline is None:
            return None
        try:
            return time_overhead(self.metrics, self.baseline)
        except MetricsError:
            return None


@dataclass
class TuningResult:
    field_name: Optional[str]
    value: Optional[float]
    metrics: AggregateMetrics
    config: ExperimentConfig
    trials: List[Tuple[float, AggregateMetrics]] = field(default_factory=list)


def _run_all(
    configs: Sequence[ExperimentConfig], workers: Optional[int]
) -> List[AggregateMetrics]:
    workers = settings.max_workers if workers is None else workers
    if workers <= 1 or len(configs) < 2:
        return [run_experiment(config) for config in configs]
    processes = min(workers, len(configs))
    logger.info(f"Running {len(configs)} experiments on {processes} workers")
    with multiprocessing.Pool(processes) as pool:
        return pool.map(run_experiment, configs)


def _axis_value(config: ExperimentConfig, axis: str) -> Any:
    if axis in ProtocolSpec.model_fields:
        return getattr(config.protocol, axis)
    return getattr(config, axis)


def _param_label(config: ExperimentConfig, axis: Optional[str] = None) -> str:
    labels = []
    tunable = config.protocol.tunable_field
    if axis is not None and axis != tunable:
        labels.append(f"{axis}={_axis_value(config, axis):g}")
    if config.protocol.parameter_label:
        labels.append(config.protocol.parameter_label)
    return " ".join(labels)


def broadcast_config(config: ExperimentConfig) -> ExperimentConfig:
    """Same overlay, dynamics and seed, disseminated by pure broadcast"""
    return config.with_protocol(ProtocolSpec(kind=ProtocolKind.BROADCAST))


def run_single(
    config: ExperimentConfig,
    with_baseline: bool = False,
    record_sink: Optional[RecordSink] = None,
) -> ExperimentResult:
    baseline = None
    if with_baseline:
        baseline = run_experiment(broadcast_config(config))
    return ExperimentResult(
        config=config,
        metrics=run_experiment(config, record_sink),
        param=_param_label(config),
        baseline=baseline,
    )


def run_sweep(
    base: ExperimentConfig,
    axis: str,
    values: Sequence[Any],
    replications: int = 1,
    with_baseline: bool = False,
    workers: Optional[int] = None,
) -> List[ExperimentResult]:
    """
    One experiment per (value, replication), ordered by value then replication.
    Replication r of value v runs with seed derive_seed(base.seed, v, r).
    """
    if axis not in SWEEPABLE_AXES:
        choices = ", ".join(sorted(SWEEPABLE_AXES))
        raise ConfigError(f"not a sweepable axis (choose from {choices})", key=axis)
    if replications < 1:
        raise ConfigError(f"replications must be >= 1, got {replications}")

    configs: List[ExperimentConfig] = []
    for value in values:
        swept = with_field(base, axis, value)
        parsed = _axis_value(swept, axis)
        for replication in range(replications):
            configs.append(swept.with_seed(derive_seed(base.seed, parsed, replication)))

    jobs = list(configs)
    baseline_index: Dict[Tuple[str, int], int] = {}
    if with_baseline:
        for config in configs:
            reference = broadcast_config(config)
            key = (reference.config_hash(), reference.seed)
            if key not in baseline_index:
                baseline_index[key] = len(jobs)
                jobs.append(reference)

    logger.info(f"🚀 Sweep over {axis}: {len(values)} values x {replications} replications")
    metrics = _run_all(jobs, workers)

    results = []
    for index, config in enumerate(configs):
        baseline = None
        if with_baseline:
            reference = broadcast_config(config)
            baseline = metrics[baseline_index[(reference.config_hash(), reference.seed)]]
        results.append(
            ExperimentResult(
                config=config,
                metrics=metrics[index],
                param=_param_label(config, axis),
                baseline=baseline,
                replication=index % replications,
            )
        )
    logger.info(f"✅ Sweep over {axis} finished: {len(results)} rows")
    return results


def _round_grid(values: np.ndarray) -> List[float]:
    return [float(f"{v:.6g}") for v in values]


def default_grid(base: ExperimentConfig) -> List[float]:
    """Tuning grid for the protocol's tunable field, least generous first"""
    spec = base.protocol
    name = spec.tunable_field
    if name == "p":
        return [float(v) for v in range(0, 101, 2)]
    if name == "fanout_n":
        return [float(v) for v in range(1, int(2 * base.avg_degree) + 2)]
    if name == "ddf_x":
        if spec.ddf_mode is DDFMode.LOG:
            return _round_grid(np.geomspace(1e6, 1.05, GRID_POINTS))
        return _round_grid(np.geomspace(4.0, 0.005, GRID_POINTS))
    raise ConfigError(f"{spec.kind.value} has no tunable parameter", key="protocol")


def tune_parameter(
    base: ExperimentConfig,
    target_coverage: float,
    tolerance: float = 0.0,
    grid: Optional[Sequence[float]] = None,
    cache: Optional[Dict[float, AggregateMetrics]] = None,
) -> TuningResult:
    """
    Least generous grid value whose success_rate reaches target_coverage - tolerance.

    Coverage is assumed monotone along the grid: the most generous point is
    tried first, then the grid is bisected. Every trial runs with a seed
    derived from the tried value. Passing the same cache across targets reuses
    trials already measured for this protocol.
    """
    if not 0.0 <= target_coverage <= 1.0:
        raise ConfigError(f"target coverage must be in [0, 1], got {target_coverage}")
    spec = base.protocol
    name = spec.tunable_field
    if spec.kind is ProtocolKind.BROADCAST:
        metrics = run_experiment(base)
        return TuningResult(field_name=None, value=None, metrics=metrics, config=base)
    if name is None:
        raise ConfigError(f"{spec.kind.value} has no tunable parameter", key="protocol")

    points = list(grid) if grid is not None else default_grid(base)
    if not points:
        raise ConfigError("empty tuning grid")
    cache = {} if cache is None else cache
    threshold = target_coverage - tolerance
    trials: List[Tuple[float, AggregateMetrics]] = []

    def measure(index: int) -> Tuple[ExperimentConfig, AggregateMetrics]:
        value = points[index]
        config = with_field(base, name, value).with_seed(
            derive_seed(base.seed, "tune", name, value)
        )
        if value not in cache:
            cache[value] = run_experiment(config)
            logger.debug(f"trial {name}={value:g}: success={cache[value].success_rate:.4f}")
        trials.append((value, cache[value]))
        return config, cache[value]

    top = len(points) - 1
    best_config, best_metrics = measure(top)
    if best_metrics.success_rate < threshold:
        logger.error(
            f"❌ {spec.kind.value}: target {target_coverage} unattainable, "
            f"best {name}={points[top]:g} reached {best_metrics.success_rate:.4f}"
        )
        raise TuningError(
            f"{spec.kind.value} cannot reach coverage {target_coverage} "
            f"(best {name}={points[top]:g} gives {best_metrics.success_rate:.4f})",
            best_value=points[top],
            best_metrics=best_metrics,
            best_config=best_config,
        )

    low, high = -1, top
    while high - low > 1:
        mid = (low + high) // 2
        config, metrics = measure(mid)
        if metrics.success_rate >= threshold:
            high, best_config, best_metrics = mid, config, metrics
        else:
            low = mid

    logger.info(
        f"✅ {spec.kind.value} tuned to {name}={points[high]:g} for coverage "
        f"{target_coverage}: success={best_metrics.success_rate:.4f} "
        f"({len(trials)} trials)"
    )
    return TuningResult(
        field_name=name,
        value=points[high],
        metrics=best_metrics,
        config=best_config,
        trials=trials,
    )


def _placeholder_spec(kind: ProtocolKind, base: ExperimentConfig) -> ProtocolSpec:
    if kind is ProtocolKind.DEGREE_DEPENDENT:
        return ProtocolSpec(kind=kind, ddf_x=2.0, ddf_mode=base.protocol.ddf_mode)
    if kind is ProtocolKind.FIXED_FANOUT:
        return ProtocolSpec(kind=kind, fanout_n=1)
    return ProtocolSpec(kind=kind, p=100.0)


def efficiency_table(
    base: ExperimentConfig,
    kinds: Sequence[ProtocolKind] = TABLE_KINDS,
    targets: Sequence[float] = TABLE_TARGETS,
    tolerance: float = 0.0,
) -> List[ExperimentResult]:
    """
    Tune every protocol to every coverage target and compare each row with a
    broadcast run on the row's own seed. Rows are ordered target, then protocol.
    An unattainable target yields the best grid point instead of an error.
    """
    caches: Dict[ProtocolKind, Dict[float, AggregateMetrics]] = {kind: {} for kind in kinds}
    baselines: Dict[Tuple[str, int], AggregateMetrics] = {}

    def baseline_for(config: ExperimentConfig) -> AggregateMetrics:
        reference = broadcast_config(config)
        key = (reference.config_hash(), reference.seed)
        if key not in baselines:
            baselines[key] = run_experiment(reference)
            logger.debug(
                f"baseline seed={reference.seed}: "
                f"messages={baselines[key].avg_messages:.1f}"
            )
        return baselines[key]

    rows = []
    for target in targets:
        for kind in kinds:
            config = base.with_protocol(_placeholder_spec(kind, base))
            try:
                tuned = tune_parameter(config, target, tolerance, cache=caches[kind])
                tuned_config, metrics = tuned.config, tuned.metrics
            except TuningError as exc:
                logger.warning(f"{kind.short_name} at {target}: {exc}")
                if exc.best_config is None or exc.best_metrics is None:
                    raise
                tuned_config, metrics = exc.best_config, exc.best_metrics
            rows.append(
                ExperimentResult(
                    config=tuned_config,
                    metrics=metrics,
                    param=_param_label(tuned_config),
                    baseline=baseline_for(tuned_config),
                    target=target,
                )
            )
    logger.info(f"✅ Efficiency table: {len(rows)} rows, {len(baselines)} baselines")
    return rows


@dataclass(frozen=True)
class DelayGap:
    """Dandelion with the fail-safe timer against the same run without it"""

    stem_steps: int
    failsafe: ExperimentResult
    ideal: ExperimentResult

    @property
    def gap(self) -> Optional[float]:
        with_timer = self.failsafe.metrics.avg_delay
        without = self.ideal.metrics.avg_delay
        if with_timer is None or without is None:
            return None
        return with_timer - without


def failsafe_delay_gaps(
    base: ExperimentConfig,
    stem_steps: Sequence[int] = GAP_STEM_STEPS,
    workers: Optional[int] = None,
) -> List[DelayGap]:
    """
    Delay cost of the Dandelion fail-safe per stem length.

    Without the timer only undisturbed stems deliver, so that run's average
    delay is the ideal-delivery delay. Both runs of a pair share the seed
    derive_seed(base.seed, "stem", steps).
    """
    configs: List[ExperimentConfig] = []
    for steps in stem_steps:
        seed = derive_seed(base.seed, "stem", steps)
        for enabled in (True, False):
            spec = ProtocolSpec(
                kind=ProtocolKind.DANDELION, stem_steps=steps, failsafe_enabled=enabled
            )
            configs.append(base.with_protocol(spec).with_seed(seed))

    logger.info(f"🚀 Fail-safe delay gap over stem_steps {list(stem_steps)}")
    metrics = _run_all(configs, workers)
    gaps = []
    for index, steps in enumerate(stem_steps):
        rows = [
            ExperimentResult(
                config=configs[2 * index + offset],
                metrics=metrics[2 * index + offset],
                param=f"stem_steps={steps} failsafe={label}",
            )
            for offset, label in ((0, "on"), (1, "off"))
        ]
        gaps.append(DelayGap(stem_steps=steps, failsafe=rows[0], ideal=rows[1]))
        logger.info(f"stem_steps={steps}: delay gap {gaps[-1].gap}")
    return gaps
