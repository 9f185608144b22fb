#!/usr/bin/env python3
"""
Full-scale acceptance experiments (10 000 peers, 10 000 epochs).
Minutes each; enable with GOSSIP_SIM_RUN_SLOW=1.
"""

import numpy as np
import pytest

from temporal_gossip.config import settings
from temporal_gossip.engine import run_experiment
from temporal_gossip.experiment_config import ExperimentConfig
from temporal_gossip.graph import generate_random_graph, step_dynamics
from temporal_gossip.harness import (
    broadcast_config,
    efficiency_table,
    failsafe_delay_gaps,
    run_sweep,
    tune_parameter,
)
from temporal_gossip.metrics import message_fraction, time_overhead
from temporal_gossip.models import ProtocolSpec
from temporal_gossip.schemas import ProtocolKind, Topology

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(not settings.run_slow, reason="set GOSSIP_SIM_RUN_SLOW=1"),
]

DEFAULTS = ExperimentConfig(seed=2024)


def test_steady_state_churn():
    params = DEFAULTS.dynamics_params()
    rng = np.random.default_rng(1)
    graph = generate_random_graph(10_000, 15.0, 0.8, seed=1)
    for _ in range(1000):
        step_dynamics(graph, params, rng)
    fractions = []
    for _ in range(10_000):
        step_dynamics(graph, params, rng)
        fractions.append(graph.active_count / graph.node_count)
    assert abs(np.mean(fractions) - 0.8) <= 0.01


def test_transit_loss_rate_under_broadcast():
    metrics = run_experiment(DEFAULTS)
    assert metrics.loss_rate == pytest.approx(1 / 400, rel=0.2)


def test_fixed_probability_headline():
    base = DEFAULTS.with_protocol(
        ProtocolSpec(kind=ProtocolKind.FIXED_PROBABILITY, p=100)
    )
    tuned = tune_parameter(base, 1.0, tolerance=0.0005)
    assert 56 <= tuned.value <= 64
    baseline = run_experiment(broadcast_config(tuned.config))
    assert 0.56 <= message_fraction(tuned.metrics, baseline) <= 0.62
    assert time_overhead(tuned.metrics, baseline) == pytest.approx(1.12, abs=0.05)


def test_dandelionpp_relayer_sweep():
    fractions = [round(0.1 * step, 1) for step in range(1, 10)]
    base = DEFAULTS.with_protocol(ProtocolSpec(kind=ProtocolKind.DANDELION_PP))
    rows = run_sweep(base, "relayer_fraction", fractions)
    assert all(row.metrics.success_rate == 1.0 for row in rows)

    delays = [row.metrics.avg_delay for row in rows]
    assert all(a < b for a, b in zip(delays, delays[1:]))

    messages = dict(zip(fractions, (row.metrics.avg_messages for row in rows)))
    rising = [messages[f] for f in fractions if f <= 0.7]
    assert rising == sorted(rising)
    assert messages[0.8] < messages[0.7]
    assert messages[0.9] < messages[0.7]


def test_degree_sweep_trends():
    rows = run_sweep(DEFAULTS, "avg_degree", [8, 10, 12, 15, 20])
    success = [row.metrics.success_rate for row in rows]
    delay = [row.metrics.avg_delay for row in rows]
    messages = [row.metrics.avg_messages for row in rows]
    assert success == sorted(success)
    assert delay == sorted(delay, reverse=True)
    assert messages == sorted(messages)


def test_hubs_lower_the_delay():
    hubs = ExperimentConfig(seed=2024, topology=Topology.HIERARCHICAL)
    flat = run_experiment(DEFAULTS)
    hierarchical = run_experiment(hubs)
    assert hierarchical.avg_delay < flat.avg_delay
    assert hierarchical.avg_messages == pytest.approx(flat.avg_messages, rel=0.05)
    assert abs(hierarchical.success_rate - flat.success_rate) < 0.01


# message fraction per target, in the order PB, FP, DDF, F-FAN
EFFICIENCY = {
    1.0: (0.601, 0.56, 0.474, 0.56),
    0.99: (0.328, 0.28, 0.264, 0.302),
    0.95: (0.224, 0.192, 0.189, 0.194),
    0.90: (0.181, 0.146, 0.147, 0.151),
}


def test_efficiency_table():
    rows = efficiency_table(DEFAULTS, targets=list(EFFICIENCY), tolerance=0.0005)
    fractions = {}
    for row in rows:
        fractions.setdefault(row.target, []).append(row.msg_fraction)

    for target, expected in EFFICIENCY.items():
        assert fractions[target] == pytest.approx(list(expected), abs=0.05)
    for target in (1.0, 0.99):
        pb, fp, ddf, _ = fractions[target]
        assert ddf <= fp <= pb
    for full, relaxed in zip(fractions[1.0], fractions[0.99]):
        assert relaxed <= 0.6 * full


def test_failsafe_delay_gap_grows_with_the_stem():
    gaps = [gap.gap for gap in failsafe_delay_gaps(DEFAULTS)]
    assert all(gap is not None and 0.01 <= gap <= 0.25 for gap in gaps)
    assert gaps == sorted(gaps)
