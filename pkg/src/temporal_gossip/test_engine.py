#!/usr/bin/env python3
"""
Test Simulation Engine
Epoch execution against BFS on frozen overlays, churn losses, TTL, dedup,
stem/fluff properties, the fail-safe timer and run determinism
"""

import networkx as nx
import numpy as np
import pytest

from temporal_gossip.engine import SimState, advance_timestep, run_epoch, run_experiment
from temporal_gossip.experiment_config import ExperimentConfig
from temporal_gossip.graph import (
    DynamicsParams,
    TemporalGraph,
    bfs_distance,
    generate_random_graph,
    step_dynamics,
    to_networkx,
)
from temporal_gossip.models import ProtocolSpec
from temporal_gossip.schemas import Phase, ProtocolKind, Topology

FROZEN = DynamicsParams(p_activate=0.0, p_deactivate=0.0, attach_count=1)
CHURN = DynamicsParams(p_activate=0.05, p_deactivate=0.02, attach_count=6)


def build(node_count, edges):
    graph = TemporalGraph(node_count, active=np.ones(node_count, dtype=bool))
    for u, v in edges:
        graph.add_link(u, v)
    return graph


def path(length):
    return build(length, [(i, i + 1) for i in range(length - 1)])


def drive(graph, spec, ttl, dyn, seed, applicant, holder, max_steps=60):
    """Run one message to quiescence, recording every step outcome"""
    rng = np.random.default_rng(seed)
    sim = SimState(graph=graph, ttl=ttl)
    sim.originate(spec, applicant, holder, 0, rng)
    pinned = dyn.with_pinned((applicant, holder))
    outcomes = []
    stem_width = []
    for _ in range(max_steps):
        if sim.is_quiescent():
            break
        outcomes.append(advance_timestep(sim, spec, pinned, rng))
        due = sim.in_flight.get(graph.timestep + 1, [])
        stem_width.append(sum(env.phase is Phase.STEM for env in due))
    return sim, outcomes, stem_width


def _connected_graphs(count):
    rng = np.random.default_rng(1234)
    found = 0
    seed = 0
    while found < count:
        seed += 1
        n = int(rng.integers(50, 501))
        graph = generate_random_graph(n, 8.0, 1.0, seed=seed)
        if nx.is_connected(to_networkx(graph)):
            found += 1
            yield seed, graph


@pytest.mark.parametrize("seed,graph", list(_connected_graphs(100)))
def test_broadcast_delay_equals_bfs_distance(seed, graph):
    ttl = graph.node_count
    record = run_epoch(
        graph, ProtocolSpec(), ttl, ttl, FROZEN, np.random.default_rng(seed)
    )
    assert record.success
    assert record.delay == bfs_distance(graph, record.applicant, record.holder)


def test_isolated_applicant_fails_without_traffic():
    graph = TemporalGraph(2, active=np.ones(2, dtype=bool))
    record = run_epoch(graph, ProtocolSpec(), 5, 5, FROZEN, np.random.default_rng(0))
    assert not record.success
    assert record.messages_sent == 0
    assert record.delay is None


def test_neighbour_holder_is_reached_in_one_step():
    graph = path(2)
    record = run_epoch(graph, ProtocolSpec(), 3, 3, FROZEN, np.random.default_rng(0))
    assert record.success
    assert record.delay == 1
    assert record.messages_sent == 1


def test_epoch_rejects_bad_budgets():
    graph = path(3)
    with pytest.raises(ValueError):
        run_epoch(graph, ProtocolSpec(), 0, 5, FROZEN, np.random.default_rng(0))
    with pytest.raises(ValueError):
        run_epoch(graph, ProtocolSpec(), 5, 4, FROZEN, np.random.default_rng(0))


def test_ttl_bounds_the_flood():
    sim, outcomes, _ = drive(path(6), ProtocolSpec(), 3, FROZEN, 0, 0, 5)
    reached = [env.receiver for out in outcomes for env in out.first_receipts]
    assert reached == [1, 2, 3]
    assert sim.counters.messages_sent == 3
    for out in outcomes:
        for env in out.first_receipts:
            assert env.ttl_remaining == 3 - env.hops


def test_envelope_over_a_stale_entry_is_lost():
    graph = path(3)
    leave = DynamicsParams(p_activate=0.0, p_deactivate=1.0, attach_count=1)
    step_dynamics(graph, leave.with_pinned((0, 2)), np.random.default_rng(0))
    assert not graph.active[1]
    assert graph.neighbors(0) == [1]

    sim, outcomes, _ = drive(graph, ProtocolSpec(), 5, FROZEN, 0, 0, 2)
    assert sim.counters.lost_to_churn == 1
    assert sim.counters.delivered == 0
    assert outcomes[0].losses[0].receiver == 1
    assert sim.is_quiescent()


def test_receiver_leaving_at_delivery_keeps_the_copy():
    graph = path(4)
    leave = DynamicsParams(p_activate=0.0, p_deactivate=1.0, attach_count=1)
    sim, outcomes, _ = drive(graph, ProtocolSpec(), 5, leave, 0, 0, 3)
    assert 1 in outcomes[0].dynamics.deactivated
    assert sim.counters.lost_to_churn == 0
    assert sim.counters.delivered == 1
    assert [env.receiver for env in outcomes[0].first_receipts] == [1]
    # the departed receiver forwards nothing
    assert sim.counters.messages_sent == 1
    assert sim.is_quiescent()


def test_broadcast_loss_rate_tracks_the_departure_probability():
    config = ExperimentConfig(
        n=600,
        avg_degree=10.0,
        p_activate=0.08,
        p_deactivate=0.02,
        epochs=60,
        ttl=8,
        seed=5,
    )
    metrics = run_experiment(config)
    assert metrics.delivered > 5_000
    assert 0.014 <= metrics.loss_rate <= 0.026


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize(
    "spec",
    [
        ProtocolSpec(),
        ProtocolSpec(kind=ProtocolKind.FIXED_PROBABILITY, p=70),
        ProtocolSpec(kind=ProtocolKind.DANDELION, stem_steps=3, failsafe_enabled=True),
        ProtocolSpec(kind=ProtocolKind.DANDELION_PP, role_epoch_len=5),
    ],
)
def test_dissemination_properties_under_churn(seed, spec):
    graph = generate_random_graph(150, 6.0, 0.8, seed=seed)
    active = graph.active_nodes()
    applicant, holder = int(active[0]), int(active[-1])
    sim, outcomes, stem_width = drive(graph, spec, 8, CHURN, seed, applicant, holder)

    receipts = [env for out in outcomes for env in out.first_receipts]
    # each node takes a message into its cache (and forwards it) at most once
    receivers = [env.receiver for env in receipts]
    assert len(receivers) == len(set(receivers))
    assert applicant not in receivers

    delivered = [env for out in outcomes for env in out.first_receipts + out.duplicates]
    lost = [env for out in outcomes for env in out.losses]
    assert sim.counters.messages_sent == len(delivered) + len(lost) + sim.pending
    assert sim.counters.lost_to_churn == len(lost)

    phase_of = {env.receiver: env.phase for env in receipts}
    for env in delivered + lost:
        assert env.hops <= 8
        if env.phase is Phase.STEM and env.sender != applicant:
            # stem copies only come from nodes that received the stem themselves
            assert phase_of[env.sender] is Phase.STEM
    if spec.kind is ProtocolKind.DANDELION:
        assert all(width <= 1 for width in stem_width)


def test_failsafe_fires_after_timeout():
    spec = ProtocolSpec(
        kind=ProtocolKind.DANDELION,
        stem_steps=1,
        failsafe_enabled=True,
        failsafe_timeout=3,
    )
    sim, outcomes, _ = drive(path(2), spec, 5, FROZEN, 0, 0, 1)
    assert sim.counters.failsafe_triggers == 1
    assert [out.failsafe_nodes for out in outcomes[:3]] == [[], [], [0]]
    assert outcomes[3].duplicates[0].phase is Phase.FLUFF
    assert sim.is_quiescent()


def test_failsafe_is_silenced_by_returning_fluff():
    spec = ProtocolSpec(
        kind=ProtocolKind.DANDELION,
        stem_steps=1,
        failsafe_enabled=True,
        failsafe_timeout=3,
    )
    # 0 stems to one neighbour, whose fluff comes back to 0 through the third node
    graph = build(3, [(0, 1), (1, 2), (0, 2)])
    sim, _, _ = drive(graph, spec, 5, FROZEN, 3, 0, 2)
    assert sim.counters.failsafe_triggers == 0


def _small_config(**overrides):
    values = dict(n=150, avg_degree=6.0, epochs=40, ttl=10, seed=11)
    values.update(overrides)
    return ExperimentConfig(**values)


def test_run_experiment_is_deterministic():
    config = _small_config(
        protocol=ProtocolSpec(kind=ProtocolKind.FIXED_PROBABILITY, p=60)
    )
    assert run_experiment(config) == run_experiment(config)
    assert run_experiment(config) != run_experiment(config.with_seed(12))


def test_run_experiment_feeds_the_record_sink():
    seen = []
    metrics = run_experiment(_small_config(epochs=15), lambda i, r: seen.append((i, r)))
    assert [index for index, _ in seen] == list(range(15))
    assert metrics.epochs == 15
    assert metrics.successes == sum(record.success for _, record in seen)


def test_broadcast_reaches_almost_everyone():
    metrics = run_experiment(_small_config())
    assert metrics.success_rate >= 0.9


def test_dandelionpp_failsafe_keeps_coverage():
    spec = ProtocolSpec(kind=ProtocolKind.DANDELION_PP, role_epoch_len=10)
    config = _small_config(protocol=spec, epochs=30)
    assert config.resolved_max_steps == 40
    metrics = run_experiment(config)
    assert metrics.success_rate >= 0.8


def test_hierarchical_experiment_runs():
    config = _small_config(
        topology=Topology.HIERARCHICAL,
        n=400,
        hub_count=4,
        hub_degree_min=20,
        hub_degree_max=30,
        epochs=20,
    )
    metrics = run_experiment(config)
    assert metrics.epochs == 20
    assert metrics.messages_total > 0


def test_aggregate_conserves_messages_under_churn():
    config = _small_config(p_activate=0.08, p_deactivate=0.02, epochs=25)
    metrics = run_experiment(config)
    assert metrics.lost_to_churn > 0
    assert metrics.messages_total == (
        metrics.delivered + metrics.lost_to_churn + metrics.pending
    )


def test_degenerate_epoch_is_a_silent_failure():
    graph = TemporalGraph(3, active=np.array([True, False, False]))
    record = run_epoch(graph, ProtocolSpec(), 5, 5, FROZEN, np.random.default_rng(0))
    assert record.degenerate
    assert not record.success
    assert record.messages_sent == 0
