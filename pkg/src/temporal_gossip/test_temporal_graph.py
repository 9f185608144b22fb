#!/usr/bin/env python3
"""
Test Temporal Graph
Generators, churn dynamics, stale-link handling and structural invariants
"""

import numpy as np
import pytest

from temporal_gossip.graph import (
    DynamicsParams,
    GraphGenerationError,
    GraphInvariantError,
    TemporalGraph,
    generate_hierarchical_graph,
    generate_random_graph,
    step_dynamics,
)

FROZEN = DynamicsParams(p_activate=0.0, p_deactivate=0.0, attach_count=1)


def build(node_count, edges, active=None):
    flags = np.ones(node_count, dtype=bool) if active is None else np.asarray(active)
    graph = TemporalGraph(node_count, active=flags)
    for u, v in edges:
        graph.add_link(u, v)
    return graph


# --- Generators ---


def test_complete_graph_when_degree_is_maximal():
    graph = generate_random_graph(4, 3.0, 1.0, seed=1)
    for node in range(4):
        assert graph.neighbors(node) == [v for v in range(4) if v != node]
    graph.validate()


def test_random_graph_rejects_impossible_degree():
    with pytest.raises(GraphGenerationError):
        generate_random_graph(4, 3.5, 1.0, seed=1)
    with pytest.raises(GraphGenerationError):
        generate_random_graph(100, 0.0, 0.8, seed=1)


def test_random_graph_counts():
    graph = generate_random_graph(1000, 10.0, 0.8, seed=11)
    assert graph.active_count == 800
    assert graph.directed_entry_count() == 8000
    inactive = np.flatnonzero(~graph.active)
    assert all(graph.degree(int(v)) == 0 for v in inactive)
    graph.validate()


def test_generation_is_deterministic():
    first = generate_random_graph(200, 6.0, 0.8, seed=5)
    second = generate_random_graph(200, 6.0, 0.8, seed=5)
    other = generate_random_graph(200, 6.0, 0.8, seed=6)
    assert first.adjacency == second.adjacency
    assert np.array_equal(first.active, second.active)
    assert first.adjacency != other.adjacency


def test_hierarchical_graph_spends_the_entry_budget():
    graph = generate_hierarchical_graph(2000, 10, (50, 60), 16000, 0.8, seed=3)
    assert graph.active_count == 1600
    assert len(graph.hubs) == 10
    assert graph.directed_entry_count() == 16000
    for hub in graph.hubs:
        assert 50 <= graph.degree(hub) <= 60
        assert all(peer not in graph.hubs for peer in graph.neighbors(hub))
    graph.validate()


def test_hierarchical_graph_rejects_small_budget():
    with pytest.raises(GraphGenerationError):
        generate_hierarchical_graph(2000, 10, (50, 60), 500, 0.8, seed=3)
    with pytest.raises(GraphGenerationError):
        generate_hierarchical_graph(100, 5, (90, 95), 2000, 0.8, seed=3)


# --- Dynamics ---


def test_frozen_dynamics_change_nothing():
    graph = build(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    before = [list(n) for n in graph.adjacency]
    delta = step_dynamics(graph, FROZEN, np.random.default_rng(0))
    assert graph.adjacency == before
    assert graph.timestep == 1
    assert not (delta.activated or delta.deactivated or delta.attachments)


def test_stale_entries_are_removed_one_step_later():
    graph = build(3, [(0, 1), (1, 2)])
    leave = DynamicsParams(
        p_activate=0.0, p_deactivate=1.0, attach_count=1, pinned=frozenset({0, 2})
    )
    rng = np.random.default_rng(0)

    delta = step_dynamics(graph, leave, rng)
    assert delta.deactivated == [1]
    assert graph.neighbors(1) == []
    assert graph.neighbors(0) == [1]  # stale, still present
    assert graph.deactivated_at[1] == 0
    graph.validate()

    delta = step_dynamics(graph, FROZEN, rng)
    assert delta.stale_removals == [(0, 1), (2, 1)]
    # both endpoints were left isolated and reattach to each other
    assert graph.neighbors(0) == [2]
    assert graph.neighbors(2) == [0]
    assert not graph.active[1]
    graph.validate()


def test_node_that_left_does_not_rejoin_in_the_same_step():
    graph = build(3, [(0, 1), (1, 2)])
    churn = DynamicsParams(
        p_activate=1.0, p_deactivate=1.0, attach_count=1, pinned=frozenset({0, 2})
    )
    delta = step_dynamics(graph, churn, np.random.default_rng(0))
    assert delta.deactivated == [1]
    assert 1 not in delta.activated
    assert not graph.active[1]


def test_isolated_activated_node_attaches():
    graph = build(6, [(0, 1), (1, 2), (2, 3), (3, 4)], active=[1, 1, 1, 1, 1, 0])
    join = DynamicsParams(p_activate=1.0, p_deactivate=0.0, attach_count=3)
    delta = step_dynamics(graph, join, np.random.default_rng(2))
    assert delta.activated == [5]
    assert graph.degree(5) == 3
    for peer in graph.neighbors(5):
        assert 5 in graph.neighbors(peer)
    graph.validate()


def test_min_degree_top_up():
    ring = [(i, (i + 1) % 6) for i in range(6)]
    graph = build(6, ring)
    params = DynamicsParams(p_activate=0.0, p_deactivate=0.0, attach_count=1, min_degree=3)
    step_dynamics(graph, params, np.random.default_rng(4))
    assert min(graph.degree(v) for v in range(6)) >= 3
    graph.validate()


def test_validate_flags_one_sided_entry_to_active_node():
    graph = TemporalGraph(2, active=np.ones(2, dtype=bool), adjacency=[[1], []])
    with pytest.raises(GraphInvariantError):
        graph.validate()


def test_add_link_rejects_duplicates_and_self_loops():
    graph = build(3, [(0, 1)])
    with pytest.raises(ValueError):
        graph.add_link(1, 0)
    with pytest.raises(ValueError):
        graph.add_link(2, 2)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_invariants_hold_under_churn(seed):
    rng = np.random.default_rng(seed)
    graph = generate_random_graph(300, 6.0, 0.8, seed=seed)
    params = DynamicsParams(p_activate=0.05, p_deactivate=0.02, attach_count=6)
    for _ in range(200):
        step_dynamics(graph, params, rng)
        graph.validate()


def test_steady_state_active_fraction():
    params = DynamicsParams(p_activate=0.01, p_deactivate=0.0025, attach_count=10)
    assert params.steady_state_active_fraction == pytest.approx(0.8)

    rng = np.random.default_rng(42)
    graph = generate_random_graph(2000, 10.0, 0.8, seed=42)
    fractions = []
    for _ in range(1000):
        step_dynamics(graph, params, rng)
        fractions.append(graph.active_count / graph.node_count)
    assert abs(np.mean(fractions) - 0.8) < 0.03


def test_mean_degree_holds_under_churn():
    params = DynamicsParams(p_activate=0.04, p_deactivate=0.01, attach_count=10)
    rng = np.random.default_rng(11)
    graph = generate_random_graph(2000, 10.0, 0.8, seed=11)
    samples = []
    for _ in range(600):
        step_dynamics(graph, params, rng)
        samples.append(graph.mean_active_degree())
    assert all(8.0 <= degree <= 12.0 for degree in samples)
    assert np.mean(samples[200:]) == pytest.approx(10.0, rel=0.1)


def test_pinned_nodes_never_leave():
    graph = generate_random_graph(100, 4.0, 1.0, seed=9)
    params = DynamicsParams(
        p_activate=0.0, p_deactivate=0.5, attach_count=4, pinned=frozenset({3, 7})
    )
    rng = np.random.default_rng(9)
    for _ in range(20):
        step_dynamics(graph, params, rng)
    assert graph.active[3] and graph.active[7]
