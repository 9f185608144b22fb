#!/usr/bin/env python3
"""
Overlay generators: uniform G(n, m) over the active nodes and the hub-based
hierarchical variant. Both are deterministic given the seed.
"""

import logging
from typing import Iterable, Sequence, Tuple

import networkx as nx
import numpy as np

from .temporal_graph import TemporalGraph

logger = logging.getLogger(__name__)


class GraphGenerationError(ValueError):
    """Generator inputs cannot produce the requested graph"""


def _max_links(count: int) -> int:
    return count * (count - 1) // 2


def _choose_active(
    n: int, active_fraction: float, rng: np.random.Generator
) -> np.ndarray:
    if n < 2:
        raise GraphGenerationError(f"need at least 2 nodes, got {n}")
    if not 0.0 < active_fraction <= 1.0:
        raise GraphGenerationError(
            f"active_fraction must be in (0, 1], got {active_fraction}"
        )
    n_active = int(round(n * active_fraction))
    if n_active < 2:
        raise GraphGenerationError(f"only {n_active} active nodes requested")
    return np.sort(rng.choice(n, size=n_active, replace=False))


def _place_uniform_links(
    graph: TemporalGraph,
    members: Sequence[int],
    link_count: int,
    rng: np.random.Generator,
) -> None:
    """Place link_count distinct uniform links among members via G(n, m)"""
    if link_count <= 0:
        return
    sample = nx.gnm_random_graph(
        len(members), link_count, seed=int(rng.integers(2**31 - 1))
    )
    for a, b in sample.edges():
        graph.add_link(int(members[a]), int(members[b]))


def _finalise(graph: TemporalGraph, active_ids: Iterable[int]) -> TemporalGraph:
    graph.active[np.asarray(list(active_ids), dtype=np.int64)] = True
    for neighbors in graph.adjacency:
        neighbors.sort()
    return graph


def generate_random_graph(
    n: int, avg_degree: float, active_fraction: float, seed: int
) -> TemporalGraph:
    """
    Uniform random overlay: exactly round(n * active_fraction) active nodes and
    round(n_active * avg_degree / 2) distinct undirected links among them.
    """
    rng = np.random.default_rng(seed)
    active_ids = _choose_active(n, active_fraction, rng)
    n_active = active_ids.size
    if avg_degree <= 0:
        raise GraphGenerationError(f"avg_degree must be positive, got {avg_degree}")
    if avg_degree > n_active - 1:
        raise GraphGenerationError(
            f"avg_degree {avg_degree} impossible with {n_active} active nodes"
        )
    link_count = min(int(round(n_active * avg_degree / 2)), _max_links(n_active))

    graph = TemporalGraph(n)
    _place_uniform_links(graph, [int(v) for v in active_ids], link_count, rng)
    _finalise(graph, active_ids)
    logger.info(
        f"✅ Random overlay: {n_active}/{n} active, {link_count} links "
        f"({2 * link_count} entries)"
    )
    return graph


def generate_hierarchical_graph(
    n: int,
    hub_count: int,
    hub_degree_range: Tuple[int, int],
    total_directed_entries: int,
    active_fraction: float,
    seed: int,
) -> TemporalGraph:
    """
    Hub overlay: hub_count active nodes receive a uniform degree in
    hub_degree_range through links to distinct non-hub active nodes; the rest of
    the entry budget is spent on uniform non-hub links.
    """
    rng = np.random.default_rng(seed)
    active_ids = _choose_active(n, active_fraction, rng)
    n_active = active_ids.size
    low, high = hub_degree_range
    if hub_count < 0 or hub_count >= n_active:
        raise GraphGenerationError(
            f"hub_count {hub_count} must be in [0, {n_active - 1}]"
        )
    if low < 1 or low > high:
        raise GraphGenerationError(f"invalid hub degree range [{low}, {high}]")
    if total_directed_entries < 0:
        raise GraphGenerationError("total_directed_entries must be nonnegative")

    hubs = np.sort(rng.choice(active_ids, size=hub_count, replace=False))
    hub_set = set(int(h) for h in hubs)
    plain = [int(v) for v in active_ids if int(v) not in hub_set]
    if hub_count and high > len(plain):
        raise GraphGenerationError(
            f"hub degree {high} exceeds the {len(plain)} non-hub nodes"
        )

    hub_degrees = rng.integers(low, high + 1, size=hub_count)
    hub_links = int(hub_degrees.sum())
    if 2 * hub_links > total_directed_entries:
        raise GraphGenerationError(
            f"hubs need {2 * hub_links} entries, budget is {total_directed_entries}"
        )
    rest = total_directed_entries // 2 - hub_links
    if rest > _max_links(len(plain)):
        raise GraphGenerationError(
            f"{rest} non-hub links do not fit among {len(plain)} nodes"
        )

    graph = TemporalGraph(n, hubs=hub_set)
    plain_array = np.asarray(plain, dtype=np.int64)
    for hub, degree in zip(hubs, hub_degrees):
        for peer in rng.choice(plain_array, size=int(degree), replace=False):
            graph.add_link(int(hub), int(peer))
    _place_uniform_links(graph, plain, rest, rng)
    _finalise(graph, active_ids)

    non_hub_mean = (
        sum(graph.degree(v) for v in plain) / len(plain) if plain else 0.0
    )
    logger.info(
        f"✅ Hierarchical overlay: {hub_count} hubs, {graph.directed_entry_count()} "
        f"entries, non-hub mean degree {non_hub_mean:.2f}"
    )
    return graph
