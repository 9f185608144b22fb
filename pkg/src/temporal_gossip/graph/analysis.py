#!/usr/bin/env python3
"""
Structural analysis of the overlay: components, diameter, shortest paths,
health tracking over time and the plain-text snapshot export.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, TextIO, Union

import networkx as nx
import numpy as np

from .temporal_graph import DynamicsParams, TemporalGraph, step_dynamics

logger = logging.getLogger(__name__)

UNREACHABLE = -1


def to_networkx(graph: TemporalGraph) -> nx.Graph:
    """Undirected view over active nodes; a link exists if either entry does"""
    view = nx.Graph()
    active = graph.active
    view.add_nodes_from(int(v) for v in graph.active_nodes())
    for u, neighbors in enumerate(graph.adjacency):
        if not active[u]:
            continue
        for v in neighbors:
            if active[v]:
                view.add_edge(u, v)
    return view


def connected_components(graph: TemporalGraph) -> int:
    view = to_networkx(graph)
    if view.number_of_nodes() == 0:
        return 0
    return nx.number_connected_components(view)


def estimate_diameter(
    graph: TemporalGraph, sample_count: int, rng: np.random.Generator
) -> int:
    """
    Max BFS eccentricity over sampled active sources. A lower bound on the true
    diameter, exact when every active node is sampled. Returns UNREACHABLE when
    a sampled source does not reach every active node.
    """
    view = to_networkx(graph)
    active_ids = graph.active_nodes()
    if active_ids.size == 0:
        return 0
    count = min(max(sample_count, 1), active_ids.size)
    sources = np.sort(rng.choice(active_ids, size=count, replace=False))
    diameter = 0
    for source in sources:
        lengths = nx.single_source_shortest_path_length(view, int(source))
        if len(lengths) < active_ids.size:
            return UNREACHABLE
        diameter = max(diameter, max(lengths.values()))
    return diameter


def bfs_distance(graph: TemporalGraph, src: int, dst: int) -> Optional[int]:
    """Hop count of a shortest active path, or None when disconnected"""
    if src == dst:
        return 0
    view = to_networkx(graph)
    if src not in view or dst not in view:
        return None
    try:
        return nx.shortest_path_length(view, src, dst)
    except nx.NetworkXNoPath:
        return None


@dataclass(frozen=True)
class HealthSample:
    """Overlay health at one sampled timestep"""

    timestep: int
    active_fraction: float
    mean_degree: float
    components: int
    diameter: int


def track_health(
    graph: TemporalGraph,
    params: DynamicsParams,
    steps: int,
    sample_every: int,
    diameter_samples: int,
    rng: np.random.Generator,
) -> List[HealthSample]:
    """Evolve the graph and sample its structure every sample_every steps"""

    def sample() -> HealthSample:
        return HealthSample(
            timestep=graph.timestep,
            active_fraction=graph.active_count / graph.node_count,
            mean_degree=graph.mean_active_degree(),
            components=connected_components(graph),
            diameter=estimate_diameter(graph, diameter_samples, rng),
        )

    samples = [sample()]
    for step in range(1, steps + 1):
        step_dynamics(graph, params, rng)
        if step % sample_every == 0:
            samples.append(sample())
            logger.info(
                f"t={graph.timestep} components={samples[-1].components} "
                f"diameter={samples[-1].diameter}"
            )
    return samples


def write_edge_list(graph: TemporalGraph, destination: Union[Path, TextIO]) -> None:
    """Header 'n=<count> t=<timestep> active=<count>' then one 'u v' per link"""
    view = to_networkx(graph)
    lines = [f"n={graph.node_count} t={graph.timestep} active={graph.active_count}"]
    lines.extend(f"{u} {v}" for u, v in sorted(tuple(sorted(e)) for e in view.edges()))
    text = "\n".join(lines) + "\n"
    if isinstance(destination, Path):
        destination.write_text(text, encoding="utf-8")
    else:
        destination.write(text)
