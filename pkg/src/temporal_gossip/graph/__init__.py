from .analysis import (
    UNREACHABLE,
    HealthSample,
    bfs_distance,
    connected_components,
    estimate_diameter,
    to_networkx,
    track_health,
    write_edge_list,
)
from .generators import (
    GraphGenerationError,
    generate_hierarchical_graph,
    generate_random_graph,
)
from .temporal_graph import (
    DynamicsDelta,
    DynamicsParams,
    GraphInvariantError,
    TemporalGraph,
    step_dynamics,
)

__all__ = [
    "UNREACHABLE",
    "DynamicsDelta",
    "DynamicsParams",
    "GraphGenerationError",
    "GraphInvariantError",
    "HealthSample",
    "TemporalGraph",
    "bfs_distance",
    "connected_components",
    "estimate_diameter",
    "generate_hierarchical_graph",
    "generate_random_graph",
    "step_dynamics",
    "to_networkx",
    "track_health",
    "write_edge_list",
]
