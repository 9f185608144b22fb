#!/usr/bin/env python3
"""
Temporal Graph
The dynamic peer-to-peer overlay: node activation states, directed adjacency
entries and the per-timestep churn process.

A deactivating node drops its own entries at once. Its former neighbours keep
their entries towards it (stale, one-sided) until the next timestep, when they
are notified and remove them.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class GraphInvariantError(AssertionError):
    """Raised by TemporalGraph.validate when the overlay is inconsistent"""


@dataclass(frozen=True)
class DynamicsParams:
    """Churn parameters for step_dynamics"""

    p_activate: float
    p_deactivate: float
    attach_count: int
    pinned: FrozenSet[int] = frozenset()
    min_degree: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_activate <= 1.0:
            raise ValueError(f"p_activate must be in [0, 1], got {self.p_activate}")
        if not 0.0 <= self.p_deactivate <= 1.0:
            raise ValueError(
                f"p_deactivate must be in [0, 1], got {self.p_deactivate}"
            )
        if self.attach_count < 1:
            raise ValueError(f"attach_count must be >= 1, got {self.attach_count}")
        if self.min_degree < 0:
            raise ValueError(f"min_degree must be >= 0, got {self.min_degree}")

    @property
    def steady_state_active_fraction(self) -> float:
        total = self.p_activate + self.p_deactivate
        return self.p_activate / total if total > 0 else float("nan")

    def with_pinned(self, extra: Iterable[int]) -> "DynamicsParams":
        return replace(self, pinned=self.pinned | frozenset(int(v) for v in extra))


@dataclass
class DynamicsDelta:
    """Everything one dynamics step changed"""

    activated: List[int] = field(default_factory=list)
    deactivated: List[int] = field(default_factory=list)
    stale_removals: List[Tuple[int, int]] = field(default_factory=list)
    attachments: List[Tuple[int, int]] = field(default_factory=list)


class TemporalGraph:
    """Evolving overlay with stale-link semantics. Single writer."""

    def __init__(
        self,
        node_count: int,
        active: Optional[np.ndarray] = None,
        adjacency: Optional[List[List[int]]] = None,
        timestep: int = 0,
        hubs: Iterable[int] = (),
    ):
        if node_count < 1:
            raise ValueError(f"node_count must be positive, got {node_count}")
        self.node_count = node_count
        self.active = (
            np.zeros(node_count, dtype=bool)
            if active is None
            else np.asarray(active, dtype=bool).copy()
        )
        self.adjacency: List[List[int]] = (
            [[] for _ in range(node_count)]
            if adjacency is None
            else [list(neighbors) for neighbors in adjacency]
        )
        self.timestep = timestep
        self.hubs: FrozenSet[int] = frozenset(int(h) for h in hubs)
        self.deactivated_at = np.full(node_count, -1, dtype=np.int64)
        # node deactivated at the previous step -> neighbours still holding it
        self._pending_notifications: Dict[int, List[int]] = {}

    # --- Queries ---

    def neighbors(self, node: int) -> List[int]:
        return self.adjacency[node]

    def degree(self, node: int) -> int:
        return len(self.adjacency[node])

    def active_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    @property
    def active_count(self) -> int:
        return int(self.active.sum())

    def directed_entry_count(self) -> int:
        return sum(len(neighbors) for neighbors in self.adjacency)

    def degrees(self) -> np.ndarray:
        return np.fromiter(
            (len(neighbors) for neighbors in self.adjacency),
            dtype=np.int64,
            count=self.node_count,
        )

    def mean_active_degree(self) -> float:
        active_ids = self.active_nodes()
        if active_ids.size == 0:
            return 0.0
        return float(self.degrees()[active_ids].mean())

    # --- Mutation ---

    def add_link(self, u: int, v: int) -> None:
        """Add the undirected link u-v as two mirrored entries"""
        if u == v:
            raise ValueError(f"self-loop on node {u}")
        if v in self.adjacency[u] or u in self.adjacency[v]:
            raise ValueError(f"link {u}-{v} already present")
        self.adjacency[u].append(v)
        self.adjacency[v].append(u)

    def _deactivate(self, node: int, delta: DynamicsDelta) -> None:
        self._pending_notifications[node] = self.adjacency[node]
        self.adjacency[node] = []
        self.active[node] = False
        self.deactivated_at[node] = self.timestep
        delta.deactivated.append(node)

    def _attach(
        self,
        node: int,
        wanted: int,
        active_ids: np.ndarray,
        rng: np.random.Generator,
        delta: DynamicsDelta,
    ) -> None:
        own = self.adjacency[node]
        available = active_ids.size - 1 - len(own)
        wanted = min(wanted, available)
        if wanted <= 0:
            return
        if 2 * wanted > available:
            excluded = set(own)
            excluded.add(node)
            candidates = [int(v) for v in active_ids if int(v) not in excluded]
            picks = rng.choice(len(candidates), size=wanted, replace=False)
            chosen = [candidates[i] for i in picks]
        else:
            chosen = []
            while len(chosen) < wanted:
                peer = int(active_ids[rng.integers(active_ids.size)])
                # duplicate or self picks are re-drawn
                if peer == node or peer in own or peer in chosen:
                    continue
                chosen.append(peer)
        for peer in chosen:
            self.add_link(node, peer)
            delta.attachments.append((node, peer))

    # --- Invariants ---

    def validate(self) -> None:
        """Check structural invariants, raising GraphInvariantError"""
        for u, neighbors in enumerate(self.adjacency):
            if not self.active[u] and neighbors:
                raise GraphInvariantError(f"inactive node {u} holds entries")
            if len(set(neighbors)) != len(neighbors):
                raise GraphInvariantError(f"duplicate entries at node {u}")
            for v in neighbors:
                if v == u:
                    raise GraphInvariantError(f"self-loop at node {u}")
                if u in self.adjacency[v]:
                    continue
                # one-sided: v must have deactivated at the current or previous step
                if self.active[v] or self.deactivated_at[v] < self.timestep - 1:
                    raise GraphInvariantError(
                        f"one-sided entry {u}->{v} without a recent deactivation"
                    )

    def __repr__(self) -> str:
        return (
            f"TemporalGraph(n={self.node_count}, t={self.timestep}, "
            f"active={self.active_count}, entries={self.directed_entry_count()})"
        )


def step_dynamics(
    graph: TemporalGraph, params: DynamicsParams, rng: np.random.Generator
) -> DynamicsDelta:
    """
    Advance the overlay by one timestep.

    Order: stale-entry removal, deactivations, activations, reattachment.
    """
    delta = DynamicsDelta()

    # 1. neighbours of nodes that deactivated last step drop their stale entries
    for gone, former in graph._pending_notifications.items():
        for owner in former:
            entries = graph.adjacency[owner]
            if gone in entries:
                entries.remove(gone)
                delta.stale_removals.append((owner, gone))
    graph._pending_notifications = {}

    # 2. deactivations
    if params.p_deactivate > 0:
        active_ids = graph.active_nodes()
        leaving = active_ids[rng.random(active_ids.size) < params.p_deactivate]
        for node in leaving:
            node = int(node)
            if node in params.pinned:
                continue
            graph._deactivate(node, delta)

    # 3. activations; a node that left this step stays off until the next one
    if params.p_activate > 0:
        inactive_ids = np.flatnonzero(
            ~graph.active & (graph.deactivated_at != graph.timestep)
        )
        joining = inactive_ids[rng.random(inactive_ids.size) < params.p_activate]
        graph.active[joining] = True
        delta.activated.extend(int(v) for v in joining)

    # 4. newly active and under-connected nodes attach to uniform active peers
    threshold = max(params.min_degree, 1)
    degrees = graph.degrees()
    needy = np.flatnonzero(graph.active & (degrees < threshold))
    if needy.size:
        active_ids = graph.active_nodes()
        for node in needy:
            node = int(node)
            current = len(graph.adjacency[node])
            wanted = params.attach_count if current == 0 else threshold - current
            if wanted > 0:
                graph._attach(node, wanted, active_ids, rng, delta)

    graph.timestep += 1
    logger.debug(
        f"t={graph.timestep}: +{len(delta.activated)} -{len(delta.deactivated)} "
        f"stale={len(delta.stale_removals)} links={len(delta.attachments)}"
    )
    return delta
