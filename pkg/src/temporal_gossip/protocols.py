#!/usr/bin/env python3
"""
Dissemination Protocols
Forwarding decisions for every supported gossip algorithm, including the
Dandelion stem/fluff split and the Dandelion++ role and fail-safe machinery.

Functions here only decide; the engine owns envelopes, counters and time.
Every random draw comes from the generator passed in.
"""

import math
from typing import List, Optional, Sequence

import numpy as np

from .graph.temporal_graph import TemporalGraph
from .models import ForwardDecision, MessageEnvelope, NodeProtocolState, ProtocolSpec
from .schemas import DDFMode, FluffKind, Phase, ProtocolKind, Role
from .seeding import stable_hash

_TWO_32 = float(1 << 32)


def ddf_probability(degree: int, x: float, mode: DDFMode) -> float:
    """
    Forwarding probability towards a neighbour of the given degree:
    1 below degree 3, else min(1, 1/log_degree(x)) or min(1, 1/degree**x).
    """
    if degree < 0:
        raise ValueError(f"degree must be nonnegative, got {degree}")
    if degree < 3:
        return 1.0
    if mode is DDFMode.LOG:
        if x <= 1:
            raise ValueError(f"Log mode requires x > 1, got {x}")
        return min(1.0, math.log(degree) / math.log(x))
    return min(1.0, float(degree) ** (-x))


def dandelionpp_role(node_id: int, role_epoch: int, relayer_fraction: float) -> Role:
    """Relayer iff (stable_hash(node_id, role_epoch) mod 2**32) / 2**32 < fraction"""
    bucket = (stable_hash(node_id, role_epoch) & 0xFFFFFFFF) / _TWO_32
    return Role.RELAYER if bucket < relayer_fraction else Role.DIFFUSER


def failsafe_due(
    state: NodeProtocolState, msg_id: int, now: int, timeout: int
) -> bool:
    """True when a stem relay of msg_id timed out without a fluff copy coming back"""
    relayed_at = state.stem_relayed.get(msg_id)
    if relayed_at is None or msg_id in state.fluff_seen:
        return False
    return now - relayed_at >= timeout


def role_epoch_of(spec: ProtocolSpec, timestep: int) -> int:
    return timestep // spec.role_epoch_len


def _pick_one(
    neighbors: Sequence[int], sender: Optional[int], rng: np.random.Generator
) -> List[int]:
    # the forwarder is excluded unless it is the only neighbour
    candidates = [v for v in neighbors if v != sender] if len(neighbors) >= 2 else neighbors
    if not candidates:
        return []
    return [candidates[int(rng.integers(len(candidates)))]]


def _coin_flips(
    others: List[int], probability: float, rng: np.random.Generator
) -> List[int]:
    if not others:
        return []
    keep = rng.random(len(others)) < probability
    return [v for v, kept in zip(others, keep) if kept]


def _degree_dependent(
    spec: ProtocolSpec,
    others: List[int],
    graph: TemporalGraph,
    rng: np.random.Generator,
) -> ForwardDecision:
    if not others:
        return ForwardDecision(targets=[])
    probabilities = np.array(
        [ddf_probability(graph.degree(v), spec.ddf_x, spec.ddf_mode) for v in others]
    )
    keep = rng.random(len(others)) < probabilities
    return ForwardDecision(
        targets=[v for v, kept in zip(others, keep) if kept],
        degree_queries=len(others),
    )


def _fluff(
    spec: ProtocolSpec,
    others: List[int],
    graph: TemporalGraph,
    rng: np.random.Generator,
) -> ForwardDecision:
    """Fluff-phase forwarding of the anonymity protocols"""
    if spec.fluff_kind is FluffKind.FIXED_PROBABILITY:
        return ForwardDecision(targets=_coin_flips(others, spec.p / 100.0, rng))
    if spec.fluff_kind is FluffKind.DEGREE_DEPENDENT:
        return _degree_dependent(spec, others, graph, rng)
    return ForwardDecision(targets=list(others))


def origination_targets(
    spec: ProtocolSpec,
    origin: int,
    graph: TemporalGraph,
    rng: np.random.Generator,
) -> ForwardDecision:
    """
    First hop of a new message. Memoryless protocols send to every neighbour;
    Dandelion starts the stem on one neighbour; Dandelion++ depends on the
    origin's role in the current role epoch.
    """
    neighbors = list(graph.neighbors(origin))
    if not neighbors:
        return ForwardDecision(targets=[])

    if spec.kind is ProtocolKind.DANDELION:
        if spec.stem_steps == 0:
            return ForwardDecision(targets=neighbors)
        return ForwardDecision(
            targets=_pick_one(neighbors, None, rng),
            phase=Phase.STEM,
            stem_hops_remaining=spec.stem_steps - 1,
        )

    if spec.kind is ProtocolKind.DANDELION_PP:
        role = dandelionpp_role(
            origin, role_epoch_of(spec, graph.timestep), spec.relayer_fraction
        )
        if role is Role.DIFFUSER:
            return ForwardDecision(targets=neighbors)
        return ForwardDecision(
            targets=_pick_one(neighbors, None, rng),
            phase=Phase.STEM,
        )

    return ForwardDecision(targets=neighbors)


def forward_targets(
    spec: ProtocolSpec,
    node: int,
    msg: MessageEnvelope,
    graph: TemporalGraph,
    state: NodeProtocolState,
    rng: np.random.Generator,
) -> ForwardDecision:
    """
    Decide who receives msg from node. The caller filters duplicates and
    zero-TTL copies. A stem relay under an active fail-safe arms the node's
    timer in state.
    """
    neighbors = graph.neighbors(node)
    others = [v for v in neighbors if v != msg.sender]
    kind = spec.kind

    if kind is ProtocolKind.BROADCAST:
        return ForwardDecision(targets=others)

    if kind is ProtocolKind.PROBABILISTIC_BROADCAST:
        forward_all = rng.random() < spec.p / 100.0
        return ForwardDecision(targets=others if forward_all else [])

    if kind is ProtocolKind.FIXED_PROBABILITY:
        return ForwardDecision(targets=_coin_flips(others, spec.p / 100.0, rng))

    if kind is ProtocolKind.FIXED_FANOUT:
        if len(others) <= spec.fanout_n:
            return ForwardDecision(targets=others)
        picks = np.sort(rng.choice(len(others), size=spec.fanout_n, replace=False))
        return ForwardDecision(targets=[others[i] for i in picks])

    if kind is ProtocolKind.DEGREE_DEPENDENT:
        return _degree_dependent(spec, others, graph, rng)

    if msg.phase is Phase.FLUFF:
        return _fluff(spec, others, graph, rng)

    if kind is ProtocolKind.DANDELION:
        if msg.stem_hops_remaining > 0:
            decision = ForwardDecision(
                targets=_pick_one(neighbors, msg.sender, rng),
                phase=Phase.STEM,
                stem_hops_remaining=msg.stem_hops_remaining - 1,
            )
        else:
            return _fluff(spec, others, graph, rng)
    else:
        role = dandelionpp_role(
            node, role_epoch_of(spec, graph.timestep), spec.relayer_fraction
        )
        if role is Role.DIFFUSER:
            return _fluff(spec, others, graph, rng)
        decision = ForwardDecision(
            targets=_pick_one(neighbors, msg.sender, rng),
            phase=Phase.STEM,
        )

    if spec.failsafe_active and decision.targets:
        state.stem_relayed.setdefault(msg.msg_id, graph.timestep)
    return decision
