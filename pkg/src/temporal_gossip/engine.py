#!/usr/bin/env python3
"""
Simulation Engine
Time-stepped message dissemination over the temporal overlay. Every hop takes
exactly one timestep; graph dynamics run at the start of each step, before
deliveries. An envelope is lost when its receiver left during the step it was
sent in, i.e. it travelled over a stale entry. A receiver leaving in the
delivery step still takes the copy but forwards nothing.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, DefaultDict, Dict, List, Optional, Set, Tuple, Union

import numpy as np

from .config import settings
from .experiment_config import ExperimentConfig
from .graph import (
    DynamicsDelta,
    DynamicsParams,
    TemporalGraph,
    generate_hierarchical_graph,
    generate_random_graph,
    step_dynamics,
)
from .metrics import AggregateMetrics, aggregate
from .models import (
    EpochRecord,
    ForwardDecision,
    MessageEnvelope,
    NodeProtocolState,
    ProtocolSpec,
)
from .protocols import failsafe_due, forward_targets, origination_targets
from .schemas import Phase, Topology
from .seeding import spawn_streams

logger = logging.getLogger(__name__)

RecordSink = Callable[[int, EpochRecord], None]


@dataclass
class SimCounters:
    messages_sent: int = 0
    degree_queries: int = 0
    failsafe_triggers: int = 0
    lost_to_churn: int = 0
    delivered: int = 0


@dataclass
class StepOutcome:
    """What happened during one advance_timestep call"""

    dynamics: DynamicsDelta
    first_receipts: List[MessageEnvelope] = field(default_factory=list)
    duplicates: List[MessageEnvelope] = field(default_factory=list)
    losses: List[MessageEnvelope] = field(default_factory=list)
    failsafe_nodes: List[int] = field(default_factory=list)


@dataclass
class EpochStreams:
    """Random streams consumed by one epoch"""

    dynamics: np.random.Generator
    epochs: np.random.Generator
    protocol: np.random.Generator

    @classmethod
    def single(cls, rng: np.random.Generator) -> "EpochStreams":
        return cls(dynamics=rng, epochs=rng, protocol=rng)


@dataclass
class SimState:
    """Graph plus the epoch-scoped dissemination state"""

    graph: TemporalGraph
    ttl: int = 20
    in_flight: DefaultDict[int, List[MessageEnvelope]] = field(
        default_factory=lambda: defaultdict(list)
    )
    node_state: Dict[int, NodeProtocolState] = field(default_factory=dict)
    counters: SimCounters = field(default_factory=SimCounters)
    # nodes holding an armed fail-safe timer
    armed: Set[int] = field(default_factory=set)
    # msg_id -> (origin, target)
    messages: Dict[int, Tuple[int, int]] = field(default_factory=dict)

    def state_of(self, node: int) -> NodeProtocolState:
        state = self.node_state.get(node)
        if state is None:
            state = self.node_state[node] = NodeProtocolState()
        return state

    @property
    def pending(self) -> int:
        return sum(len(batch) for batch in self.in_flight.values())

    def is_quiescent(self) -> bool:
        return self.pending == 0 and not self.armed

    def send(
        self,
        sender: int,
        msg_id: int,
        decision: ForwardDecision,
        ttl_remaining: int,
        hops: int,
    ) -> None:
        """Enqueue one envelope per target, due at the next timestep"""
        origin, target = self.messages[msg_id]
        deliver_at = self.graph.timestep + 1
        batch = self.in_flight[deliver_at]
        for receiver in decision.targets:
            batch.append(
                MessageEnvelope(
                    msg_id=msg_id,
                    origin=origin,
                    target=target,
                    phase=decision.phase,
                    stem_hops_remaining=decision.stem_hops_remaining,
                    ttl_remaining=ttl_remaining,
                    sender=sender,
                    receiver=receiver,
                    deliver_at=deliver_at,
                    hops=hops,
                )
            )
        self.counters.messages_sent += len(decision.targets)
        self.counters.degree_queries += decision.degree_queries

    def originate(
        self,
        spec: ProtocolSpec,
        origin: int,
        target: int,
        msg_id: int,
        rng: np.random.Generator,
    ) -> ForwardDecision:
        self.messages[msg_id] = (origin, target)
        state = self.state_of(origin)
        state.seen.add(msg_id)
        decision = origination_targets(spec, origin, self.graph, rng)
        if decision.phase is Phase.FLUFF:
            state.fluff_seen.add(msg_id)
        elif spec.failsafe_active and decision.targets:
            state.stem_relayed[msg_id] = self.graph.timestep
            self.armed.add(origin)
        self.send(origin, msg_id, decision, ttl_remaining=self.ttl - 1, hops=1)
        return decision


def _run_failsafes(
    sim: SimState, spec: ProtocolSpec, now: int, outcome: StepOutcome
) -> None:
    timeout = spec.resolved_failsafe_timeout
    graph = sim.graph
    for node in sorted(sim.armed):
        state = sim.node_state[node]
        for msg_id in list(state.stem_relayed):
            if msg_id in state.fluff_seen:
                del state.stem_relayed[msg_id]
                continue
            if not graph.active[node] or not failsafe_due(state, msg_id, now, timeout):
                continue
            del state.stem_relayed[msg_id]
            state.fluff_seen.add(msg_id)
            sim.counters.failsafe_triggers += 1
            outcome.failsafe_nodes.append(node)
            sim.send(
                node,
                msg_id,
                ForwardDecision(targets=list(graph.neighbors(node))),
                ttl_remaining=sim.ttl - 1,
                hops=1,
            )
        if not state.stem_relayed:
            sim.armed.discard(node)


def advance_timestep(
    sim: SimState,
    spec: ProtocolSpec,
    dyn: DynamicsParams,
    rng: np.random.Generator,
    protocol_rng: Optional[np.random.Generator] = None,
) -> StepOutcome:
    """
    One simulation step: dynamics, deliveries due now, forwarding of first
    receipts, fail-safe checks. The graph clock advances inside step_dynamics.
    """
    protocol_rng = protocol_rng if protocol_rng is not None else rng
    graph = sim.graph
    due = sim.in_flight.pop(graph.timestep + 1, [])
    # receiver liveness at send time; departures there left only stale entries
    reachable = [bool(graph.active[envelope.receiver]) for envelope in due]
    outcome = StepOutcome(dynamics=step_dynamics(graph, dyn, rng))
    if settings.validate_graph:
        graph.validate()
    now = graph.timestep

    for envelope, alive in zip(due, reachable):
        receiver = envelope.receiver
        if not alive:
            sim.counters.lost_to_churn += 1
            outcome.losses.append(envelope)
            continue
        sim.counters.delivered += 1
        state = sim.state_of(receiver)
        if envelope.phase is Phase.FLUFF:
            state.fluff_seen.add(envelope.msg_id)
        if envelope.msg_id in state.seen:
            outcome.duplicates.append(envelope)
            continue
        state.seen.add(envelope.msg_id)
        outcome.first_receipts.append(envelope)
        if envelope.ttl_remaining <= 0 or not graph.active[receiver]:
            continue
        decision = forward_targets(spec, receiver, envelope, graph, state, protocol_rng)
        if envelope.msg_id in state.stem_relayed:
            sim.armed.add(receiver)
        sim.send(
            receiver,
            envelope.msg_id,
            decision,
            ttl_remaining=envelope.ttl_remaining - 1,
            hops=envelope.hops + 1,
        )

    if spec.failsafe_active and sim.armed:
        _run_failsafes(sim, spec, now, outcome)
    return outcome


def run_epoch(
    graph: TemporalGraph,
    spec: ProtocolSpec,
    ttl: int,
    max_steps: int,
    dyn: DynamicsParams,
    rng: Union[np.random.Generator, EpochStreams],
    msg_id: int = 0,
) -> EpochRecord:
    """
    One communication attempt: a uniform applicant originates a message and
    the epoch runs until a uniform holder receives it, max_steps elapse, or
    nothing is left in flight. Applicant and holder stay active throughout.
    """
    if ttl < 1:
        raise ValueError(f"ttl must be >= 1, got {ttl}")
    if max_steps < ttl:
        raise ValueError(f"max_steps ({max_steps}) must be >= ttl ({ttl})")
    streams = rng if isinstance(rng, EpochStreams) else EpochStreams.single(rng)

    active_ids = graph.active_nodes()
    if active_ids.size < 2:
        logger.warning(f"Degenerate epoch at t={graph.timestep}: <2 active nodes")
        step_dynamics(graph, dyn, streams.dynamics)
        return EpochRecord(success=False, messages_sent=0, degenerate=True)

    applicant, holder = (
        int(v) for v in streams.epochs.choice(active_ids, size=2, replace=False)
    )
    epoch_dyn = dyn.with_pinned((applicant, holder))
    sim = SimState(graph=graph, ttl=ttl)
    started = graph.timestep
    sim.originate(spec, applicant, holder, msg_id, streams.protocol)

    delay: Optional[int] = None
    while graph.timestep - started < max_steps and not sim.is_quiescent():
        outcome = advance_timestep(
            sim, spec, epoch_dyn, streams.dynamics, streams.protocol
        )
        if any(env.receiver == holder for env in outcome.first_receipts):
            delay = graph.timestep - started
            break

    counters = sim.counters
    return EpochRecord(
        success=delay is not None,
        messages_sent=counters.messages_sent,
        delay=delay,
        lost_to_churn=counters.lost_to_churn,
        failsafe_triggers=counters.failsafe_triggers,
        degree_queries=counters.degree_queries,
        delivered=counters.delivered,
        pending=sim.pending,
        applicant=applicant,
        holder=holder,
    )


def build_graph(config: ExperimentConfig, rng: np.random.Generator) -> TemporalGraph:
    seed = int(rng.integers(2**63 - 1))
    if config.topology is Topology.HIERARCHICAL:
        return generate_hierarchical_graph(
            config.n,
            config.hub_count,
            (config.hub_degree_min, config.hub_degree_max),
            config.resolved_total_entries,
            config.active_fraction,
            seed,
        )
    return generate_random_graph(
        config.n, config.avg_degree, config.active_fraction, seed
    )


def run_experiment(
    config: ExperimentConfig, record_sink: Optional[RecordSink] = None
) -> AggregateMetrics:
    """
    Run config.epochs sequential epochs over one persistently evolving graph.
    The seed fixes everything: generation, churn, endpoint draws and coins.
    """
    graph_rng, dynamics_rng, epoch_rng, protocol_rng = spawn_streams(config.seed)
    graph = build_graph(config, graph_rng)
    dyn = config.dynamics_params(graph.hubs)
    streams = EpochStreams(dynamics=dynamics_rng, epochs=epoch_rng, protocol=protocol_rng)
    spec = config.protocol
    max_steps = config.resolved_max_steps

    for _ in range(config.warmup_steps):
        step_dynamics(graph, dyn, dynamics_rng)

    logger.info(
        f"🚀 {spec.kind.value} {spec.parameter_label} on {config.topology.value} "
        f"overlay: {config.epochs} epochs, ttl={config.ttl}, max_steps={max_steps}, "
        f"seed={config.seed}"
    )
    records: List[EpochRecord] = []
    for index in range(config.epochs):
        record = run_epoch(graph, spec, config.ttl, max_steps, dyn, streams, msg_id=index)
        records.append(record)
        if record_sink is not None:
            record_sink(index, record)
        if (index + 1) % settings.progress_every == 0:
            done = aggregate(records)
            logger.info(
                f"epoch {index + 1}/{config.epochs}: success={done.success_rate:.4f} "
                f"messages={done.avg_messages:.1f}"
            )

    metrics = aggregate(records)
    logger.info(
        f"✅ Finished: success={metrics.success_rate:.4f} "
        f"messages={metrics.avg_messages:.1f} delay={metrics.avg_delay}"
    )
    return metrics
