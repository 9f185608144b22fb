#!/usr/bin/env python3
"""
Metrics
Aggregation of epoch records into success rate, message volume, delay and the
ratios against a pure broadcast baseline.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .models import EpochRecord


class MetricsError(ValueError):
    """A ratio is undefined for the given aggregates"""


@dataclass(frozen=True)
class AggregateMetrics:
    """
    Totals over a set of epochs. Means are derived, so two aggregates of
    disjoint record sets merge exactly.
    """

    epochs: int = 0
    successes: int = 0
    messages_total: int = 0
    delay_total: int = 0
    delivered: int = 0
    lost_to_churn: int = 0
    pending: int = 0
    failsafe_triggers: int = 0
    degree_queries: int = 0
    degenerate_epochs: int = 0

    @property
    def success_rate(self) -> float:
        return self.successes / self.epochs if self.epochs else 0.0

    @property
    def avg_messages(self) -> float:
        return self.messages_total / self.epochs if self.epochs else 0.0

    @property
    def avg_delay(self) -> Optional[float]:
        return self.delay_total / self.successes if self.successes else None

    @property
    def loss_rate(self) -> float:
        """Fraction of resolved envelopes (delivered or dropped) lost to churn"""
        resolved = self.delivered + self.lost_to_churn
        return self.lost_to_churn / resolved if resolved else 0.0

    @property
    def success_stderr(self) -> Optional[float]:
        """Binomial standard error of success_rate"""
        if not self.epochs:
            return None
        rate = self.success_rate
        return math.sqrt(rate * (1.0 - rate) / self.epochs)

    def merge(self, other: "AggregateMetrics") -> "AggregateMetrics":
        return AggregateMetrics(
            epochs=self.epochs + other.epochs,
            successes=self.successes + other.successes,
            messages_total=self.messages_total + other.messages_total,
            delay_total=self.delay_total + other.delay_total,
            delivered=self.delivered + other.delivered,
            lost_to_churn=self.lost_to_churn + other.lost_to_churn,
            pending=self.pending + other.pending,
            failsafe_triggers=self.failsafe_triggers + other.failsafe_triggers,
            degree_queries=self.degree_queries + other.degree_queries,
            degenerate_epochs=self.degenerate_epochs + other.degenerate_epochs,
        )

    def report_block(self) -> str:
        """Human-readable summary"""
        delay = f"{self.avg_delay:.4f}" if self.avg_delay is not None else "n/a"
        stderr = self.success_stderr
        lines = [
            f"epochs              {self.epochs}",
            f"successes           {self.successes}",
            f"success rate        {self.success_rate:.4f}"
            + (f" (± {stderr:.4f})" if stderr is not None else ""),
            f"avg messages        {self.avg_messages:.2f}",
            f"avg delay           {delay}",
            f"delivered           {self.delivered}",
            f"lost to churn       {self.lost_to_churn} ({self.loss_rate:.5f})",
            f"in flight at end    {self.pending}",
            f"fail-safe triggers  {self.failsafe_triggers}",
            f"degree queries      {self.degree_queries}",
            f"degenerate epochs   {self.degenerate_epochs}",
        ]
        return "\n".join(lines)


def aggregate(records: Iterable[EpochRecord]) -> AggregateMetrics:
    totals = AggregateMetrics()
    for record in records:
        totals = totals.merge(
            AggregateMetrics(
                epochs=1,
                successes=int(record.success),
                messages_total=record.messages_sent,
                delay_total=(record.delay or 0) if record.success else 0,
                delivered=record.delivered,
                lost_to_churn=record.lost_to_churn,
                pending=record.pending,
                failsafe_triggers=record.failsafe_triggers,
                degree_queries=record.degree_queries,
                degenerate_epochs=int(record.degenerate),
            )
        )
    return totals


def time_overhead(
    protocol: AggregateMetrics, broadcast_baseline: AggregateMetrics
) -> float:
    """Ratio of the protocol's average delay to the broadcast average delay"""
    if protocol.avg_delay is None:
        raise MetricsError("protocol has no successful epochs")
    if not broadcast_baseline.avg_delay:
        raise MetricsError("baseline delay is undefined")
    return protocol.avg_delay / broadcast_baseline.avg_delay


def message_fraction(
    protocol: AggregateMetrics, broadcast_baseline: AggregateMetrics
) -> float:
    """Ratio of the protocol's average messages to the broadcast average"""
    if broadcast_baseline.avg_messages <= 0:
        raise MetricsError("baseline sent no messages")
    return protocol.avg_messages / broadcast_baseline.avg_messages
