#!/usr/bin/env python3
"""
Test Metrics
Aggregation, merge consistency and the broadcast ratios
"""

import pytest

from temporal_gossip.metrics import (
    AggregateMetrics,
    MetricsError,
    aggregate,
    message_fraction,
    time_overhead,
)
from temporal_gossip.models import EpochRecord

RECORDS = [
    EpochRecord(success=True, messages_sent=10, delay=2, lost_to_churn=1, delivered=7),
    EpochRecord(success=False, messages_sent=5, delivered=4),
    EpochRecord(
        success=True, messages_sent=15, delay=4, failsafe_triggers=2, delivered=12
    ),
    EpochRecord(success=True, messages_sent=30, delay=3, degree_queries=12),
]


def test_aggregate_example():
    metrics = aggregate(RECORDS[:3])
    assert metrics.epochs == 3
    assert metrics.successes == 2
    assert metrics.success_rate == pytest.approx(2 / 3)
    assert metrics.avg_messages == pytest.approx(10.0)
    assert metrics.avg_delay == pytest.approx(3.0)
    assert metrics.lost_to_churn == 1
    assert metrics.failsafe_triggers == 2
    assert metrics.delivered == 23
    # pending envelopes are not part of the loss denominator
    assert metrics.loss_rate == pytest.approx(1 / 24)


def test_empty_aggregate():
    metrics = aggregate([])
    assert metrics.epochs == 0
    assert metrics.success_rate == 0.0
    assert metrics.avg_delay is None
    assert metrics.success_stderr is None


def test_all_failures_have_no_delay():
    metrics = aggregate([EpochRecord(success=False, messages_sent=3)] * 4)
    assert metrics.success_rate == 0.0
    assert metrics.avg_delay is None
    assert metrics.avg_messages == 3.0


@pytest.mark.parametrize("split", range(len(RECORDS) + 1))
def test_merge_equals_aggregate_of_concatenation(split):
    merged = aggregate(RECORDS[:split]).merge(aggregate(RECORDS[split:]))
    assert merged == aggregate(RECORDS)


def test_success_stderr():
    metrics = AggregateMetrics(epochs=100, successes=90)
    assert metrics.success_stderr == pytest.approx(0.03)


def test_ratios_against_itself():
    metrics = aggregate(RECORDS)
    assert time_overhead(metrics, metrics) == pytest.approx(1.0)
    assert message_fraction(metrics, metrics) == pytest.approx(1.0)


def test_ratios():
    baseline = AggregateMetrics(epochs=10, successes=10, messages_total=200, delay_total=20)
    protocol = AggregateMetrics(epochs=10, successes=10, messages_total=112, delay_total=24)
    assert message_fraction(protocol, baseline) == pytest.approx(0.56)
    assert time_overhead(protocol, baseline) == pytest.approx(1.2)


def test_undefined_ratios_raise():
    silent = AggregateMetrics(epochs=10)
    good = aggregate(RECORDS)
    with pytest.raises(MetricsError):
        message_fraction(good, silent)
    with pytest.raises(MetricsError):
        time_overhead(good, silent)
    with pytest.raises(MetricsError):
        time_overhead(silent, good)


def test_report_block_mentions_every_metric():
    block = aggregate(RECORDS).report_block()
    labels = ("success rate", "avg messages", "avg delay", "lost to churn", "degenerate")
    for label in labels:
        assert label in block


def test_degenerate_and_pending_totals():
    metrics = aggregate(
        [
            EpochRecord(success=False, messages_sent=0, degenerate=True),
            EpochRecord(success=True, messages_sent=9, delay=2, delivered=5, pending=4),
        ]
    )
    assert metrics.degenerate_epochs == 1
    assert metrics.pending == 4
    assert metrics.messages_total == metrics.delivered + metrics.lost_to_churn + metrics.pending
