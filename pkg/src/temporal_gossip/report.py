#!/usr/bin/env python3
"""
Report emission: the result CSV (header row always present, '.' decimals,
'\\n' line endings), an aligned text table, and the per-epoch record sink.
"""

import csv
import io
import logging
import sys
from pathlib import Path
from typing import IO, List, Optional, Sequence, Union

from .harness import ExperimentResult
from .models import EpochRecord
from .schemas import ReportFormat

logger = logging.getLogger(__name__)

REPORT_COLUMNS = (
    "config_hash",
    "topology",
    "protocol",
    "param",
    "epochs",
    "success_rate",
    "avg_messages",
    "avg_delay",
    "msg_fraction_vs_broadcast",
    "time_overhead",
    "seed",
)

RECORD_COLUMNS = (
    "epoch_index",
    "success",
    "messages_sent",
    "delay",
    "lost_to_churn",
    "failsafe_triggers",
)

Destination = Union[Path, IO[str], None]


def _number(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.10g}"


def result_row(result: ExperimentResult) -> List[str]:
    config, metrics = result.config, result.metrics
    return [
        config.config_hash(),
        config.topology.value,
        config.protocol.kind.value,
        result.param,
        str(metrics.epochs),
        _number(metrics.success_rate),
        _number(metrics.avg_messages),
        _number(metrics.avg_delay),
        _number(result.msg_fraction),
        _number(result.time_overhead),
        str(config.seed),
    ]


def _csv_text(results: Sequence[ExperimentResult]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    writer.writerows(result_row(result) for result in results)
    return buffer.getvalue()


def _text_table(results: Sequence[ExperimentResult]) -> str:
    rows = [list(REPORT_COLUMNS)] + [
        [cell or "-" for cell in result_row(result)] for result in results
    ]
    widths = [max(len(row[i]) for row in rows) for i in range(len(REPORT_COLUMNS))]
    lines = [" | ".join(cell.ljust(w) for cell, w in zip(rows[0], widths)).rstrip()]
    lines.append("-+-".join("-" * w for w in widths))
    for row in rows[1:]:
        lines.append(" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render_report(results: Sequence[ExperimentResult], fmt: ReportFormat) -> str:
    if fmt is ReportFormat.TEXT:
        return _text_table(results)
    return _csv_text(results)


def emit_report(
    results: Sequence[ExperimentResult],
    fmt: ReportFormat = ReportFormat.CSV,
    destination: Destination = None,
) -> None:
    """Write the report to a path, an open stream, or stdout. OSError propagates."""
    body = render_report(results, fmt)
    if destination is None:
        sys.stdout.write(body)
        return
    if isinstance(destination, Path):
        destination.parent.mkdir(parents=True, exist_ok=True)
        with destination.open("w", encoding="utf-8", newline="") as handle:
            handle.write(body)
        logger.info(f"✅ Wrote {len(results)} rows to {destination}")
        return
    destination.write(body)


class EpochRecordWriter:
    """Per-epoch CSV sink, usable as run_experiment's record_sink"""

    def __init__(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        self.path = path
        self._handle = path.open("w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._handle, lineterminator="\n")
        self._writer.writerow(RECORD_COLUMNS)
        self.rows = 0

    def __call__(self, index: int, record: EpochRecord) -> None:
        self._writer.writerow(
            [
                index,
                int(record.success),
                record.messages_sent,
                "" if record.delay is None else record.delay,
                record.lost_to_churn,
                record.failsafe_triggers,
            ]
        )
        self.rows += 1

    def close(self) -> None:
        if not self._handle.closed:
            self._handle.close()
            logger.info(f"Wrote {self.rows} epoch records to {self.path}")

    def __enter__(self) -> "EpochRecordWriter":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()
