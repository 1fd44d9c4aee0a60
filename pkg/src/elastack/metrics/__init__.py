"""Latency histograms, CPU efficiency accounting and run reports."""

from elastack.metrics.accounting import CpuAccount
from elastack.metrics.histogram import LatencyHistogram, LatencyRecorder
from elastack.metrics.report import (
    REPORT_FILE,
    TIMELINE_COLUMNS,
    TIMELINE_FILE,
    TimelineRow,
    lookup,
    p99_or_none,
    summarize_histogram,
    summarize_recorder,
    write_report,
    write_timeline,
)

__all__ = [
    "REPORT_FILE",
    "TIMELINE_COLUMNS",
    "TIMELINE_FILE",
    "CpuAccount",
    "LatencyHistogram",
    "LatencyRecorder",
    "TimelineRow",
    "lookup",
    "p99_or_none",
    "summarize_histogram",
    "summarize_recorder",
    "write_report",
    "write_timeline",
]
