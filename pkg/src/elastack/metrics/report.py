"""Run reports: report.json and the per-period timeline.csv.

The timeline columns are fixed so external plotting scripts can rely on
them. Latency cells are empty for a period without samples.
"""

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Final, Optional

from elastack.errors import NoSamplesError
from elastack.metrics.histogram import LatencyHistogram, LatencyRecorder

REPORT_FILE: Final[str] = "report.json"
TIMELINE_FILE: Final[str] = "timeline.csv"


@dataclass
class TimelineRow:
    """One statistic period as it appears in timeline.csv.

    Attributes:
        period: Period number.
        t_start_ns: Period start.
        t_end_ns: Period end.
        offered: Requests that reached the NIC.
        load_pct: Offered rate over the reference capacity.
        stack_coroutines: K in effect during the period.
        app_coroutines: M in effect during the period.
        core_roles: Roles in effect, ``/``-separated.
        completed: Responses transmitted.
        drops: NIC drops.
        eta: CPU efficiency over the period, None when nothing ran.
        p99_all_ns: 99th percentile over every response of the period.
        p99_high_ns: Same for High requests.
        p99_low_ns: Same for Low requests.
    """

    period: int
    t_start_ns: int
    t_end_ns: int
    offered: int
    load_pct: float
    stack_coroutines: int
    app_coroutines: int
    core_roles: str
    completed: int
    drops: int
    eta: Optional[float] = None
    p99_all_ns: Optional[int] = None
    p99_high_ns: Optional[int] = None
    p99_low_ns: Optional[int] = None


TIMELINE_COLUMNS: Final[tuple[str, ...]] = tuple(TimelineRow.__dataclass_fields__)


def p99_or_none(recorder: LatencyRecorder, key: str) -> Optional[int]:
    """Get a 99th percentile, None when the key has no samples."""
    try:
        return recorder.p99(key)
    except NoSamplesError:
        return None


def summarize_histogram(hist: LatencyHistogram) -> dict[str, Any]:
    """Get the report entry of one histogram."""
    if hist.count == 0:
        return {"count": 0}
    return {
        "count": hist.count,
        "p50_ns": hist.p50(),
        "p99_ns": hist.p99(),
        "mean_ns": round(hist.mean(), 3),
        "max_ns": hist.max_ns,
        "low_sample": hist.low_sample,
    }


def summarize_recorder(recorder: LatencyRecorder) -> dict[str, dict[str, Any]]:
    """Get the report entries of every key of a recorder."""
    return {key: summarize_histogram(hist) for key, hist in sorted(recorder.histograms.items())}


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return value


def write_timeline(rows: list[TimelineRow], path: Path) -> Path:
    """Write timeline.csv.

    Args:
        rows: Periods in order.
        path: Output file.

    Returns:
        The written path.
    """
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TIMELINE_COLUMNS)
        for row in rows:
            values = asdict(row)
            writer.writerow([_cell(values[column]) for column in TIMELINE_COLUMNS])
    return path


def write_report(report: dict[str, Any], rows: list[TimelineRow], out_dir: Path) -> Path:
    """Write report.json and timeline.csv into a directory.

    Keys are sorted so that identical runs give byte-identical files.

    Args:
        report: Report content.
        rows: Timeline periods.
        out_dir: Output directory, created if missing.

    Returns:
        Path of report.json.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / REPORT_FILE
    with open(report_path, "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    write_timeline(rows, out_dir / TIMELINE_FILE)
    return report_path


def lookup(report: dict[str, Any], path: str) -> Any:
    """Resolve a dotted path such as ``latency.priority.high.p99_ns``.

    Raises:
        KeyError: If a segment does not exist.
    """
    node: Any = report
    for part in path.split("."):
        if isinstance(node, list):
            node = node[int(part)]
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise KeyError(path)
    return node
