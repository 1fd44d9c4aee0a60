"""Fixed-bucket latency histograms.

Buckets are 1 us wide up to 1 ms, then each power of two is split into
64 sub-buckets. Percentiles use the nearest-rank definition and report
the lower edge of the bucket holding the ranked sample, clamped to the
observed range, so values on a 1 us grid below 1 ms come back exactly.
"""

import math
from typing import Final, Optional

import numpy as np

from elastack.constants import (
    HISTOGRAM_LINEAR_LIMIT_NS,
    HISTOGRAM_LINEAR_STEP_NS,
    HISTOGRAM_LOG_SUB_BUCKETS,
    MIN_P99_SAMPLES,
)
from elastack.errors import NoSamplesError

LINEAR_BUCKETS: Final[int] = HISTOGRAM_LINEAR_LIMIT_NS // HISTOGRAM_LINEAR_STEP_NS
# Doublings above the linear range (1 ms * 2^40 is far beyond any run)
LOG_OCTAVES: Final[int] = 40
NUM_BUCKETS: Final[int] = LINEAR_BUCKETS + LOG_OCTAVES * HISTOGRAM_LOG_SUB_BUCKETS


def bucket_index(value_ns: int) -> int:
    """Get the bucket of a latency.

    Args:
        value_ns: Latency, >= 0.

    Returns:
        Bucket index.
    """
    if value_ns < HISTOGRAM_LINEAR_LIMIT_NS:
        return value_ns // HISTOGRAM_LINEAR_STEP_NS
    octave = (value_ns // HISTOGRAM_LINEAR_LIMIT_NS).bit_length() - 1
    octave = min(octave, LOG_OCTAVES - 1)
    base = HISTOGRAM_LINEAR_LIMIT_NS << octave
    sub = min((value_ns - base) * HISTOGRAM_LOG_SUB_BUCKETS // base, HISTOGRAM_LOG_SUB_BUCKETS - 1)
    return LINEAR_BUCKETS + octave * HISTOGRAM_LOG_SUB_BUCKETS + sub


def bucket_lower(index: int) -> int:
    """Get the lowest latency a bucket holds."""
    if index < LINEAR_BUCKETS:
        return index * HISTOGRAM_LINEAR_STEP_NS
    octave, sub = divmod(index - LINEAR_BUCKETS, HISTOGRAM_LOG_SUB_BUCKETS)
    base = HISTOGRAM_LINEAR_LIMIT_NS << octave
    return base + base * sub // HISTOGRAM_LOG_SUB_BUCKETS


def bucket_width(index: int) -> int:
    """Get the width of a bucket."""
    if index < LINEAR_BUCKETS:
        return HISTOGRAM_LINEAR_STEP_NS
    octave = (index - LINEAR_BUCKETS) // HISTOGRAM_LOG_SUB_BUCKETS
    return max(1, (HISTOGRAM_LINEAR_LIMIT_NS << octave) // HISTOGRAM_LOG_SUB_BUCKETS)


class LatencyHistogram:
    """Bucketed latency counts of one request class.

    Example:
        >>> hist = LatencyHistogram()
        >>> for us in range(1, 101):
        ...     hist.record(us * 1000)
        >>> hist.p99()
        99000
    """

    def __init__(self) -> None:
        """Initialize an empty histogram."""
        self.counts = np.zeros(NUM_BUCKETS, dtype=np.int64)
        self.count = 0
        self.total_ns = 0
        self.min_ns: Optional[int] = None
        self.max_ns: Optional[int] = None

    def record(self, value_ns: int) -> None:
        """Add one latency sample.

        Raises:
            ValueError: If the value is negative.
        """
        if value_ns < 0:
            raise ValueError(f"Latency must be >= 0, got {value_ns}")
        self.counts[bucket_index(value_ns)] += 1
        self.count += 1
        self.total_ns += value_ns
        self.min_ns = value_ns if self.min_ns is None else min(self.min_ns, value_ns)
        self.max_ns = value_ns if self.max_ns is None else max(self.max_ns, value_ns)

    def merge(self, other: "LatencyHistogram") -> None:
        """Add every sample of another histogram."""
        if other.count == 0:
            return
        self.counts += other.counts
        self.count += other.count
        self.total_ns += other.total_ns
        self.min_ns = other.min_ns if self.min_ns is None else min(self.min_ns, other.min_ns)
        self.max_ns = other.max_ns if self.max_ns is None else max(self.max_ns, other.max_ns)

    @property
    def low_sample(self) -> bool:
        """Too few samples for a meaningful 99th percentile."""
        return self.count < MIN_P99_SAMPLES

    def percentile(self, q: float) -> int:
        """Get a nearest-rank percentile.

        Args:
            q: Percentile in (0, 100].

        Returns:
            Latency in ns.

        Raises:
            NoSamplesError: If the histogram is empty.
            ValueError: If q is out of range.
        """
        if not 0 < q <= 100:
            raise ValueError(f"q must be in (0, 100], got {q}")
        if self.count == 0:
            raise NoSamplesError("No samples recorded")
        rank = max(1, math.ceil(q / 100 * self.count))
        cumulative = np.cumsum(self.counts)
        index = int(np.searchsorted(cumulative, rank, side="left"))
        return min(max(bucket_lower(index), self.min_ns), self.max_ns)

    def p99(self) -> int:
        """Get the nearest-rank 99th percentile."""
        return self.percentile(99)

    def p50(self) -> int:
        """Get the nearest-rank median."""
        return self.percentile(50)

    def mean(self) -> float:
        """Get the mean latency.

        Raises:
            NoSamplesError: If the histogram is empty.
        """
        if self.count == 0:
            raise NoSamplesError("No samples recorded")
        return self.total_ns / self.count


class LatencyRecorder:
    """Histograms per request class plus one over all classes."""

    ALL: Final[str] = "all"

    def __init__(self) -> None:
        """Initialize with an empty all-class histogram."""
        self.histograms: dict[str, LatencyHistogram] = {self.ALL: LatencyHistogram()}

    def record(self, request_class: str, latency_ns: int) -> None:
        """Add a sample to its class and to the all-class histogram."""
        hist = self.histograms.get(request_class)
        if hist is None:
            hist = self.histograms[request_class] = LatencyHistogram()
        hist.record(latency_ns)
        self.histograms[self.ALL].record(latency_ns)

    def p99(self, request_class: str = ALL) -> int:
        """Get the 99th percentile of a class.

        Raises:
            NoSamplesError: If the class has no samples.
        """
        hist = self.histograms.get(request_class)
        if hist is None or hist.count == 0:
            raise NoSamplesError(f"No samples for class {request_class!r}")
        return hist.p99()

    def count(self, request_class: str = ALL) -> int:
        """Get the number of samples of a class."""
        hist = self.histograms.get(request_class)
        return hist.count if hist is not None else 0
