"""Global constants for the elastack simulator.

This module defines every cost, threshold and size used by the
simulated datapath. All durations are integer virtual nanoseconds so
that accounting is exact and runs are reproducible.
"""

from enum import Enum
from typing import Final

# =============================================================================
# Virtual time
# =============================================================================

NS_PER_US: Final[int] = 1_000
NS_PER_MS: Final[int] = 1_000_000
NS_PER_S: Final[int] = 1_000_000_000


# =============================================================================
# Fastcalldown thresholds and costs
# =============================================================================

# NIC receive threshold: drain NIC queues at least this often
NIC_CHECK_INTERVAL_NS: Final[int] = 200 * NS_PER_US

# TCP batch threshold, kept well under the NIC threshold
TCP_PROCESS_INTERVAL_NS: Final[int] = 50 * NS_PER_US

# Longest continuous run of a coroutine before it must yield
COROUTINE_BUDGET_NS: Final[int] = 10 * NS_PER_MS

# A fastcalldown that only reads the clock and returns
CHECK_COST_NS: Final[int] = 22

# Default distance between explicit checkpoints inside application work
DEFAULT_CHECKPOINT_INTERVAL_NS: Final[int] = 10 * NS_PER_US

# Per-request yield cost of the coroutine-mode comparison system
COROUTINE_YIELD_COST_NS: Final[int] = 6

# Implicit call sites per request (collect events, recv, send)
IMPLICIT_CALLS_PER_REQUEST: Final[int] = 3


# =============================================================================
# NIC model
# =============================================================================

NIC_QUEUE_CAPACITY: Final[int] = 4096

# RSS flow groups; one NIC queue per group by default
DEFAULT_RSS_GROUPS: Final[int] = 16
MAX_NIC_QUEUES: Final[int] = 16

# Knuth multiplicative constant (2^32 / golden ratio)
FIBONACCI_HASH_MULTIPLIER: Final[int] = 2654435769
HASH_WORD_MASK: Final[int] = 0xFFFFFFFF

EMPTY_QUEUE_CHECK_COST_NS: Final[int] = 100
NIC_BATCH_PACKETS: Final[int] = 32
NIC_BATCH_COST_NS: Final[int] = 1 * NS_PER_US

# Line-rate arrival spacing of minimum frames: (64 + 20 B preamble/IFG) at 10 Gbps
MIN_FRAME_BYTES: Final[int] = 64
FRAME_OVERHEAD_BYTES: Final[int] = 20
LINE_RATE_BPS: Final[int] = 10_000_000_000


def line_rate_spacing_ns(frame_bytes: int = MIN_FRAME_BYTES, rate_bps: int = LINE_RATE_BPS) -> int:
    """Get the arrival spacing of back-to-back frames at line rate.

    Args:
        frame_bytes: Frame size without preamble and inter-frame gap.
        rate_bps: Link speed in bits per second.

    Returns:
        Spacing in whole nanoseconds (rounded down, at least 1).
    """
    bits = (frame_bytes + FRAME_OVERHEAD_BYTES) * 8
    return max(1, bits * NS_PER_S // rate_bps)


# =============================================================================
# Driver and TCP
# =============================================================================

DRIVER_EXTRACTION_COST_NS: Final[int] = 100
TCP_EXTRACTION_COST_NS: Final[int] = 100
TCP_PACKET_COST_NS: Final[int] = 300
TCP_BATCH_PACKETS: Final[int] = 64

TCP_MSS_BYTES: Final[int] = 1460
TCP_RECEIVE_WINDOW_BYTES: Final[int] = 65_535
PRIVATE_FIELD_BYTES: Final[int] = 64

# Client-side request framing: header packet then continuation packets
REQUEST_HEADER_PACKET_BYTES: Final[int] = 1024
REQUEST_CONTINUATION_BYTES: Final[int] = 1536

# Request header: total_length (u32), class (u32), service_time_ns (u64)
REQUEST_HEADER_FORMAT: Final[str] = "<IIQ"
REQUEST_HEADER_BYTES: Final[int] = 16

DEFAULT_RESPONSE_BYTES: Final[int] = 128


# =============================================================================
# Resource manager
# =============================================================================

DEFAULT_STATISTIC_PERIOD_NS: Final[int] = 10 * NS_PER_MS
DEFAULT_REFERENCE_RPS: Final[int] = 200_000
OVERLOAD_CONSECUTIVE_PERIODS: Final[int] = 2
# A core is overloaded when its busy share exceeds this in a period
OVERLOAD_BUSY_RATIO: Final[float] = 0.95
APPS_PER_CORE: Final[int] = 2


# =============================================================================
# Metrics
# =============================================================================

HISTOGRAM_LINEAR_LIMIT_NS: Final[int] = 1 * NS_PER_MS
HISTOGRAM_LINEAR_STEP_NS: Final[int] = 1 * NS_PER_US
# Sub-buckets per power of two above the linear range
HISTOGRAM_LOG_SUB_BUCKETS: Final[int] = 64
MIN_P99_SAMPLES: Final[int] = 100


# =============================================================================
# Closed vocabularies
# =============================================================================


class Priority(str, Enum):
    """Scheduling label carried along the datapath."""

    HIGH = "high"
    LOW = "low"
    UNSET = "unset"


class PriorityClass(str, Enum):
    """Class filter for NIC queues, bindings and tasks."""

    HIGH = "high"
    LOW = "low"
    ANY = "any"
    NONE = "none"


class CoreRole(str, Enum):
    """Role a logical core plays in a resource plan."""

    IDLE = "idle"
    APP_ONLY = "app_only"
    STACK_ONLY = "stack_only"
    SHARED = "shared"


class TaskKind(str, Enum):
    """Kind of coroutine."""

    STACK = "stack"
    APP = "app"


class TaskState(str, Enum):
    """Scheduling state of a coroutine."""

    RUNNABLE = "runnable"
    RUNNING = "running"
    SUSPENDED = "suspended"


class EventKind(str, Enum):
    """Readiness notification kinds."""

    READABLE = "readable"
    WRITABLE = "writable"
    ACCEPTED = "accepted"
    CLOSED = "closed"


class FcdAction(str, Enum):
    """Actions a fastcalldown check can trigger."""

    DRAIN_NIC = "drain_nic"
    TCP_BATCH = "tcp_batch"
    RESCHEDULE = "reschedule"
    PRIORITY_YIELD = "priority_yield"
    NONE = "none"


class CallupLayer(str, Enum):
    """Layers at which an extraction callback can be registered."""

    NIC = "nic"
    DRIVER = "driver"
    TCP = "tcp"
    EVENT = "event"


class ExtractionMode(str, Enum):
    """Which extraction points a scenario enables."""

    NONE = "none"
    DRIVER = "driver"
    TCP = "tcp"
    BOTH = "both"


class ChargeKind(str, Enum):
    """Accounting category of virtual CPU time."""

    APP = "app"
    STACK = "stack"
    CHECK = "check"
    POLL = "poll"


class StepOutcome(str, Enum):
    """What a coroutine step asks of its core."""

    CONTINUE = "continue"
    YIELD = "yield"
    IDLE = "idle"


class EnqueueResult(str, Enum):
    """Outcome of offering a packet to a NIC ring."""

    ACCEPTED = "accepted"
    DROPPED = "dropped"


class Blocking(Enum):
    """Sentinel returned by non-blocking calls with nothing to deliver."""

    WOULD_BLOCK = "would_block"


WOULD_BLOCK: Final[Blocking] = Blocking.WOULD_BLOCK


# =============================================================================
# Application
# =============================================================================

APP_NAME: Final[str] = "elastack"
APP_VERSION: Final[str] = "0.1.0"
