"""Open-loop request workloads.

A workload is a population of connections, a mix of request classes and
an arrival process. Arrivals never depend on server state. Class
assignment uses exact quotas shuffled with a seeded generator, so a run
of 10 000 requests with a 0.5% class holds exactly 50 of them.
"""

import logging
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from elastack.constants import (
    FRAME_OVERHEAD_BYTES,
    LINE_RATE_BPS,
    NS_PER_S,
    REQUEST_CONTINUATION_BYTES,
    REQUEST_HEADER_PACKET_BYTES,
    Priority,
    line_rate_spacing_ns,
)
from elastack.nic.packet import Packet, RequestDescriptor
from elastack.tcp.header import encode_header

logger = logging.getLogger(__name__)

ArrivalProcess = Literal["uniform", "poisson"]


@dataclass(frozen=True)
class RequestClass:
    """One class of the request mix.

    Attributes:
        name: Class name used in reports.
        fraction: Share of all requests.
        service_time_ns: Application work per request.
        priority: Priority the request header declares.
        request_bytes: Request size, header included.
    """

    name: str
    fraction: float
    service_time_ns: int
    priority: Priority = Priority.LOW
    request_bytes: int = 64


@dataclass(frozen=True)
class BurstSpec:
    """Burst arrival mode.

    Attributes:
        bursts_per_s: Burst instants per second.
        burst_size: Requests per burst.
        spacing_ns: Gap between requests of a burst, None for line rate.
    """

    bursts_per_s: float
    burst_size: int
    spacing_ns: Optional[int] = None


@dataclass(frozen=True)
class RateStep:
    """Offered rate from ``at_ns`` on."""

    at_ns: int
    rate_rps: float


@dataclass
class WorkloadSpec:
    """Complete description of an open-loop workload.

    Attributes:
        num_connections: Flows requests are spread over (round-robin).
        classes: Request mix.
        rate_rps: Offered rate from time 0.
        duration_ns: Length of the arrival window.
        seed: Generator seed.
        arrival: Spacing of requests in rate mode.
        steps: Later rate changes.
        burst: Burst mode; replaces rate mode when set.
        compress_to_ns: Squeeze each logical second of traffic into this
            much time at its start.
        first_flow_id: Id of the first connection.
    """

    num_connections: int
    classes: list[RequestClass]
    rate_rps: float = 0.0
    duration_ns: int = NS_PER_S
    seed: int = 1
    arrival: ArrivalProcess = "uniform"
    steps: list[RateStep] = field(default_factory=list)
    burst: Optional[BurstSpec] = None
    compress_to_ns: Optional[int] = None
    first_flow_id: int = 1

    def __post_init__(self) -> None:
        """Validate the workload description."""
        if self.num_connections < 1:
            raise ValueError(f"num_connections must be >= 1, got {self.num_connections}")
        if not self.classes:
            raise ValueError("At least one request class is required")
        total = sum(c.fraction for c in self.classes)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"Class fractions must sum to 1, got {total}")
        for cls in self.classes:
            if cls.fraction < 0:
                raise ValueError(f"Class {cls.name}: fraction must be >= 0")
            if cls.service_time_ns <= 0:
                raise ValueError(f"Class {cls.name}: service_time_ns must be > 0")
            if cls.request_bytes <= 0:
                raise ValueError(f"Class {cls.name}: request_bytes must be > 0")
        if self.duration_ns <= 0:
            raise ValueError(f"duration_ns must be > 0, got {self.duration_ns}")
        if self.burst is None and self.rate_rps <= 0 and not self.steps:
            raise ValueError("A rate or a burst mode is required")
        if self.compress_to_ns is not None and not 0 < self.compress_to_ns <= NS_PER_S:
            raise ValueError(f"compress_to_ns must be in (0, 1s], got {self.compress_to_ns}")


@dataclass
class RequestRecord:
    """Server-side lifetime of one request.

    Attributes:
        id: Request id.
        request_class: Class name.
        priority: Declared priority.
        flow_id: Connection.
        service_time_ns: Requested work.
        t_enter_server: Arrival of its first packet at the NIC.
        t_leave_server: Transmission of its response, -1 until answered.
        t_service_start: Start of its service work, -1 until served.
    """

    id: int
    request_class: str
    priority: Priority
    flow_id: int
    service_time_ns: int
    t_enter_server: int
    t_leave_server: int = -1
    t_service_start: int = -1

    @property
    def complete(self) -> bool:
        """The response has left the server."""
        return self.t_leave_server >= 0

    @property
    def latency_ns(self) -> int:
        """Server-side latency.

        Raises:
            ValueError: If the request is not complete.
        """
        if not self.complete:
            raise ValueError(f"Request {self.id} has no response yet")
        return self.t_leave_server - self.t_enter_server


@dataclass
class Arrival:
    """A packet and the time it reaches the NIC."""

    t: int
    packet: Packet


@dataclass
class ArrivalSchedule:
    """Generated traffic.

    Attributes:
        arrivals: Packets sorted by arrival time (stable in generation order).
        requests: One record per request, indexed by request id.
        flows: Connection ids in use.
    """

    arrivals: list[Arrival]
    requests: list[RequestRecord]
    flows: list[int]


def wire_time_ns(frame_bytes: int) -> int:
    """Get the time a frame occupies a 10 Gbps link, preamble and gap included."""
    return max(1, (frame_bytes + FRAME_OVERHEAD_BYTES) * 8 * NS_PER_S // LINE_RATE_BPS)


def packet_sizes(request_bytes: int) -> list[int]:
    """Split a request into client-side packets.

    The first packet carries up to 1024 bytes including the header, the
    rest follow in packets of up to 1536 bytes.
    """
    first = min(REQUEST_HEADER_PACKET_BYTES, request_bytes)
    sizes = [first]
    rest = request_bytes - first
    while rest > 0:
        sizes.append(min(REQUEST_CONTINUATION_BYTES, rest))
        rest -= sizes[-1]
    return sizes


def assign_classes(n: int, fractions: list[float], rng: np.random.Generator) -> np.ndarray:
    """Assign classes by exact quota in shuffled order.

    Quotas are floor(fraction * n); leftover requests go to the classes
    with the largest remainders, ties to the earlier class.

    Args:
        n: Number of requests.
        fractions: Class shares summing to 1.
        rng: Seeded generator.

    Returns:
        Class index per request.
    """
    shares = np.asarray(fractions, dtype=np.float64) * n
    quotas = np.floor(shares + 1e-9).astype(np.int64)
    leftover = n - int(quotas.sum())
    if leftover > 0:
        order = np.argsort(-(shares - quotas), kind="stable")
        quotas[order[:leftover]] += 1
    labels = np.repeat(np.arange(len(fractions)), quotas)
    rng.shuffle(labels)
    return labels


def _rate_times(spec: WorkloadSpec, rng: np.random.Generator) -> np.ndarray:
    steps = [RateStep(0, spec.rate_rps), *sorted(spec.steps, key=lambda s: s.at_ns)]
    chunks = []
    for i, step in enumerate(steps):
        start = step.at_ns
        end = steps[i + 1].at_ns if i + 1 < len(steps) else spec.duration_ns
        end = min(end, spec.duration_ns)
        if step.rate_rps <= 0 or end <= start:
            continue
        mean_gap = NS_PER_S / step.rate_rps
        if spec.arrival == "uniform":
            times = np.arange(start, end, mean_gap)
        else:
            batch = int((end - start) / mean_gap) + 16
            times = start + np.cumsum(rng.exponential(mean_gap, size=batch))
            while times[-1] < end:
                more = times[-1] + np.cumsum(rng.exponential(mean_gap, size=batch))
                times = np.concatenate([times, more])
            times = times[times < end]
        chunks.append(np.floor(times).astype(np.int64))
    if not chunks:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(chunks)


def _burst_times(spec: WorkloadSpec) -> np.ndarray:
    burst = spec.burst
    spacing = burst.spacing_ns if burst.spacing_ns is not None else line_rate_spacing_ns()
    period = NS_PER_S / burst.bursts_per_s
    starts = np.arange(0, spec.duration_ns, period)
    offsets = np.arange(burst.burst_size, dtype=np.int64) * spacing
    times = (np.floor(starts).astype(np.int64)[:, None] + offsets[None, :]).ravel()
    return times[times < spec.duration_ns]


def compress(times: np.ndarray, compress_to_ns: int) -> np.ndarray:
    """Squeeze each logical second of arrivals into its first ``compress_to_ns``."""
    second = times // NS_PER_S
    offset = times - second * NS_PER_S
    return second * NS_PER_S + offset * compress_to_ns // NS_PER_S


def request_times(spec: WorkloadSpec) -> np.ndarray:
    """Get the start time of every request, sorted.

    Args:
        spec: Workload description.

    Returns:
        Integer ns start times.
    """
    rng = np.random.default_rng(spec.seed)
    times = _burst_times(spec) if spec.burst is not None else _rate_times(spec, rng)
    if spec.compress_to_ns is not None:
        times = compress(times, spec.compress_to_ns)
    return np.sort(times, kind="stable")


def generate(spec: WorkloadSpec) -> ArrivalSchedule:
    """Generate the arrival schedule of a workload.

    Requests are spread over connections round-robin. Each request is
    framed into packets that follow each other at line rate; the header
    packet carries the 16-byte request header as its payload.

    Args:
        spec: Workload description.

    Returns:
        ArrivalSchedule with packets and request records.
    """
    times = request_times(spec)
    # separate stream so arrival times and class order do not couple
    class_rng = np.random.default_rng([spec.seed, 1])
    labels = assign_classes(len(times), [c.fraction for c in spec.classes], class_rng)

    flows = [spec.first_flow_id + i for i in range(spec.num_connections)]
    next_seq = dict.fromkeys(flows, 0)
    arrivals: list[Arrival] = []
    requests: list[RequestRecord] = []
    for request_id, (t, label) in enumerate(zip(times.tolist(), labels.tolist())):
        cls = spec.classes[label]
        flow_id = flows[request_id % len(flows)]
        descriptor = RequestDescriptor(
            request_id=request_id,
            flow_id=flow_id,
            total_length=cls.request_bytes,
            request_class=cls.name,
            service_time_ns=cls.service_time_ns,
            priority=cls.priority,
        )
        requests.append(
            RequestRecord(
                id=request_id,
                request_class=cls.name,
                priority=cls.priority,
                flow_id=flow_id,
                service_time_ns=cls.service_time_ns,
                t_enter_server=t,
            )
        )
        arrive = t
        for i, size in enumerate(packet_sizes(cls.request_bytes)):
            payload = (
                encode_header(cls.request_bytes, cls.priority, cls.service_time_ns) if i == 0 else b""
            )
            packet = Packet(
                flow_id=flow_id,
                seq_start=next_seq[flow_id],
                seq_len=size,
                payload=payload,
                request=descriptor,
            )
            next_seq[flow_id] += size
            arrivals.append(Arrival(t=arrive, packet=packet))
            arrive += wire_time_ns(size)
    arrivals.sort(key=lambda a: a.t)
    logger.info(
        "Generated %d requests (%d packets) over %d connections",
        len(requests),
        len(arrivals),
        len(flows),
    )
    return ArrivalSchedule(arrivals=arrivals, requests=requests, flows=flows)
