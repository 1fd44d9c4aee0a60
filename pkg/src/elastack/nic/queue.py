"""Multi-queue NIC model.

Descriptor rings are finite FIFOs with tail-drop. Flows are spread over
rings by a Fibonacci hash into RSS flow groups; a group is the unit of
migration between stack coroutines.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from elastack.constants import (
    DEFAULT_RSS_GROUPS,
    EMPTY_QUEUE_CHECK_COST_NS,
    FIBONACCI_HASH_MULTIPLIER,
    HASH_WORD_MASK,
    MAX_NIC_QUEUES,
    NIC_BATCH_COST_NS,
    NIC_BATCH_PACKETS,
    NIC_QUEUE_CAPACITY,
    EnqueueResult,
    PriorityClass,
)
from elastack.nic.packet import Packet

logger = logging.getLogger(__name__)

ArrivalHook = Callable[["NicQueue", Packet, int], None]


def rss_hash(flow_id: int, num_groups: int) -> int:
    """Map a flow to its RSS flow group.

    Args:
        flow_id: Flow identifier.
        num_groups: Number of flow groups.

    Returns:
        Group index in ``[0, num_groups)``.

    Raises:
        ValueError: If num_groups is less than 1.
    """
    if num_groups < 1:
        raise ValueError(f"num_groups must be >= 1, got {num_groups}")
    return ((flow_id * FIBONACCI_HASH_MULTIPLIER) & HASH_WORD_MASK) % num_groups


def rx_cost_ns(count: int) -> int:
    """Get the driver cost of one receive burst.

    Args:
        count: Packets returned by the burst.

    Returns:
        100 ns for an empty poll, else 1 us per 32 packets pro-rated.
    """
    if count == 0:
        return EMPTY_QUEUE_CHECK_COST_NS
    return count * NIC_BATCH_COST_NS // NIC_BATCH_PACKETS


@dataclass
class NicQueue:
    """One receive descriptor ring.

    Attributes:
        queue_id: Ring index.
        capacity: Maximum packets held.
        priority_class: Optional class this ring is reserved for.
        ring: Packets waiting for the driver.
        drops: Packets lost to overflow.
        enqueued: Packets ever accepted.
        dequeued: Packets ever handed to the driver.
        first_drop_ns: Virtual time of the first overflow, -1 if none.
    """

    queue_id: int
    capacity: int = NIC_QUEUE_CAPACITY
    priority_class: PriorityClass = PriorityClass.NONE
    ring: deque = field(default_factory=deque)
    drops: int = 0
    enqueued: int = 0
    dequeued: int = 0
    first_drop_ns: int = -1

    def __post_init__(self) -> None:
        """Validate ring capacity."""
        if self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")

    def __len__(self) -> int:
        """Packets currently in the ring."""
        return len(self.ring)

    @property
    def offered(self) -> int:
        """Packets ever offered to the ring."""
        return self.enqueued + self.drops


def nic_enqueue(packet: Packet, queue: NicQueue, now: int) -> EnqueueResult:
    """Offer a packet to a ring.

    Args:
        packet: Arriving packet.
        queue: Target ring.
        now: Arrival time.

    Returns:
        ACCEPTED if appended, DROPPED if the ring was full.
    """
    if len(queue.ring) >= queue.capacity:
        queue.drops += 1
        if queue.first_drop_ns < 0:
            queue.first_drop_ns = now
            logger.info("NIC queue %d overflowed at %d ns", queue.queue_id, now)
        return EnqueueResult.DROPPED
    packet.t_arrive_nic = now
    queue.ring.append(packet)
    queue.enqueued += 1
    return EnqueueResult.ACCEPTED


@dataclass
class RxBurst:
    """Packets returned by one receive burst and the cost of the burst."""

    packets: list[Packet]
    cost_ns: int


def rx_burst(queue: NicQueue, max_batch: int = NIC_BATCH_PACKETS) -> RxBurst:
    """Remove up to ``max_batch`` packets from a ring in FIFO order.

    Args:
        queue: Ring to poll.
        max_batch: Burst size limit.

    Returns:
        RxBurst with the packets and the cost to charge the polling core.

    Raises:
        ValueError: If max_batch is less than 1.
    """
    if max_batch < 1:
        raise ValueError(f"max_batch must be >= 1, got {max_batch}")
    count = min(max_batch, len(queue.ring))
    packets = [queue.ring.popleft() for _ in range(count)]
    queue.dequeued += count
    return RxBurst(packets=packets, cost_ns=rx_cost_ns(count))


@dataclass
class RssMap:
    """RSS flow groups and the ring each group lands on.

    Attributes:
        num_groups: Number of flow groups.
        group_to_queue: Group index to ring index.
    """

    num_groups: int
    group_to_queue: list[int]

    @classmethod
    def identity(cls, num_groups: int = DEFAULT_RSS_GROUPS) -> "RssMap":
        """Create a map with one ring per group.

        Args:
            num_groups: Number of groups (and rings).

        Returns:
            RssMap where group g uses ring g.
        """
        return cls(num_groups=num_groups, group_to_queue=list(range(num_groups)))

    def group_of(self, flow_id: int) -> int:
        """Get the flow group of a flow."""
        return rss_hash(flow_id, self.num_groups)

    def queue_of(self, flow_id: int) -> int:
        """Get the ring a flow's packets arrive on."""
        return self.group_to_queue[self.group_of(flow_id)]


class Nic:
    """A multi-queue NIC with RSS steering.

    Example:
        >>> nic = Nic(num_queues=4)
        >>> nic.receive(Packet(flow_id=7, seq_start=0, seq_len=64), now=0)
        <EnqueueResult.ACCEPTED: 'accepted'>
    """

    def __init__(
        self,
        num_queues: int = DEFAULT_RSS_GROUPS,
        capacity: int = NIC_QUEUE_CAPACITY,
        rss: Optional[RssMap] = None,
        classifier: Optional[Callable[[Packet], PriorityClass]] = None,
    ) -> None:
        """Initialize the NIC.

        Args:
            num_queues: Number of receive rings.
            capacity: Descriptors per ring.
            rss: Group-to-ring map; one ring per group if omitted.
            classifier: Optional pre-classifier that steers packets to rings
                reserved for a priority class.

        Raises:
            ValueError: If the ring count is out of range or the map points
                at a missing ring.
        """
        if not 1 <= num_queues <= MAX_NIC_QUEUES:
            raise ValueError(f"num_queues must be in [1, {MAX_NIC_QUEUES}], got {num_queues}")
        self.queues = [NicQueue(queue_id=i, capacity=capacity) for i in range(num_queues)]
        self.rss = rss or RssMap.identity(num_queues)
        if any(q >= num_queues for q in self.rss.group_to_queue):
            raise ValueError("RSS map references a missing queue")
        self.classifier = classifier
        self.on_arrival: Optional[ArrivalHook] = None

    def queue_for(self, packet: Packet) -> NicQueue:
        """Select the ring for an arriving packet.

        Args:
            packet: Arriving packet.

        Returns:
            Ring chosen by the pre-classifier if one matches, else by RSS.
        """
        if self.classifier is not None:
            wanted = self.classifier(packet)
            for queue in self.queues:
                if queue.priority_class is not PriorityClass.NONE and queue.priority_class == wanted:
                    return queue
        return self.queues[self.rss.queue_of(packet.flow_id)]

    def receive(self, packet: Packet, now: int) -> EnqueueResult:
        """Deliver a packet from the wire.

        Args:
            packet: Arriving packet.
            now: Arrival time.

        Returns:
            Enqueue outcome.
        """
        queue = self.queue_for(packet)
        result = nic_enqueue(packet, queue, now)
        if result is EnqueueResult.ACCEPTED and self.on_arrival is not None:
            self.on_arrival(queue, packet, now)
        return result

    @property
    def total_drops(self) -> int:
        """Drops summed over all rings."""
        return sum(q.drops for q in self.queues)

    def drops_per_queue(self) -> list[int]:
        """Get the drop counter of every ring."""
        return [q.drops for q in self.queues]
