"""Driver layer with priority-split receive and send buffers.

The driver polls NIC rings in bursts, optionally runs the stateless
driver-layer extraction callback on each packet, and files packets into
high or low buffers. Dequeue always drains high before low.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from elastack.constants import (
    DRIVER_EXTRACTION_COST_NS,
    NIC_BATCH_COST_NS,
    NIC_BATCH_PACKETS,
    Priority,
)
from elastack.nic.packet import Packet
from elastack.nic.queue import NicQueue, rx_burst

# Stateless classifier: sees only the bytes of the packet presented
DriverCallback = Callable[[bytes], Priority]


@dataclass
class DriverBuffer:
    """Two-class FIFO buffer.

    Attributes:
        capacity: Packets per class, None for unbounded.
        prioritized: When False every packet is filed low and the buffer
            degrades to a single FIFO.
        high: High-priority packets.
        low: Low-priority and unlabeled packets.
        drops: Packets refused because a class was full.
    """

    capacity: Optional[int] = None
    prioritized: bool = True
    high: deque = field(default_factory=deque)
    low: deque = field(default_factory=deque)
    drops: int = 0

    def __len__(self) -> int:
        """Packets held in both classes."""
        return len(self.high) + len(self.low)

    def push(self, packet: Packet) -> bool:
        """File a packet by its label.

        Args:
            packet: Packet to buffer. Unset labels are filed low.

        Returns:
            True if buffered, False if the class was full.
        """
        target = self.high if self.prioritized and packet.priority is Priority.HIGH else self.low
        if self.capacity is not None and len(target) >= self.capacity:
            self.drops += 1
            return False
        target.append(packet)
        return True

    def pop(self) -> Optional[Packet]:
        """Remove the next packet, high class first.

        Returns:
            Next packet or None when empty.
        """
        if self.high:
            return self.high.popleft()
        if self.low:
            return self.low.popleft()
        return None

    def pop_batch(self, max_batch: int) -> list[Packet]:
        """Remove up to ``max_batch`` packets, high class first."""
        batch = []
        while len(batch) < max_batch:
            packet = self.pop()
            if packet is None:
                break
            batch.append(packet)
        return batch


@dataclass
class DriverExtraction:
    """Driver-layer extraction point.

    Attributes:
        callback: Stateless classifier over a single packet's bytes.
        enabled: Whether the callback runs.
        cost_ns: Cost charged per callback invocation.
    """

    callback: Optional[DriverCallback] = None
    enabled: bool = False
    cost_ns: int = DRIVER_EXTRACTION_COST_NS


@dataclass
class DriverPoll:
    """Outcome of polling one ring."""

    moved: int
    cost_ns: int


def tx_cost_ns(count: int) -> int:
    """Get the cost of transmitting ``count`` packets (pro-rated bursts)."""
    return count * NIC_BATCH_COST_NS // NIC_BATCH_PACKETS


class Driver:
    """Per-stack-coroutine driver instance.

    Example:
        >>> driver = Driver()
        >>> driver.poll_and_classify(NicQueue(queue_id=0), max_batch=32).moved
        0
    """

    def __init__(
        self,
        rx_capacity: Optional[int] = None,
        tx_capacity: Optional[int] = None,
        prioritized: bool = True,
    ) -> None:
        """Initialize the driver.

        Args:
            rx_capacity: Receive packets per class, None for unbounded.
            tx_capacity: Send packets per class, None for unbounded.
            prioritized: Enable the high-priority buffers.
        """
        self.rx = DriverBuffer(capacity=rx_capacity, prioritized=prioritized)
        self.tx = DriverBuffer(capacity=tx_capacity, prioritized=prioritized)
        self.extraction = DriverExtraction()
        self.callbacks_run = 0

    def set_extraction(self, callback: Optional[DriverCallback], enabled: bool = True) -> None:
        """Install or replace the driver-layer callback.

        Args:
            callback: Stateless classifier, None to remove.
            enabled: Whether it should run.
        """
        self.extraction.callback = callback
        self.extraction.enabled = enabled and callback is not None

    def classify(self, packet: Packet) -> int:
        """Run the driver extraction on one packet.

        Args:
            packet: Packet to label.

        Returns:
            Cost charged for the callback, 0 if extraction is off.
        """
        extraction = self.extraction
        if not extraction.enabled or extraction.callback is None:
            return 0
        packet.label(extraction.callback(packet.payload))
        self.callbacks_run += 1
        return extraction.cost_ns

    def poll_and_classify(self, queue: NicQueue, max_batch: int = NIC_BATCH_PACKETS) -> DriverPoll:
        """Receive one burst from a ring into the receive buffers.

        Args:
            queue: Ring to poll.
            max_batch: Burst size limit.

        Returns:
            DriverPoll with packets moved and cost incurred.
        """
        burst = rx_burst(queue, max_batch)
        cost = burst.cost_ns
        for packet in burst.packets:
            cost += self.classify(packet)
            self.rx.push(packet)
        return DriverPoll(moved=len(burst.packets), cost_ns=cost)

    def drain(self, queue: NicQueue, max_batch: int = NIC_BATCH_PACKETS) -> DriverPoll:
        """Poll a ring in bursts until it is empty.

        An already empty ring still costs one empty check.

        Args:
            queue: Ring to drain.
            max_batch: Burst size limit.

        Returns:
            DriverPoll summed over all bursts.
        """
        moved = 0
        cost = 0
        while True:
            poll = self.poll_and_classify(queue, max_batch)
            moved += poll.moved
            cost += poll.cost_ns
            if poll.moved < max_batch or not queue.ring:
                return DriverPoll(moved=moved, cost_ns=cost)

    def tx_enqueue(self, packet: Packet) -> bool:
        """Queue a packet for transmission by its label.

        Args:
            packet: Outgoing packet.

        Returns:
            True if accepted.
        """
        return self.tx.push(packet)

    def tx_drain(self, max_batch: Optional[int] = None) -> list[Packet]:
        """Take packets for transmission, high class first.

        Args:
            max_batch: Limit, None for everything queued.

        Returns:
            Packets in transmit order.
        """
        return self.tx.pop_batch(len(self.tx) if max_batch is None else max_batch)
