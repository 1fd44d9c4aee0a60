"""Priority-aware epoll-like event delivery.

K stack coroutines (producers) feed M application coroutines
(consumers) through one channel per consumer. Each channel keeps a
FIFO per producer and per class; the consumer always drains High
before Low, and within a class interleaves producers by their
per-producer emission index.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from elastack.constants import (
    WOULD_BLOCK,
    Blocking,
    EventKind,
    Priority,
    PriorityClass,
)
from elastack.errors import UnknownConsumerError

logger = logging.getLogger(__name__)

# Producer id used for events injected from outside any stack coroutine
EXTERNAL_PRODUCER = -1

CheckpointHook = Callable[[], None]
EmitHook = Callable[[int, "Event"], None]


@dataclass(slots=True)
class Event:
    """Readiness notification.

    Attributes:
        flow_id: Flow the event concerns.
        kind: Readiness kind.
        priority: High or Low; Unset is treated as Low.
        t_emit: Virtual time of emission.
        producer: Emitting stack coroutine.
        producer_index: Position in the producer's emission sequence on
            this channel.
        seq: Global emission order.
    """

    flow_id: int
    kind: EventKind = EventKind.READABLE
    priority: Priority = Priority.LOW
    t_emit: int = 0
    producer: int = EXTERNAL_PRODUCER
    producer_index: int = 0
    seq: int = 0


@dataclass
class _ClassQueue:
    """Per-producer FIFOs of one class."""

    by_producer: dict[int, deque] = field(default_factory=dict)
    size: int = 0

    def push(self, event: Event) -> None:
        self.by_producer.setdefault(event.producer, deque()).append(event)
        self.size += 1

    def pop(self) -> Optional[Event]:
        best: Optional[deque] = None
        for fifo in self.by_producer.values():
            if fifo and (
                best is None
                or (fifo[0].producer_index, fifo[0].seq) < (best[0].producer_index, best[0].seq)
            ):
                best = fifo
        if best is None:
            return None
        self.size -= 1
        return best.popleft()


class EventChannel:
    """MPSC channel feeding one consumer coroutine.

    Attributes:
        consumer: Consumer id.
        prioritized: When False both classes share the Low queue.
    """

    def __init__(self, consumer: int, prioritized: bool = True) -> None:
        """Initialize the channel.

        Args:
            consumer: Consumer id.
            prioritized: Enable the High queue.
        """
        self.consumer = consumer
        self.prioritized = prioritized
        self.high_q = _ClassQueue()
        self.low_q = _ClassQueue()
        self._producer_counts: dict[int, int] = {}

    def __len__(self) -> int:
        """Events waiting in both classes."""
        return self.high_q.size + self.low_q.size

    @property
    def pending_high(self) -> int:
        """High events waiting."""
        return self.high_q.size

    def push(self, event: Event) -> None:
        """Append an event, stamping its per-producer index."""
        index = self._producer_counts.get(event.producer, 0)
        self._producer_counts[event.producer] = index + 1
        event.producer_index = index
        if self.prioritized and event.priority is Priority.HIGH:
            self.high_q.push(event)
        else:
            self.low_q.push(event)

    def pop(self) -> Optional[Event]:
        """Remove the next event, High first."""
        if self.high_q.size:
            return self.high_q.pop()
        if self.low_q.size:
            return self.low_q.pop()
        return None


@dataclass(frozen=True)
class PriorityBinding:
    """Routing of one flow's events of one class filter to a consumer."""

    flow_id: int
    consumer: int
    class_filter: PriorityClass


class EventFramework:
    """Routes events from stack coroutines to application coroutines.

    Example:
        >>> events = EventFramework()
        >>> _ = events.add_consumer(0)
        >>> events.q_epoll_ctrl(flow_id=5, consumer=0, class_filter=PriorityClass.ANY)
        >>> events.emit(Event(flow_id=5, priority=Priority.HIGH))
        True
        >>> events.q_get_event(0).flow_id
        5
    """

    def __init__(self, prioritized: bool = True) -> None:
        """Initialize the framework.

        Args:
            prioritized: Enable High queues on every channel.
        """
        self.prioritized = prioritized
        self.channels: dict[int, EventChannel] = {}
        self.routes: dict[int, dict[Priority, int]] = {}
        self.default_consumer: Optional[int] = None
        self.checkpoint: Optional[CheckpointHook] = None
        self.on_emit: Optional[EmitHook] = None
        self.emitted = 0
        self.delivered = 0
        self.orphaned = 0
        self.binding_warnings = 0
        self._seq = 0

    # ------------------------------------------------------------------ #
    # Consumers and bindings
    # ------------------------------------------------------------------ #

    def add_consumer(self, consumer: int) -> EventChannel:
        """Create the channel of a consumer if it does not exist."""
        if consumer not in self.channels:
            self.channels[consumer] = EventChannel(consumer, prioritized=self.prioritized)
        return self.channels[consumer]

    def q_epoll_ctrl(self, flow_id: int, consumer: int, class_filter: PriorityClass) -> None:
        """Bind a flow's events of a class to a consumer.

        A binding that overrides a different consumer for the same class
        wins and is counted in ``binding_warnings``.

        Args:
            flow_id: Flow to bind.
            consumer: Receiving consumer.
            class_filter: HIGH, LOW or ANY.

        Raises:
            UnknownConsumerError: If the consumer has no channel.
            ValueError: If class_filter is NONE.
        """
        if consumer not in self.channels:
            raise UnknownConsumerError(f"Unknown consumer: {consumer}")
        if class_filter is PriorityClass.NONE:
            raise ValueError("class_filter must be HIGH, LOW or ANY")
        classes = (
            (Priority.HIGH, Priority.LOW)
            if class_filter is PriorityClass.ANY
            else (Priority(class_filter.value),)
        )
        route = self.routes.setdefault(flow_id, {})
        for cls in classes:
            previous = route.get(cls)
            if previous is not None and previous != consumer:
                self.binding_warnings += 1
                logger.warning(
                    "Flow %d %s events rebound from consumer %d to %d",
                    flow_id,
                    cls.value,
                    previous,
                    consumer,
                )
            route[cls] = consumer

    def unbind(self, flow_id: int) -> None:
        """Remove every binding of a flow."""
        self.routes.pop(flow_id, None)

    def bindings(self, flow_id: int) -> list[PriorityBinding]:
        """List the bindings of a flow."""
        route = self.routes.get(flow_id, {})
        if route.get(Priority.HIGH) is not None and route.get(Priority.HIGH) == route.get(Priority.LOW):
            return [PriorityBinding(flow_id, route[Priority.HIGH], PriorityClass.ANY)]
        return [
            PriorityBinding(flow_id, consumer, PriorityClass(cls.value))
            for cls, consumer in route.items()
        ]

    def route_of(self, flow_id: int, priority: Priority) -> Optional[int]:
        """Get the consumer that receives a flow's events of a class."""
        cls = Priority.HIGH if priority is Priority.HIGH else Priority.LOW
        route = self.routes.get(flow_id)
        if route is not None and cls in route:
            return route[cls]
        return self.default_consumer

    # ------------------------------------------------------------------ #
    # Producer side
    # ------------------------------------------------------------------ #

    def emit(self, event: Event) -> bool:
        """Deliver an event to the consumer its flow and class route to.

        Args:
            event: Event to deliver; ``t_emit`` must already be stamped.

        Returns:
            True if queued, False if it had no route and was orphaned.
        """
        self.emitted += 1
        if event.priority is not Priority.HIGH:
            event.priority = Priority.LOW
        consumer = self.route_of(event.flow_id, event.priority)
        if consumer is None or consumer not in self.channels:
            self.orphaned += 1
            logger.debug("Orphaned event for flow %d", event.flow_id)
            return False
        event.seq = self._seq
        self._seq += 1
        self.channels[consumer].push(event)
        if self.on_emit is not None:
            self.on_emit(consumer, event)
        return True

    # ------------------------------------------------------------------ #
    # Consumer side
    # ------------------------------------------------------------------ #

    def _implicit_check(self) -> None:
        if self.checkpoint is not None:
            self.checkpoint()

    def _channel(self, consumer: int) -> EventChannel:
        channel = self.channels.get(consumer)
        if channel is None:
            raise UnknownConsumerError(f"Unknown consumer: {consumer}")
        return channel

    def q_get_event(self, consumer: int) -> Union[Event, Blocking]:
        """Receive a single event, High first.

        Performs one implicit fastcalldown check whether or not an event
        is available.

        Args:
            consumer: Consumer id.

        Returns:
            The next event, or WOULD_BLOCK.

        Raises:
            UnknownConsumerError: If the consumer has no channel.
        """
        channel = self._channel(consumer)
        self._implicit_check()
        event = channel.pop()
        if event is None:
            return WOULD_BLOCK
        self.delivered += 1
        return event

    def q_epoll_wait(self, consumer: int, max_events: int) -> Union[list[Event], Blocking]:
        """Receive up to ``max_events`` events, all High before any Low.

        Args:
            consumer: Consumer id.
            max_events: Upper bound on events returned.

        Returns:
            Events in delivery order, or WOULD_BLOCK when none are pending.

        Raises:
            ValueError: If max_events is less than 1.
            UnknownConsumerError: If the consumer has no channel.
        """
        if max_events < 1:
            raise ValueError(f"max_events must be >= 1, got {max_events}")
        channel = self._channel(consumer)
        self._implicit_check()
        events = []
        while len(events) < max_events:
            event = channel.pop()
            if event is None:
                break
            events.append(event)
        if not events:
            return WOULD_BLOCK
        self.delivered += len(events)
        return events

    def pending(self, consumer: int) -> int:
        """Events waiting for a consumer."""
        channel = self.channels.get(consumer)
        return len(channel) if channel is not None else 0

    def pending_high(self, consumer: int) -> int:
        """High events waiting for a consumer."""
        channel = self.channels.get(consumer)
        return channel.pending_high if channel is not None else 0

    @property
    def total_pending(self) -> int:
        """Events waiting across all channels."""
        return sum(len(c) for c in self.channels.values())
