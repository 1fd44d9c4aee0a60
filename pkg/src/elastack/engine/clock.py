"""Virtual clock and the schedule of timed occurrences."""

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

OccurrenceCallback = Callable[["Occurrence"], None]


class VirtualClock:
    """Integer-nanosecond simulation clock.

    The clock only moves forward and only through the engine.

    Attributes:
        now: Nanoseconds since simulation start.
    """

    def __init__(self, now: int = 0) -> None:
        """Initialize the clock.

        Args:
            now: Start time.
        """
        self.now = now

    def advance_to(self, t: int) -> None:
        """Move the clock forward.

        Args:
            t: New time, not earlier than the current one.

        Raises:
            ValueError: If ``t`` lies in the past.
        """
        if t < self.now:
            raise ValueError(f"Clock cannot go back from {self.now} to {t}")
        self.now = t


@dataclass(order=True)
class Occurrence:
    """A timed arrival or timer.

    Ordered by deadline, then by insertion order.

    Attributes:
        t: Deadline.
        seq: Insertion order.
        label: Short description for logs and tests.
        callback: Function run when the occurrence fires.
        payload: Optional data handed to the callback.
        cancelled: Skip when popped.
    """

    t: int
    seq: int
    label: str = field(default="", compare=False)
    callback: Optional[OccurrenceCallback] = field(default=None, compare=False)
    payload: Any = field(default=None, compare=False)
    cancelled: bool = field(default=False, compare=False)


class OccurrenceQueue:
    """Min-heap of occurrences."""

    def __init__(self) -> None:
        """Initialize an empty schedule."""
        self._heap: list[Occurrence] = []
        self._seq = 0

    def __len__(self) -> int:
        """Occurrences still scheduled, cancelled ones included."""
        return len(self._heap)

    def schedule(
        self,
        t: int,
        callback: Optional[OccurrenceCallback] = None,
        label: str = "",
        payload: Any = None,
    ) -> Occurrence:
        """Add an occurrence.

        Args:
            t: Deadline.
            callback: Function run at the deadline.
            label: Description.
            payload: Data for the callback.

        Returns:
            The scheduled occurrence (can be cancelled).
        """
        occurrence = Occurrence(t=t, seq=self._seq, label=label, callback=callback, payload=payload)
        self._seq += 1
        heapq.heappush(self._heap, occurrence)
        return occurrence

    def peek_time(self) -> Optional[int]:
        """Get the earliest live deadline."""
        while self._heap and self._heap[0].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0].t if self._heap else None

    def pop_due(self, until: int) -> Optional[Occurrence]:
        """Remove the earliest live occurrence with deadline <= ``until``."""
        if self.peek_time() is None or self._heap[0].t > until:
            return None
        return heapq.heappop(self._heap)
