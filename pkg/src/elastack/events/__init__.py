"""Priority-aware event framework over K:M MPSC channels."""

from elastack.events.framework import (
    EXTERNAL_PRODUCER,
    Event,
    EventChannel,
    EventFramework,
    PriorityBinding,
)

__all__ = [
    "EXTERNAL_PRODUCER",
    "Event",
    "EventChannel",
    "EventFramework",
    "PriorityBinding",
]
