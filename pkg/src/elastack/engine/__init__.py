"""Discrete-virtual-time engine: clock, cores, tasks and work segments."""

from elastack.engine.clock import Occurrence, OccurrenceQueue, VirtualClock
from elastack.engine.cores import Core, SegmentRun, Task, TaskBody, WorkSegment
from elastack.engine.engine import Engine

__all__ = [
    "Core",
    "Engine",
    "Occurrence",
    "OccurrenceQueue",
    "SegmentRun",
    "Task",
    "TaskBody",
    "VirtualClock",
    "WorkSegment",
]
