"""Logical cores, coroutine tasks and checkpointed work segments."""

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol

from elastack.constants import (
    ChargeKind,
    CoreRole,
    PriorityClass,
    StepOutcome,
    TaskKind,
    TaskState,
)


@dataclass(frozen=True)
class WorkSegment:
    """A stretch of virtual CPU work with embedded checkpoints.

    Attributes:
        duration: Work in virtual ns.
        checkpoint_interval: Distance between checkpoints.
    """

    duration: int
    checkpoint_interval: int

    def __post_init__(self) -> None:
        """Validate the segment."""
        if self.duration < 0:
            raise ValueError(f"duration must be >= 0, got {self.duration}")
        if self.checkpoint_interval <= 0:
            raise ValueError(f"checkpoint_interval must be > 0, got {self.checkpoint_interval}")

    @property
    def checkpoints(self) -> int:
        """Checkpoints the segment contains, one at the end of every chunk."""
        return math.ceil(self.duration / self.checkpoint_interval)


@dataclass
class SegmentRun:
    """Progress through a WorkSegment that may be interrupted at checkpoints.

    Attributes:
        segment: The work.
        remaining: Work not yet executed.
        checkpoint_due: A chunk finished and its checkpoint has not run.
        checkpoints_run: Checkpoints executed so far.
    """

    segment: WorkSegment
    remaining: int = -1
    checkpoint_due: bool = False
    checkpoints_run: int = 0

    def __post_init__(self) -> None:
        """Start at the beginning of the segment."""
        if self.remaining < 0:
            self.remaining = self.segment.duration

    @property
    def finished(self) -> bool:
        """All work executed and the last checkpoint taken."""
        return self.remaining == 0 and not self.checkpoint_due

    def next_chunk(self) -> int:
        """Get the length of the next chunk and mark its checkpoint due."""
        chunk = min(self.remaining, self.segment.checkpoint_interval)
        self.remaining -= chunk
        self.checkpoint_due = True
        return chunk


class TaskBody(Protocol):
    """Behavior a coroutine plugs into the engine."""

    def has_work(self) -> bool:
        """Work is waiting for this coroutine."""
        ...

    def has_high(self) -> bool:
        """High-priority work is waiting for this coroutine."""
        ...

    def urgent(self, now: int) -> bool:
        """A deadline of this coroutine has expired with work pending."""
        ...

    def step(self, task: "Task", core: "Core") -> StepOutcome:
        """Run one unit of work on ``core``, charging its time."""
        ...


@dataclass(eq=False)
class Task:
    """A schedulable coroutine.

    Attributes:
        id: Task id.
        kind: Stack or App.
        index: Position in its coroutine pool (stack i or app j).
        body: Behavior run on dispatch.
        core: Hosting core id, -1 if unplaced.
        state: Runnable, Running or Suspended.
        run_start: Time of the current dispatch.
        priority_binding: Class of events the task is bound to.
        segment: Work segment in progress, if any.
        migrate_to: Core the task moves to at its next yield.
        draining: Suspend once the task runs out of work.
        dispatches: Times dispatched.
    """

    id: int
    kind: TaskKind
    index: int
    body: Optional[TaskBody] = None
    core: int = -1
    state: TaskState = TaskState.SUSPENDED
    run_start: int = 0
    priority_binding: PriorityClass = PriorityClass.ANY
    segment: Optional[SegmentRun] = None
    migrate_to: Optional[int] = None
    draining: bool = False
    dispatches: int = 0

    @property
    def name(self) -> str:
        """Short name such as ``S0`` or ``A3``."""
        return f"{'S' if self.kind is TaskKind.STACK else 'A'}{self.index}"

    def has_work(self) -> bool:
        """Work is waiting, including an unfinished segment."""
        if self.segment is not None and not self.segment.finished:
            return True
        return self.body is not None and self.body.has_work()


@dataclass(eq=False)
class Core:
    """A logical core.

    Attributes:
        id: Core index.
        role: Role in the current plan.
        run_queue: Hosted tasks in round-robin order.
        now: Local virtual time.
        busy_ns: Charged time.
        charges: Charged time per category.
        sleeping: Nothing to run until woken.
        current: Task holding the core between steps.
        rr_next: Round-robin position.
    """

    id: int
    role: CoreRole = CoreRole.IDLE
    run_queue: list[Task] = field(default_factory=list)
    now: int = 0
    busy_ns: int = 0
    charges: dict[ChargeKind, int] = field(
        default_factory=lambda: {kind: 0 for kind in ChargeKind}
    )
    sleeping: bool = False
    current: Optional[Task] = None
    rr_next: int = 0

    @property
    def total_ns(self) -> int:
        """Elapsed virtual time on this core."""
        return self.now

    @property
    def work_ns(self) -> int:
        """Charged time excluding idle spin-polling."""
        return self.busy_ns - self.charges[ChargeKind.POLL]

    def charge(self, kind: ChargeKind, ns: int) -> None:
        """Spend virtual CPU time.

        Args:
            kind: Accounting category.
            ns: Time spent.
        """
        if ns <= 0:
            return
        self.now += ns
        self.busy_ns += ns
        self.charges[kind] += ns

    def idle_until(self, t: int) -> None:
        """Move local time forward over an idle gap.

        Cores in a plan spin-poll, so the gap is charged as polling; a
        released (Idle) core is not charged.
        """
        if t <= self.now:
            return
        if self.role is CoreRole.IDLE:
            self.now = t
        else:
            self.charge(ChargeKind.POLL, t - self.now)

    def stack_task(self) -> Optional[Task]:
        """Get the live stack coroutine hosted here, if any."""
        for task in self.run_queue:
            if task.kind is TaskKind.STACK and task.state is not TaskState.SUSPENDED:
                return task
        return None

    def add(self, task: Task) -> None:
        """Host a task."""
        if task not in self.run_queue:
            self.run_queue.append(task)
        task.core = self.id

    def remove(self, task: Task) -> None:
        """Stop hosting a task."""
        if task in self.run_queue:
            index = self.run_queue.index(task)
            self.run_queue.remove(task)
            if index < self.rr_next:
                self.rr_next -= 1
        if self.current is task:
            self.current = None
