"""Single-threaded discrete-virtual-time engine.

Each logical core keeps its own local time. The engine always steps
the awake core with the smallest local time (ties by core id) after
firing every arrival and timer due by then, so a core never observes
an occurrence from its future. Coroutines run cooperatively: a step
ends at a checkpoint boundary and the core keeps running the same task
until it yields.
"""

import logging
from typing import Any, Optional

from elastack.constants import (
    CHECK_COST_NS,
    ChargeKind,
    FcdAction,
    PriorityClass,
    StepOutcome,
    TaskKind,
    TaskState,
)
from elastack.engine.clock import Occurrence, OccurrenceCallback, OccurrenceQueue, VirtualClock
from elastack.engine.cores import Core, SegmentRun, Task, TaskBody, WorkSegment
from elastack.fastpath.calldown import YIELD_ACTIONS, FastCallDown

logger = logging.getLogger(__name__)

Actions = frozenset[FcdAction]


class Engine:
    """Discrete-event engine over logical cores and coroutine tasks.

    Example:
        >>> engine = Engine(num_cores=1)
        >>> _ = engine.schedule(50, label="arrival")
        >>> [o.label for o in engine.advance(100)]
        ['arrival']
        >>> engine.clock.now
        100
    """

    def __init__(self, num_cores: int = 1, fastcalldown: Optional[FastCallDown] = None) -> None:
        """Initialize the engine.

        Args:
            num_cores: Logical cores available to plans.
            fastcalldown: Checkpoint logic; without it a checkpoint only
                charges the bare check cost.

        Raises:
            ValueError: If num_cores is less than 1.
        """
        if num_cores < 1:
            raise ValueError(f"num_cores must be >= 1, got {num_cores}")
        self.clock = VirtualClock()
        self.occurrences = OccurrenceQueue()
        self.cores = [Core(id=i) for i in range(num_cores)]
        self.tasks: list[Task] = []
        self.fastcalldown = fastcalldown
        self.steps = 0

    # ------------------------------------------------------------------ #
    # Tasks and placement
    # ------------------------------------------------------------------ #

    def add_task(
        self,
        kind: TaskKind,
        index: int,
        body: Optional[TaskBody] = None,
        core: Optional[int] = None,
        binding: PriorityClass = PriorityClass.ANY,
    ) -> Task:
        """Create a task, suspended unless placed on a core.

        Args:
            kind: Stack or App.
            index: Position in its coroutine pool.
            body: Behavior run on dispatch.
            core: Core to place it on, None to leave it suspended.
            binding: Event class the task serves.

        Returns:
            The new task.
        """
        task = Task(id=len(self.tasks), kind=kind, index=index, body=body, priority_binding=binding)
        self.tasks.append(task)
        if core is not None:
            self.cores[core].add(task)
            task.state = TaskState.RUNNABLE
        return task

    def place(self, task: Task, core_id: int) -> bool:
        """Move a task to a core, at its next yield if it holds its core now.

        Returns:
            True if moved immediately, False if deferred.
        """
        if task.core == core_id:
            task.migrate_to = None
            return True
        if task.core >= 0 and self.cores[task.core].current is task:
            task.migrate_to = core_id
            return False
        self._move(task, core_id)
        return True

    def _move(self, task: Task, core_id: int) -> None:
        if task.core >= 0:
            self.cores[task.core].remove(task)
        target = self.cores[core_id]
        target.add(task)
        task.migrate_to = None
        if task.state is not TaskState.SUSPENDED:
            self.wake(target, self.clock.now)
        logger.debug("%s moved to core %d", task.name, core_id)

    def resume(self, task: Task) -> None:
        """Make a suspended task runnable again on its core."""
        task.draining = False
        if task.state is TaskState.SUSPENDED:
            task.state = TaskState.RUNNABLE
        if task.core >= 0:
            self.wake(self.cores[task.core], self.clock.now)

    def retire(self, task: Task) -> None:
        """Suspend a task once it has finished its remaining work."""
        task.draining = True
        holding = task.core >= 0 and self.cores[task.core].current is task
        if not holding and not task.has_work():
            task.state = TaskState.SUSPENDED
            task.draining = False

    # ------------------------------------------------------------------ #
    # Time
    # ------------------------------------------------------------------ #

    def schedule(
        self,
        t: int,
        callback: Optional[OccurrenceCallback] = None,
        label: str = "",
        payload: Any = None,
    ) -> Occurrence:
        """Schedule an arrival or timer.

        Raises:
            ValueError: If ``t`` lies before the clock.
        """
        if t < self.clock.now:
            raise ValueError(f"Cannot schedule at {t}, clock is at {self.clock.now}")
        return self.occurrences.schedule(t, callback, label, payload)

    def advance(self, until: int) -> list[Occurrence]:
        """Fire everything due by ``until`` and move the clock there.

        Args:
            until: Target time, not before the clock.

        Returns:
            Fired occurrences in deadline order, ties by insertion.
        """
        if until < self.clock.now:
            raise ValueError(f"Cannot advance from {self.clock.now} back to {until}")
        fired = []
        while (occurrence := self.occurrences.pop_due(until)) is not None:
            self.clock.advance_to(occurrence.t)
            if occurrence.callback is not None:
                occurrence.callback(occurrence)
            fired.append(occurrence)
        self.clock.advance_to(until)
        return fired

    def wake(self, core: Core, t: int) -> None:
        """Wake a sleeping core at time ``t``."""
        if core.sleeping:
            core.sleeping = False
            core.idle_until(t)

    def _earliest_awake(self) -> Optional[Core]:
        best = None
        for core in self.cores:
            if not core.sleeping and (best is None or core.now < best.now):
                best = core
        return best

    def _catch_up(self, core: Core) -> None:
        # Only the earliest core may pull the clock forward
        if core.now <= self.clock.now:
            return
        for other in self.cores:
            if other is not core and not other.sleeping and other.now < core.now:
                return
        self.advance(core.now)

    # ------------------------------------------------------------------ #
    # Scheduling
    # ------------------------------------------------------------------ #

    def _start(self, core: Core, task: Task) -> Task:
        task.state = TaskState.RUNNING
        task.run_start = core.now
        task.dispatches += 1
        core.current = task
        return task

    def dispatch(self, core: Core) -> Optional[Task]:
        """Pick the next task to run on a core.

        Order: the stack coroutine when its NIC deadline has expired with
        work pending, then a High-bound task with High work, then
        round-robin over tasks with work.

        Returns:
            The dispatched task, or None if nothing has work.
        """
        now = core.now
        live = [t for t in core.run_queue if t.state is not TaskState.SUSPENDED]
        for task in live:
            if task.kind is TaskKind.STACK and task.body is not None and task.body.urgent(now):
                return self._start(core, task)
        for task in live:
            if (
                task.priority_binding is PriorityClass.HIGH
                and task.body is not None
                and task.body.has_high()
            ):
                return self._start(core, task)
        n = len(core.run_queue)
        for k in range(n):
            i = (core.rr_next + k) % n
            task = core.run_queue[i]
            if task.state is TaskState.SUSPENDED or not task.has_work():
                continue
            core.rr_next = (i + 1) % n
            return self._start(core, task)
        return None

    def _release(self, core: Core, task: Task) -> None:
        core.current = None
        if task.state is TaskState.RUNNING:
            task.state = TaskState.RUNNABLE
        if task.draining and not task.has_work():
            task.state = TaskState.SUSPENDED
            task.draining = False
            logger.debug("%s suspended on core %d", task.name, core.id)
        if task.migrate_to is not None:
            self._move(task, task.migrate_to)

    def step(self, core: Core) -> None:
        """Run one step of the core's current or next task."""
        task = core.current
        if task is None:
            task = self.dispatch(core)
            if task is None:
                core.sleeping = True
                return
        self.steps += 1
        before = core.now
        outcome = task.body.step(task, core) if task.body is not None else StepOutcome.IDLE
        if outcome is StepOutcome.CONTINUE and core.now > before:
            return
        self._release(core, task)

    def run(self, until: int) -> None:
        """Run the simulation up to ``until``.

        On return every occurrence due by ``until`` has fired and every
        core's local time is at least ``until``.
        """
        while True:
            core = self._earliest_awake()
            horizon = until if core is None else min(core.now, until)
            t_next = self.occurrences.peek_time()
            if t_next is not None and t_next <= horizon:
                self.advance(t_next)
                continue
            if core is None or core.now >= until:
                break
            self._catch_up(core)
            self.step(core)
        if until > self.clock.now:
            self.advance(until)
        for core in self.cores:
            core.idle_until(until)

    # ------------------------------------------------------------------ #
    # Checkpointed work
    # ------------------------------------------------------------------ #

    def checkpoint(self, core: Core, task: Optional[Task]) -> Actions:
        """Run one fastcalldown check at the core's local time.

        Returns:
            Actions the check triggered.
        """
        self._catch_up(core)
        if self.fastcalldown is None:
            core.charge(ChargeKind.CHECK, CHECK_COST_NS)
            return frozenset()
        return self.fastcalldown.check(core, task, core.now)

    def progress_segment(self, core: Core, task: Task) -> Optional[Actions]:
        """Take the due checkpoint of a segment, or else run its next chunk.

        Returns:
            Actions of the checkpoint taken, or None if a chunk ran.
        """
        run = task.segment
        if run is None:
            raise ValueError(f"{task.name} has no segment in progress")
        if run.checkpoint_due:
            run.checkpoint_due = False
            run.checkpoints_run += 1
            return self.checkpoint(core, task)
        core.charge(ChargeKind.APP, run.next_chunk())
        return None

    def run_segment(self, task: Task, segment: WorkSegment) -> list[Actions]:
        """Execute a work segment to its end or to the first yield.

        Time advances by the segment duration plus checkpoint costs. A
        segment interrupted by Reschedule or PriorityYield stays on the
        task for later resumption.

        Args:
            task: Running task; must be placed on a core.
            segment: Work to execute.

        Returns:
            Action set of every checkpoint taken, in order.
        """
        core = self.cores[task.core]
        task.segment = SegmentRun(segment)
        outcomes: list[Actions] = []
        while not task.segment.finished:
            actions = self.progress_segment(core, task)
            if actions is None:
                continue
            outcomes.append(actions)
            if actions & YIELD_ACTIONS:
                return outcomes
        task.segment = None
        return outcomes
