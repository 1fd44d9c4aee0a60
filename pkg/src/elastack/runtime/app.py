"""Application coroutine: event loop of the built-in request server."""

import logging
from typing import TYPE_CHECKING, Optional

from elastack.constants import WOULD_BLOCK, FcdAction, Priority, StepOutcome
from elastack.engine.cores import Core, SegmentRun, Task
from elastack.fastpath.calldown import YIELD_ACTIONS
from elastack.workload.server import IoTServer, ServeJob

if TYPE_CHECKING:
    from elastack.runtime.host import HostRuntime

logger = logging.getLogger(__name__)


class AppCoroutine:
    """Consumer of one event channel running the IoT server.

    Each step does one unit of work: a chunk or checkpoint of the job in
    service, or taking one event. A Low job interrupted by a priority
    yield is parked and resumed once no High event waits.

    Attributes:
        host: Runtime the coroutine belongs to.
        index: Consumer id of its event channel.
        server: Request handler.
        task: Engine task running this body.
        job: Job in service.
        preempted: Parked Low jobs with their progress, newest last.
        yield_actions: Yield actions raised by implicit checks this step.
        preemptions: Times a Low job was parked.
    """

    def __init__(self, host: "HostRuntime", index: int, server: IoTServer) -> None:
        """Initialize the coroutine.

        Args:
            host: Runtime the coroutine belongs to.
            index: Consumer id.
            server: Request handler shared by all application coroutines.
        """
        self.host = host
        self.index = index
        self.server = server
        self.task: Optional[Task] = None
        self.job: Optional[ServeJob] = None
        self.preempted: list[tuple[ServeJob, SegmentRun]] = []
        self.yield_actions: frozenset[FcdAction] = frozenset()
        self.preemptions = 0

    @property
    def serving_low(self) -> bool:
        """A job without the High label is in service."""
        return self.job is not None and self.job.priority is not Priority.HIGH

    def has_work(self) -> bool:
        """Events, a job or parked jobs are waiting."""
        return bool(self.job or self.preempted or self.host.events.pending(self.index))

    def has_high(self) -> bool:
        """High events wait in the channel."""
        return self.host.events.pending_high(self.index) > 0

    def urgent(self, now: int) -> bool:
        """Application coroutines have no deadline."""
        return False

    def step(self, task: Task, core: Core) -> StepOutcome:
        """Advance the job in service or take the next event."""
        self.yield_actions = frozenset()
        with self.host.running(core, task):
            if task.segment is None and self.preempted and not self.has_high():
                self.job, task.segment = self.preempted.pop()
            if task.segment is not None:
                return self._progress(task, core)
            return self._take_event(task, core)

    def _progress(self, task: Task, core: Core) -> StepOutcome:
        actions = self.host.engine.progress_segment(core, task)
        if actions is None:
            return StepOutcome.CONTINUE
        if task.segment is not None and task.segment.finished:
            job = self.job
            self.job = None
            task.segment = None
            if job is not None:
                self.server.respond(job)
        actions = actions | self.yield_actions
        if actions & YIELD_ACTIONS:
            return self._yield(task, actions)
        return StepOutcome.CONTINUE

    def _take_event(self, task: Task, core: Core) -> StepOutcome:
        event = self.host.events.q_get_event(self.index)
        if event is WOULD_BLOCK:
            return StepOutcome.IDLE
        if event.t_emit > core.now:
            core.idle_until(event.t_emit)
        job = self.server.app_serve(event)
        if job is None:
            return StepOutcome.CONTINUE
        self.job = job
        task.segment = SegmentRun(job.segment)
        self.host.service_started(job, core.now)
        if self.yield_actions & YIELD_ACTIONS:
            return self._yield(task, self.yield_actions)
        return StepOutcome.CONTINUE

    def _yield(self, task: Task, actions: frozenset[FcdAction]) -> StepOutcome:
        if FcdAction.PRIORITY_YIELD in actions and self.serving_low and task.segment is not None:
            self.preempted.append((self.job, task.segment))
            self.job = None
            task.segment = None
            self.preemptions += 1
            logger.debug("A%d parked a Low job at %d ns", self.index, self.host.engine.clock.now)
        return StepOutcome.YIELD
