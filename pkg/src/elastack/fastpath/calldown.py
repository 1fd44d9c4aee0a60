"""Fastcalldown: cheap timestamp checks embedded in API paths and long work.

Most checks only read the clock. When a threshold has expired the check
does the stack work itself (drain NIC rings, run a TCP batch) or tells
the running coroutine to yield, which lets a network stack share a core
with applications without interrupts or time slices.
"""

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Final, Optional, Protocol

from elastack.constants import (
    CHECK_COST_NS,
    COROUTINE_BUDGET_NS,
    COROUTINE_YIELD_COST_NS,
    EMPTY_QUEUE_CHECK_COST_NS,
    IMPLICIT_CALLS_PER_REQUEST,
    NIC_CHECK_INTERVAL_NS,
    TCP_PROCESS_INTERVAL_NS,
    ChargeKind,
    FcdAction,
)

if TYPE_CHECKING:
    from elastack.engine.cores import Core, Task

logger = logging.getLogger(__name__)

# Actions after which the running coroutine gives up its core
YIELD_ACTIONS: Final[frozenset[FcdAction]] = frozenset(
    {FcdAction.RESCHEDULE, FcdAction.PRIORITY_YIELD}
)


@dataclass(frozen=True)
class FcdThresholds:
    """Trigger thresholds and the cost of a bare check.

    Attributes:
        nic_check_interval: Drain NIC rings at least this often.
        tcp_process_interval: Run a TCP batch at least this often.
        coroutine_budget: Longest continuous run before a reschedule.
        check_cost: Cost of a check that triggers nothing.
        priority_check: Yield Low work when High events wait on the core.
    """

    nic_check_interval: int = NIC_CHECK_INTERVAL_NS
    tcp_process_interval: int = TCP_PROCESS_INTERVAL_NS
    coroutine_budget: int = COROUTINE_BUDGET_NS
    check_cost: int = CHECK_COST_NS
    priority_check: bool = False

    def __post_init__(self) -> None:
        """Validate thresholds."""
        for name in ("nic_check_interval", "tcp_process_interval", "coroutine_budget"):
            value = getattr(self, name)
            if value <= 0:
                raise ValueError(f"{name} must be > 0, got {value}")
        if self.check_cost < 0:
            raise ValueError(f"check_cost must be >= 0, got {self.check_cost}")


@dataclass
class FcdState:
    """Per-core time of the last NIC drain and the last TCP batch."""

    last_nic_check: int = 0
    last_tcp_process: int = 0


class CheckpointHooks(Protocol):
    """Stack work and queue inspection a check may need."""

    def hosts_stack(self, core: "Core") -> bool:
        """The core hosts a live stack coroutine."""
        ...

    def drain_nic(self, core: "Core") -> None:
        """Drain the rings of the core's stack coroutine, charging the core."""
        ...

    def tcp_batch(self, core: "Core") -> None:
        """Run one TCP batch and flush sends, charging the core."""
        ...

    def high_waiting(self, core: "Core", task: "Task") -> bool:
        """High events wait on the core while ``task`` serves Low work."""
        ...


@dataclass
class FcdCounters:
    """How often checks ran and what they triggered."""

    checks: int = 0
    idle_checks: int = 0
    actions: dict[FcdAction, int] = field(default_factory=lambda: {a: 0 for a in FcdAction})


class FastCallDown:
    """Checkpoint logic shared by every core.

    Example:
        >>> fcd = FastCallDown(FcdThresholds())
        >>> core = Core(id=0)
        >>> FcdAction.DRAIN_NIC in fcd.check(core, None, now=250_000)
        True
    """

    def __init__(
        self,
        thresholds: Optional[FcdThresholds] = None,
        hooks: Optional[CheckpointHooks] = None,
    ) -> None:
        """Initialize the checker.

        Args:
            thresholds: Trigger thresholds.
            hooks: Stack work run on trigger; without hooks a check only
                reports and records what it would trigger.
        """
        self.thresholds = thresholds or FcdThresholds()
        self.hooks = hooks
        self.states: dict[int, FcdState] = {}
        self.counters = FcdCounters()

    def state(self, core_id: int) -> FcdState:
        """Get the timestamps of a core."""
        state = self.states.get(core_id)
        if state is None:
            state = self.states[core_id] = FcdState()
        return state

    def check(self, core: "Core", task: Optional["Task"], now: int) -> frozenset[FcdAction]:
        """Run one checkpoint.

        Args:
            core: Core the check runs on; charged for the check and any
                triggered stack work.
            task: Running task, None outside a coroutine.
            now: Current local time of the core.

        Returns:
            Triggered actions, empty when nothing expired.
        """
        thresholds = self.thresholds
        hooks = self.hooks
        state = self.state(core.id)
        core.charge(ChargeKind.CHECK, thresholds.check_cost)
        self.counters.checks += 1

        actions = set()
        stack_here = hooks is None or hooks.hosts_stack(core)
        if stack_here and now - state.last_nic_check >= thresholds.nic_check_interval:
            actions.add(FcdAction.DRAIN_NIC)
            state.last_nic_check = now
            if hooks is not None:
                hooks.drain_nic(core)
        if stack_here and now - state.last_tcp_process >= thresholds.tcp_process_interval:
            actions.add(FcdAction.TCP_BATCH)
            state.last_tcp_process = now
            if hooks is not None:
                hooks.tcp_batch(core)
        if task is not None:
            if now - task.run_start >= thresholds.coroutine_budget:
                actions.add(FcdAction.RESCHEDULE)
            # after the stack work above, so a High event it just emitted counts
            if thresholds.priority_check and hooks is not None and hooks.high_waiting(core, task):
                actions.add(FcdAction.PRIORITY_YIELD)

        if not actions:
            self.counters.idle_checks += 1
        for action in actions:
            self.counters.actions[action] += 1
        return frozenset(actions)


def cost_compare(
    n_requests: int,
    empty_check_cost: int = EMPTY_QUEUE_CHECK_COST_NS,
    check_cost: int = CHECK_COST_NS,
    calls_per_request: int = IMPLICIT_CALLS_PER_REQUEST,
    yield_cost: int = COROUTINE_YIELD_COST_NS,
) -> tuple[int, int]:
    """Compare polling overhead of fastcalldown against coroutine mode.

    With fastcalldown each request passes ``calls_per_request`` checks
    and the queues are polled empty once; in coroutine mode every request
    costs a yield plus an empty poll.

    Args:
        n_requests: Requests served.
        empty_check_cost: Cost of polling an empty queue.
        check_cost: Cost of one non-triggering check.
        calls_per_request: Implicit call sites per request.
        yield_cost: Cost of one coroutine yield.

    Returns:
        (fastcalldown total ns, coroutine mode total ns).

    Raises:
        ValueError: If n_requests is less than 1.
    """
    if n_requests < 1:
        raise ValueError(f"n_requests must be >= 1, got {n_requests}")
    fcd_total = empty_check_cost + check_cost * calls_per_request * n_requests
    coroutine_total = (yield_cost + empty_check_cost) * n_requests
    return fcd_total, coroutine_total
