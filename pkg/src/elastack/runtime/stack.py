"""Stack coroutine: NIC draining, TCP batches and transmission for its flow groups."""

from typing import TYPE_CHECKING, Optional

from elastack.constants import TCP_BATCH_PACKETS, ChargeKind, StepOutcome
from elastack.driver import Driver
from elastack.engine.cores import Core, Task
from elastack.nic.queue import NicQueue

if TYPE_CHECKING:
    from elastack.runtime.host import HostRuntime


class StackCoroutine:
    """Network stack instance serving the RSS groups its plan assigns it.

    Attributes:
        host: Runtime the coroutine belongs to.
        index: Stack coroutine number (producer id of its events).
        driver: Private driver instance with its own priority buffers.
        task: Engine task running this body.
        polled: Packets moved from NIC rings into the driver.
        batches: TCP batches run.
    """

    def __init__(self, host: "HostRuntime", index: int, driver: Driver) -> None:
        """Initialize the coroutine.

        Args:
            host: Runtime the coroutine belongs to.
            index: Stack coroutine number.
            driver: Driver instance owned by this coroutine.
        """
        self.host = host
        self.index = index
        self.driver = driver
        self.task: Optional[Task] = None
        self.polled = 0
        self.batches = 0

    def queues(self) -> list[NicQueue]:
        """Get the NIC rings of the flow groups this coroutine owns."""
        return self.host.queues_of(self.index)

    def has_work(self) -> bool:
        """Packets wait in an owned ring or in the driver buffers."""
        if len(self.driver.rx) or len(self.driver.tx):
            return True
        return any(queue.ring for queue in self.queues())

    def has_high(self) -> bool:
        """Stack coroutines are never High-bound."""
        return False

    def urgent(self, now: int) -> bool:
        """The NIC threshold of the hosting core expired with packets waiting."""
        if self.task is None or self.task.core < 0:
            return False
        state = self.host.fastcalldown_state(self.task.core)
        if now - state.last_nic_check < self.host.thresholds.nic_check_interval:
            return False
        return any(queue.ring for queue in self.queues())

    def drain_nic(self, core: Core) -> None:
        """Drain every owned ring into the driver buffers."""
        for queue in self.queues():
            poll = self.driver.drain(queue)
            core.charge(ChargeKind.STACK, poll.cost_ns)
            self.polled += poll.moved

    def tcp_batch(self, core: Core) -> None:
        """Process one TCP batch from the receive buffers, then flush sends."""
        batch = self.driver.rx.pop_batch(TCP_BATCH_PACKETS)
        if batch:
            result = self.host.tcp.process_batch(batch, now=core.now, producer=self.index)
            core.charge(ChargeKind.STACK, result.cost_ns)
            self.batches += 1
        self.host.flush(core, self)

    def step(self, task: Task, core: Core) -> StepOutcome:
        """Run one polling round: drain rings, one TCP batch, flush."""
        state = self.host.fastcalldown_state(core.id)
        self.drain_nic(core)
        state.last_nic_check = core.now
        self.tcp_batch(core)
        state.last_tcp_process = core.now
        return StepOutcome.YIELD
