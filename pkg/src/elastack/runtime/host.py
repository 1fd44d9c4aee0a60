"""A simulated server host: NIC, stack and application coroutines on logical cores.

HostRuntime owns every layer and wires them together: NIC arrivals wake
the core of the owning stack coroutine, emitted events wake the core of
the consuming application coroutine, and every socket call runs an
implicit fastcalldown check on the core it is made from.
"""

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Optional

from elastack.constants import (
    DEFAULT_CHECKPOINT_INTERVAL_NS,
    DEFAULT_RESPONSE_BYTES,
    DEFAULT_RSS_GROUPS,
    NIC_QUEUE_CAPACITY,
    CallupLayer,
    ChargeKind,
    CoreRole,
    ExtractionMode,
    FcdAction,
    Priority,
    PriorityClass,
    TaskKind,
    TaskState,
)
from elastack.driver import Driver, tx_cost_ns
from elastack.engine import Core, Engine, Occurrence, Task
from elastack.errors import InvalidPlanError
from elastack.events import Event, EventFramework
from elastack.fastpath import (
    YIELD_ACTIONS,
    FastCallDown,
    FcdState,
    FcdThresholds,
    register_callup,
)
from elastack.metrics import CpuAccount, LatencyRecorder, TimelineRow, p99_or_none
from elastack.nic import Nic, NicQueue, Packet, RequestDescriptor
from elastack.resources import MigrationReport, ResourceManager, ResourcePlan, StatisticPeriod
from elastack.runtime.app import AppCoroutine
from elastack.runtime.stack import StackCoroutine
from elastack.tcp import TcpLayer
from elastack.workload import (
    Arrival,
    ArrivalSchedule,
    IoTServer,
    RequestRecord,
    ServeJob,
    keyword_classifier,
    message_boundary_classifier,
)

logger = logging.getLogger(__name__)

Route = dict[Priority, int]


@dataclass
class HostOptions:
    """Static configuration of a host.

    Attributes:
        num_cores: Logical cores.
        nic_queues: NIC rings, one per RSS flow group.
        nic_capacity: Descriptors per ring.
        rx_capacity: Driver receive packets per class, None for unbounded.
        thresholds: Fastcalldown thresholds; ``priority_check`` enables
            the priority yield.
        checkpoint_interval_ns: Checkpoint spacing in service work, None
            for a single checkpoint at the end of each request.
        extraction: Extraction points to enable.
        event_prio: High queues in event channels.
        ooo_prio: Out-of-order receive of complete High messages.
        driver_prio: High buffers in the driver.
        diffluence: Route High and Low events of a flow to different
            application coroutines.
        response_bytes: Response size.
        pool_stacks: Stack coroutines created at start.
        pool_apps: Application coroutines created at start.
    """

    num_cores: int = 1
    nic_queues: int = DEFAULT_RSS_GROUPS
    nic_capacity: int = NIC_QUEUE_CAPACITY
    rx_capacity: Optional[int] = None
    thresholds: FcdThresholds = field(default_factory=FcdThresholds)
    checkpoint_interval_ns: Optional[int] = DEFAULT_CHECKPOINT_INTERVAL_NS
    extraction: ExtractionMode = ExtractionMode.NONE
    event_prio: bool = True
    ooo_prio: bool = True
    driver_prio: bool = True
    diffluence: bool = False
    response_bytes: int = DEFAULT_RESPONSE_BYTES
    pool_stacks: int = 1
    pool_apps: int = 1


@dataclass
class _Snapshot:
    offered: int = 0
    completed: int = 0
    drops: int = 0
    packets_in: int = 0
    packets_out: int = 0
    work_ns: dict[int, int] = field(default_factory=dict)
    account: CpuAccount = field(default_factory=CpuAccount)


class HostRuntime:
    """Everything running on one simulated server.

    Example:
        >>> host = HostRuntime(HostOptions(num_cores=1, nic_queues=1), pack(1, 1, 1, 1))
        >>> host.load_schedule(generate(spec))
        >>> host.run(until=10_000_000)
        >>> host.completed
        10
    """

    def __init__(self, options: HostOptions, plan: ResourcePlan) -> None:
        """Create the pool of coroutines and put the initial plan in effect.

        Args:
            options: Host configuration.
            plan: Initial resource plan.

        Raises:
            InvalidPlanError: If the plan does not fit the host.
        """
        self.options = options
        self.thresholds = options.thresholds
        self.fcd = FastCallDown(options.thresholds, hooks=self)
        self.engine = Engine(options.num_cores, self.fcd)
        self.nic = Nic(num_queues=options.nic_queues, capacity=options.nic_capacity)
        self.nic.on_arrival = self._on_arrival
        self.events = EventFramework(prioritized=options.event_prio)
        self.events.on_emit = self._on_emit
        self.events.checkpoint = self._implicit_check
        self.tcp = TcpLayer(
            emit=self.events.emit, tx=self._route_tx, priority_receive=options.ooo_prio
        )
        self.tcp.checkpoint = self._implicit_check
        self.server = IoTServer(
            self.tcp,
            options.checkpoint_interval_ns,
            response_bytes=options.response_bytes,
            priority_recv=options.ooo_prio,
        )
        self._segments_per_response = len(self.tcp.segment(options.response_bytes))

        self.stacks: list[StackCoroutine] = []
        for i in range(max(options.pool_stacks, plan.stack_coroutines)):
            driver = Driver(rx_capacity=options.rx_capacity, prioritized=options.driver_prio)
            stack = StackCoroutine(self, i, driver)
            stack.task = self.engine.add_task(TaskKind.STACK, i, stack)
            self.stacks.append(stack)
        self.apps: list[AppCoroutine] = []
        for j in range(max(options.pool_apps, plan.app_coroutines)):
            self.events.add_consumer(j)
            app = AppCoroutine(self, j, self.server)
            app.task = self.engine.add_task(TaskKind.APP, j, app)
            self.apps.append(app)
        self._register_extraction(options.extraction)

        self._core: Optional[Core] = None
        self._task: Optional[Task] = None
        self._queues_of: dict[int, list[NicQueue]] = {}
        self._queue_owner: dict[int, int] = {}
        self._awaiting: dict[int, int] = {}
        self._arrivals: list[Arrival] = []
        self._next_arrival = 0

        self.flows: list[int] = []
        self.requests: dict[int, RequestRecord] = {}
        self.offered = 0
        self.completed = 0
        self.packets_out = 0
        self.tx_drops = 0
        self.latency = LatencyRecorder()
        self.latency_by_priority = LatencyRecorder()
        self._period_latency = LatencyRecorder()

        self.manager: Optional[ResourceManager] = None
        self.dynamic = False
        self.timeline: list[TimelineRow] = []
        self.plan_changes: list[dict[str, Any]] = []
        self._period_index = 0
        self._period_start = 0
        self._last = _Snapshot()

        self.plan: Optional[ResourcePlan] = None
        self.apply_plan(plan)

    # ------------------------------------------------------------------ #
    # Wiring
    # ------------------------------------------------------------------ #

    def _register_extraction(self, mode: ExtractionMode) -> None:
        if mode in (ExtractionMode.DRIVER, ExtractionMode.BOTH):
            register_callup(
                CallupLayer.DRIVER, keyword_classifier, drivers=[s.driver for s in self.stacks]
            )
        if mode in (ExtractionMode.TCP, ExtractionMode.BOTH):
            register_callup(CallupLayer.TCP, message_boundary_classifier, tcp=self.tcp)

    def queues_of(self, stack: int) -> list[NicQueue]:
        """Get the NIC rings of the flow groups a stack coroutine owns."""
        return self._queues_of.get(stack, [])

    def fastcalldown_state(self, core_id: int) -> FcdState:
        """Get the fastcalldown timestamps of a core."""
        return self.fcd.state(core_id)

    def _wake_task(self, task: Optional[Task], t: int) -> None:
        if task is None or task.core < 0 or task.state is TaskState.SUSPENDED:
            return
        self.engine.wake(self.engine.cores[task.core], t)

    def _on_arrival(self, queue: NicQueue, packet: Packet, now: int) -> None:
        owner = self._queue_owner.get(queue.queue_id)
        if owner is not None:
            self._wake_task(self.stacks[owner].task, now)

    def _on_emit(self, consumer: int, event: Event) -> None:
        self._wake_task(self.apps[consumer].task, event.t_emit)

    # ------------------------------------------------------------------ #
    # Running context and fastcalldown
    # ------------------------------------------------------------------ #

    @contextmanager
    def running(self, core: Core, task: Optional[Task]) -> Iterator[None]:
        """Mark ``task`` as running on ``core`` for implicit checks."""
        previous = (self._core, self._task)
        self._core, self._task = core, task
        try:
            yield
        finally:
            self._core, self._task = previous

    def _implicit_check(self) -> None:
        if self._core is None:
            return
        self.fastcalldown()

    def fastcalldown(self, core: Optional[Core] = None) -> frozenset[FcdAction]:
        """Run a fastcalldown check, as application code does inside long loops.

        Args:
            core: Core to check on; defaults to the core of the running task.

        Returns:
            Triggered actions. Yield actions are also handed to the running
            application coroutine, which gives up its core at its next step
            boundary.

        Raises:
            RuntimeError: If no core is given outside a running coroutine.
        """
        core = core or self._core
        if core is None:
            raise RuntimeError("fastcalldown needs a core outside a running coroutine")
        task = self._task if core is self._core else None
        actions = self.engine.checkpoint(core, task)
        if task is not None and actions & YIELD_ACTIONS and isinstance(task.body, AppCoroutine):
            task.body.yield_actions = task.body.yield_actions | actions
        return actions

    def _live_stacks(self, core: Core) -> list[StackCoroutine]:
        return [
            task.body
            for task in core.run_queue
            if task.kind is TaskKind.STACK
            and task.state is not TaskState.SUSPENDED
            and isinstance(task.body, StackCoroutine)
        ]

    def hosts_stack(self, core: Core) -> bool:
        """The core hosts a live stack coroutine."""
        return core.stack_task() is not None

    def drain_nic(self, core: Core) -> None:
        """Drain the rings of every stack coroutine on the core."""
        for stack in self._live_stacks(core):
            stack.drain_nic(core)

    def tcp_batch(self, core: Core) -> None:
        """Run one TCP batch for every stack coroutine on the core."""
        for stack in self._live_stacks(core):
            stack.tcp_batch(core)

    def high_waiting(self, core: Core, task: Task) -> bool:
        """High events wait on the core while ``task`` serves a Low job."""
        body = task.body
        if not isinstance(body, AppCoroutine) or not body.serving_low:
            return False
        return any(
            other.kind is TaskKind.APP
            and other.state is not TaskState.SUSPENDED
            and self.events.pending_high(other.index) > 0
            for other in core.run_queue
        )

    # ------------------------------------------------------------------ #
    # Transmission and request bookkeeping
    # ------------------------------------------------------------------ #

    def _route_tx(self, packet: Packet) -> None:
        group = self.nic.rss.group_of(packet.flow_id)
        stack = self.stacks[self.plan.group_to_stack[group]]
        if not stack.driver.tx_enqueue(packet):
            self.tx_drops += 1
            return
        core = self._core
        if core is not None and stack.task is not None and stack.task.core == core.id:
            self.flush(core, stack)
        else:
            self._wake_task(stack.task, core.now if core is not None else self.engine.clock.now)

    def flush(self, core: Core, stack: StackCoroutine) -> None:
        """Transmit everything a stack coroutine has queued, charging the core."""
        packets = stack.driver.tx_drain()
        if not packets:
            return
        core.charge(ChargeKind.STACK, tx_cost_ns(len(packets)))
        for packet in packets:
            packet.t_leave_server = core.now
            self.packets_out += 1
            if packet.request is not None:
                self._response_sent(packet.request, core.now)

    def _response_sent(self, request: RequestDescriptor, now: int) -> None:
        remaining = self._awaiting.pop(request.request_id, self._segments_per_response) - 1
        if remaining > 0:
            self._awaiting[request.request_id] = remaining
            return
        self.completed += 1
        record = self.requests.get(request.request_id)
        if record is None:
            return
        record.t_leave_server = now
        latency = record.latency_ns
        self.latency.record(record.request_class, latency)
        self.latency_by_priority.record(record.priority.value, latency)
        self._period_latency.record(record.priority.value, latency)

    def service_started(self, job: ServeJob, now: int) -> None:
        """Note when a request's service work begins."""
        record = self.requests.get(job.request.request_id)
        if record is not None and record.t_service_start < 0:
            record.t_service_start = now

    # ------------------------------------------------------------------ #
    # Traffic
    # ------------------------------------------------------------------ #

    def open_flows(self, flows: list[int]) -> None:
        """Establish connections and bind their events under the current plan."""
        for flow_id in flows:
            if flow_id in self.tcp.flows:
                continue
            self.tcp.open_flow(flow_id)
            self.flows.append(flow_id)
            self._bind(flow_id, self._route_for(flow_id, self.plan))

    def load_schedule(self, schedule: ArrivalSchedule) -> None:
        """Open the schedule's flows and feed its packets to the NIC on time."""
        self.open_flows(schedule.flows)
        for record in schedule.requests:
            self.requests[record.id] = record
        self._arrivals = schedule.arrivals
        self._next_arrival = 0
        self._schedule_arrival()

    def _schedule_arrival(self) -> None:
        if self._next_arrival < len(self._arrivals):
            arrival = self._arrivals[self._next_arrival]
            self.engine.schedule(arrival.t, self._arrive, label="arrival")

    def _arrive(self, occurrence: Occurrence) -> None:
        arrival = self._arrivals[self._next_arrival]
        self._next_arrival += 1
        if arrival.packet.payload:
            self.offered += 1
        self.nic.receive(arrival.packet, now=occurrence.t)
        self._schedule_arrival()

    def run(self, until: int) -> None:
        """Run the host up to virtual time ``until``."""
        self.engine.run(until)

    # ------------------------------------------------------------------ #
    # Plans
    # ------------------------------------------------------------------ #

    def _route_for(self, flow_id: int, plan: ResourcePlan) -> Route:
        apps = plan.app_coroutines
        if self.options.diffluence and apps >= 2:
            return {Priority.HIGH: 0, Priority.LOW: 1 + flow_id % (apps - 1)}
        consumer = flow_id % apps
        return {Priority.HIGH: consumer, Priority.LOW: consumer}

    def _bind(self, flow_id: int, route: Route) -> None:
        self.events.unbind(flow_id)
        if route[Priority.HIGH] == route[Priority.LOW]:
            self.events.q_epoll_ctrl(flow_id, route[Priority.HIGH], PriorityClass.ANY)
            return
        self.events.q_epoll_ctrl(flow_id, route[Priority.HIGH], PriorityClass.HIGH)
        self.events.q_epoll_ctrl(flow_id, route[Priority.LOW], PriorityClass.LOW)

    def _binding_class(self, app: int, plan: ResourcePlan) -> PriorityClass:
        if not self.options.diffluence or plan.app_coroutines < 2:
            return PriorityClass.ANY
        return PriorityClass.HIGH if app == 0 else PriorityClass.LOW

    def _place_pool(
        self, tasks: list[Task], cores: tuple[int, ...], report: MigrationReport
    ) -> None:
        for i, task in enumerate(tasks):
            if i < len(cores):
                target = cores[i]
                if task.state is TaskState.SUSPENDED:
                    report.woken.append(task.name)
                if task.core >= 0 and task.core != target:
                    report.moved.append((task.name, task.core, target))
                self.engine.place(task, target)
                self.engine.resume(task)
            elif task.state is not TaskState.SUSPENDED and not task.draining:
                self.engine.retire(task)
                report.suspended.append(task.name)

    def apply_plan(self, plan: ResourcePlan) -> MigrationReport:
        """Put a plan in effect.

        Stack and application coroutines beyond the plan drain their
        remaining work and suspend; the rest are woken and moved (a task
        holding its core moves at its next yield). Flow groups change
        owner between batches and flows are rebound to their new
        application coroutines.

        Args:
            plan: Plan to apply.

        Returns:
            What changed.

        Raises:
            InvalidPlanError: If the plan needs more cores, coroutines or
                flow groups than the host has.
        """
        plan.validate()
        if plan.num_cores != len(self.engine.cores):
            raise InvalidPlanError(
                f"Plan covers {plan.num_cores} cores, host has {len(self.engine.cores)}"
            )
        if plan.stack_coroutines > len(self.stacks) or plan.app_coroutines > len(self.apps):
            raise InvalidPlanError(f"{plan.describe()} references coroutines beyond the pool")
        if len(plan.group_to_stack) != self.nic.rss.num_groups:
            raise InvalidPlanError(
                f"Plan maps {len(plan.group_to_stack)} flow groups, NIC has {self.nic.rss.num_groups}"
            )
        report = MigrationReport()
        if plan == self.plan:
            return report
        old = self.plan

        self._queues_of = {}
        self._queue_owner = {}
        for group, stack in enumerate(plan.group_to_stack):
            queue = self.nic.rss.group_to_queue[group]
            self._queue_owner[queue] = stack
            owned = self._queues_of.setdefault(stack, [])
            if self.nic.queues[queue] not in owned:
                owned.append(self.nic.queues[queue])
            if old is not None and old.group_to_stack[group] != stack:
                report.groups.append((group, old.group_to_stack[group], stack))
        self.plan = plan

        for core, role in zip(self.engine.cores, plan.core_roles):
            core.role = role
        self._place_pool([s.task for s in self.stacks], plan.stack_cores, report)
        self._place_pool([a.task for a in self.apps], plan.app_cores, report)
        for app in self.apps:
            app.task.priority_binding = self._binding_class(app.index, plan)

        for flow_id in self.flows:
            route = self._route_for(flow_id, plan)
            if old is None or route != self._route_for(flow_id, old):
                self._bind(flow_id, route)
                report.rebound_flows += 1

        now = self.engine.clock.now
        self.plan_changes.append(
            {
                "t_ns": now,
                "stack_coroutines": plan.stack_coroutines,
                "app_coroutines": plan.app_coroutines,
                "core_roles": [role.value for role in plan.core_roles],
            }
        )
        if old is not None:
            logger.info("Plan %s -> %s at %d ns", old.describe(), plan.describe(), now)
        return report

    # ------------------------------------------------------------------ #
    # Statistic periods
    # ------------------------------------------------------------------ #

    def _snapshot(self) -> _Snapshot:
        return _Snapshot(
            offered=self.offered,
            completed=self.completed,
            drops=self.nic.total_drops,
            packets_in=sum(q.enqueued for q in self.nic.queues),
            packets_out=self.packets_out,
            work_ns={core.id: core.work_ns for core in self.engine.cores},
            account=CpuAccount.from_cores(self.engine.cores),
        )

    def start_periods(self, manager: ResourceManager, dynamic: bool = True) -> None:
        """Measure every statistic period and, if dynamic, re-plan at its end.

        Args:
            manager: Load detection and plan decisions.
            dynamic: Apply the manager's decisions; otherwise only record
                the timeline.
        """
        self.manager = manager
        self.dynamic = dynamic
        self._period_start = self.engine.clock.now
        self._last = self._snapshot()
        self.engine.schedule(self._period_start + manager.period_ns, self._on_period, label="period")

    def _on_period(self, occurrence: Occurrence) -> None:
        manager = self.manager
        now = occurrence.t
        current = self._snapshot()
        last = self._last
        period = StatisticPeriod(
            index=self._period_index,
            t_start=self._period_start,
            t_end=now,
            offered_requests=current.offered - last.offered,
            packets_in=current.packets_in - last.packets_in,
            packets_out=current.packets_out - last.packets_out,
            drops=current.drops - last.drops,
            completed=current.completed - last.completed,
            event_backlog=self.events.total_pending,
            buffer_backlog=sum(len(s.driver.rx) for s in self.stacks),
            core_work_ns={
                core_id: work - last.work_ns.get(core_id, 0)
                for core_id, work in current.work_ns.items()
            },
        )
        summary = manager.collect(period)
        spent = current.account.since(last.account)
        plan = self.plan
        self.timeline.append(
            TimelineRow(
                period=period.index,
                t_start_ns=period.t_start,
                t_end_ns=period.t_end,
                offered=period.offered_requests,
                load_pct=round(summary.load_pct, 6),
                stack_coroutines=plan.stack_coroutines,
                app_coroutines=plan.app_coroutines,
                core_roles="/".join(role.value for role in plan.core_roles),
                completed=period.completed,
                drops=period.drops,
                eta=spent.efficiency() if spent.gamma_total else None,
                p99_all_ns=p99_or_none(self._period_latency, LatencyRecorder.ALL),
                p99_high_ns=p99_or_none(self._period_latency, Priority.HIGH.value),
                p99_low_ns=p99_or_none(self._period_latency, Priority.LOW.value),
            )
        )
        if self.dynamic:
            decided = manager.decide(summary, plan)
            if decided != plan:
                report = manager.apply(decided)
                logger.info(
                    "Period %d: load %.1f%%, moved %d, rebound %d flows",
                    period.index,
                    summary.load_pct,
                    len(report.moved),
                    report.rebound_flows,
                )
        self._period_latency = LatencyRecorder()
        self._period_index += 1
        self._period_start = now
        self._last = current
        self.engine.schedule(now + manager.period_ns, self._on_period, label="period")

    # ------------------------------------------------------------------ #
    # Results
    # ------------------------------------------------------------------ #

    @property
    def incomplete(self) -> int:
        """Requests offered but never answered."""
        return sum(1 for record in self.requests.values() if not record.complete)

    def cpu_account(self) -> CpuAccount:
        """Get the CPU time consumed so far over all cores."""
        return CpuAccount.from_cores(self.engine.cores)

    def cores_in_role(self, role: CoreRole) -> list[int]:
        """Get the cores currently in a role."""
        return [core.id for core in self.engine.cores if core.role is role]
