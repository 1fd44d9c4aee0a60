"""Tests for the host runtime and its coroutines."""

import pytest

from elastack.constants import (
    NS_PER_MS,
    NS_PER_US,
    CoreRole,
    FcdAction,
    Priority,
    PriorityClass,
    TaskState,
)
from elastack.errors import InvalidPlanError
from elastack.resources import PolicyEntry, PolicyTable, ResourceManager, pack
from elastack.runtime import HostOptions, HostRuntime
from elastack.workload import WorkloadSpec, generate
from tests.conftest import make_packet


@pytest.fixture
def four_core_host() -> HostRuntime:
    """Provide a four-core host with room for K=2 and M=4."""
    options = HostOptions(num_cores=4, nic_queues=4, pool_stacks=2, pool_apps=4)
    return HostRuntime(options, pack(1, 1, 4, 4))


class TestHostRun:
    """Tests for running traffic through a host."""

    def test_every_request_answered(
        self, single_core_host: HostRuntime, small_workload: WorkloadSpec
    ) -> None:
        """Test a light load is served completely."""
        single_core_host.load_schedule(generate(small_workload))
        single_core_host.run(until=30 * NS_PER_MS)
        assert single_core_host.offered == 100
        assert single_core_host.completed == 100
        assert single_core_host.incomplete == 0

    def test_latency_covers_service(
        self, single_core_host: HostRuntime, small_workload: WorkloadSpec
    ) -> None:
        """Test no request is answered faster than its service time."""
        single_core_host.load_schedule(generate(small_workload))
        single_core_host.run(until=30 * NS_PER_MS)
        assert single_core_host.latency.count() == 100
        assert single_core_host.latency.histograms["request"].min_ns >= 5 * NS_PER_US

    def test_cpu_account(self, single_core_host: HostRuntime, small_workload: WorkloadSpec) -> None:
        """Test application work is a part of the consumed time."""
        single_core_host.load_schedule(generate(small_workload))
        single_core_host.run(until=30 * NS_PER_MS)
        account = single_core_host.cpu_account()
        assert 0.0 < account.efficiency() < 1.0

    def test_cores_reach_horizon(self, single_core_host: HostRuntime) -> None:
        """Test an idle host still advances every core."""
        single_core_host.run(until=NS_PER_MS)
        assert all(core.now >= NS_PER_MS for core in single_core_host.engine.cores)


class TestFastcalldown:
    """Tests for HostRuntime.fastcalldown."""

    def test_needs_core_outside_coroutine(self, single_core_host: HostRuntime) -> None:
        """Test an explicit core is required outside a running coroutine."""
        with pytest.raises(RuntimeError):
            single_core_host.fastcalldown()

    def test_nothing_expired(self, single_core_host: HostRuntime) -> None:
        """Test a check right after start triggers nothing."""
        core = single_core_host.engine.cores[0]
        assert single_core_host.fastcalldown(core) == frozenset()
        assert single_core_host.fcd.counters.idle_checks == 1

    def test_expired_nic_threshold_drains(self, single_core_host: HostRuntime) -> None:
        """Test an expired NIC threshold moves waiting packets into the driver."""
        single_core_host.nic.receive(make_packet(flow_id=99), now=0)
        stack = single_core_host.stacks[0]
        assert stack.has_work()
        core = single_core_host.engine.cores[0]
        core.idle_until(300 * NS_PER_US)
        actions = single_core_host.fastcalldown(core)
        assert FcdAction.DRAIN_NIC in actions
        assert FcdAction.TCP_BATCH in actions
        assert stack.polled == 1
        assert single_core_host.tcp.unknown_flow_segments == 1


class TestApplyPlan:
    """Tests for HostRuntime.apply_plan."""

    def test_initial_plan(self, four_core_host: HostRuntime) -> None:
        """Test coroutines beyond the initial plan stay suspended."""
        assert four_core_host.stacks[1].task.state is TaskState.SUSPENDED
        assert four_core_host.apps[0].task.core == 0
        assert four_core_host.cores_in_role(CoreRole.IDLE) == [1, 2, 3]

    def test_grow(self, four_core_host: HostRuntime) -> None:
        """Test growing wakes coroutines, moves A0 and hands over flow groups."""
        report = four_core_host.apply_plan(pack(2, 4, 4, 4))
        assert report.woken == ["S1", "A1", "A2", "A3"]
        assert report.moved == [("A0", 0, 3)]
        assert report.groups == [(1, 0, 1), (3, 0, 1)]
        assert four_core_host.cores_in_role(CoreRole.STACK_ONLY) == [0, 1]
        assert [q.queue_id for q in four_core_host.queues_of(1)] == [1, 3]

    def test_shrink_suspends(self, four_core_host: HostRuntime) -> None:
        """Test idle coroutines beyond a smaller plan suspend at once."""
        four_core_host.apply_plan(pack(2, 4, 4, 4))
        report = four_core_host.apply_plan(pack(1, 1, 4, 4))
        assert report.suspended == ["S1", "A1", "A2", "A3"]
        assert four_core_host.apps[3].task.state is TaskState.SUSPENDED

    def test_same_plan(self, four_core_host: HostRuntime) -> None:
        """Test applying the plan in effect changes nothing."""
        assert four_core_host.apply_plan(pack(1, 1, 4, 4)).empty

    def test_records_changes(self, four_core_host: HostRuntime) -> None:
        """Test every applied plan is logged with its time."""
        four_core_host.apply_plan(pack(2, 4, 4, 4))
        assert [c["stack_coroutines"] for c in four_core_host.plan_changes] == [1, 2]

    @pytest.mark.parametrize(
        "plan",
        [pack(1, 1, 2, 4), pack(3, 1, 4, 4), pack(1, 1, 4, 8)],
        ids=["cores", "pool", "groups"],
    )
    def test_mismatched_plan(self, four_core_host: HostRuntime, plan) -> None:
        """Test plans that do not fit the host are refused."""
        with pytest.raises(InvalidPlanError):
            four_core_host.apply_plan(plan)

    def test_flows_rebound(self, four_core_host: HostRuntime) -> None:
        """Test flows follow their application coroutine to the new plan."""
        four_core_host.open_flows([1, 2, 3, 4])
        report = four_core_host.apply_plan(pack(2, 4, 4, 4))
        assert report.rebound_flows == 3
        assert four_core_host.events.route_of(2, Priority.LOW) == 2


class TestDiffluence:
    """Tests for splitting a flow's events by class."""

    def test_classes_routed_apart(self) -> None:
        """Test High events go to A0 and Low events to the other apps."""
        options = HostOptions(num_cores=2, nic_queues=1, pool_apps=2, diffluence=True)
        host = HostRuntime(options, pack(1, 2, 2, 1, [CoreRole.SHARED, CoreRole.APP_ONLY]))
        host.open_flows([1, 2])
        assert host.events.route_of(1, Priority.HIGH) == 0
        assert host.events.route_of(1, Priority.LOW) == 1
        assert host.apps[0].task.priority_binding is PriorityClass.HIGH
        assert host.apps[1].task.priority_binding is PriorityClass.LOW

    def test_single_app_shares(self) -> None:
        """Test one application coroutine receives both classes."""
        options = HostOptions(num_cores=1, nic_queues=1, diffluence=True)
        host = HostRuntime(options, pack(1, 1, 1, 1))
        host.open_flows([1])
        assert host.events.route_of(1, Priority.HIGH) == host.events.route_of(1, Priority.LOW) == 0


class TestStatisticPeriods:
    """Tests for per-period measurement."""

    def test_timeline_rows(self, single_core_host: HostRuntime, small_workload: WorkloadSpec) -> None:
        """Test one row per period accounts for every offered request."""
        manager = ResourceManager(
            num_cores=1, num_groups=1, policy=PolicyTable([PolicyEntry(100.0, 1, 1)])
        )
        single_core_host.load_schedule(generate(small_workload))
        single_core_host.start_periods(manager, dynamic=False)
        single_core_host.run(until=30 * NS_PER_MS)
        rows = single_core_host.timeline
        assert [row.period for row in rows] == [0, 1, 2]
        assert sum(row.offered for row in rows) == 100
        assert rows[0].load_pct == pytest.approx(5.0)
        assert rows[1].offered == 0
