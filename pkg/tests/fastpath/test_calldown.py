"""Tests for fastcalldown checkpoints and fastcallup registration."""

import pytest

from elastack.constants import (
    CHECK_COST_NS,
    COROUTINE_YIELD_COST_NS,
    EMPTY_QUEUE_CHECK_COST_NS,
    NS_PER_MS,
    NS_PER_US,
    CallupLayer,
    ChargeKind,
    FcdAction,
    Priority,
    TaskKind,
)
from elastack.driver import Driver
from elastack.engine import Core, Engine, Task, WorkSegment
from elastack.errors import UnsupportedLayerError
from elastack.fastpath import FastCallDown, FcdThresholds, cost_compare, register_callup
from elastack.tcp import TcpLayer, encode_header
from elastack.workload import keyword_classifier, message_boundary_classifier


class RecordingHooks:
    """Checkpoint hooks that record the stack work asked of them."""

    def __init__(self, stack: bool = True, high: bool = False) -> None:
        self.stack = stack
        self.high = high
        self.calls: list[str] = []

    def hosts_stack(self, core: Core) -> bool:
        return self.stack

    def drain_nic(self, core: Core) -> None:
        self.calls.append("drain")

    def tcp_batch(self, core: Core) -> None:
        self.calls.append("tcp")

    def high_waiting(self, core: Core, task: Task) -> bool:
        return self.high


class TestFcdThresholds:
    """Tests for FcdThresholds validation."""

    def test_defaults(self) -> None:
        """Test the TCP threshold is well under the NIC threshold."""
        thresholds = FcdThresholds()
        assert thresholds.tcp_process_interval < thresholds.nic_check_interval

    def test_non_positive_interval(self) -> None:
        """Test intervals must be positive."""
        with pytest.raises(ValueError):
            FcdThresholds(nic_check_interval=0)

    def test_negative_cost(self) -> None:
        """Test the check cost cannot be negative."""
        with pytest.raises(ValueError):
            FcdThresholds(check_cost=-1)


class TestFastCallDown:
    """Tests for FastCallDown.check."""

    def test_idle_check_costs_check(self) -> None:
        """Test a check with nothing expired only charges its cost."""
        fcd = FastCallDown()
        core = Core(id=0)
        assert fcd.check(core, None, now=10) == frozenset()
        assert core.charges[ChargeKind.CHECK] == CHECK_COST_NS
        assert fcd.counters.idle_checks == 1

    def test_expired_intervals_trigger_stack_work(self) -> None:
        """Test expired NIC and TCP intervals drain and batch."""
        hooks = RecordingHooks()
        fcd = FastCallDown(hooks=hooks)
        actions = fcd.check(Core(id=0), None, now=250_000)
        assert actions == {FcdAction.DRAIN_NIC, FcdAction.TCP_BATCH}
        assert hooks.calls == ["drain", "tcp"]
        assert fcd.state(0).last_nic_check == 250_000

    def test_tcp_interval_alone(self) -> None:
        """Test only the TCP batch fires between NIC deadlines."""
        fcd = FastCallDown(hooks=RecordingHooks())
        fcd.check(Core(id=0), None, now=250_000)
        assert fcd.check(Core(id=0), None, now=310_000) == {FcdAction.TCP_BATCH}

    def test_no_stack_no_stack_work(self) -> None:
        """Test a core without a stack never drains."""
        hooks = RecordingHooks(stack=False)
        fcd = FastCallDown(hooks=hooks)
        assert fcd.check(Core(id=0), None, now=1_000_000) == frozenset()
        assert hooks.calls == []

    def test_budget_reschedule(self) -> None:
        """Test a task over its budget is rescheduled."""
        fcd = FastCallDown(FcdThresholds(coroutine_budget=1000), hooks=RecordingHooks(stack=False))
        task = Task(id=0, kind=TaskKind.APP, index=0, run_start=0)
        assert FcdAction.RESCHEDULE in fcd.check(Core(id=0), task, now=1000)
        assert fcd.counters.actions[FcdAction.RESCHEDULE] == 1

    def test_priority_yield(self) -> None:
        """Test waiting High work asks Low work to yield when enabled."""
        task = Task(id=0, kind=TaskKind.APP, index=0)
        hooks = RecordingHooks(stack=False, high=True)
        on = FastCallDown(FcdThresholds(priority_check=True), hooks=hooks)
        off = FastCallDown(FcdThresholds(priority_check=False), hooks=hooks)
        assert FcdAction.PRIORITY_YIELD in on.check(Core(id=0), task, now=5)
        assert FcdAction.PRIORITY_YIELD not in off.check(Core(id=0), task, now=5)


class HighAfter(RecordingHooks):
    """Hooks reporting a High event waiting from virtual time ``t_emit`` on."""

    def __init__(self, t_emit: int) -> None:
        super().__init__(stack=False)
        self.t_emit = t_emit

    def high_waiting(self, core: Core, task: Task) -> bool:
        return core.now >= self.t_emit


class TestCheckpointedSegments:
    """Tests for checkpoints taken inside long work segments."""

    def test_overhead_per_microsecond(self) -> None:
        """Test 1 us checkpoint spacing costs 22 ns of every 1000 ns."""
        engine = Engine(fastcalldown=FastCallDown(hooks=RecordingHooks(stack=False)))
        task = engine.add_task(TaskKind.APP, 0, core=0)
        engine.run_segment(task, WorkSegment(duration=NS_PER_MS, checkpoint_interval=NS_PER_US))
        core = engine.cores[0]
        check = core.charges[ChargeKind.CHECK]
        app = core.charges[ChargeKind.APP]
        assert app == NS_PER_MS
        assert check == 1000 * CHECK_COST_NS
        assert check * 1000 == app * 22
        assert check / core.work_ns <= 0.022

    def test_long_segment_drains_nic(self) -> None:
        """Test a 1 ms segment on a stack core drains the NIC repeatedly."""
        hooks = RecordingHooks()
        engine = Engine(fastcalldown=FastCallDown(hooks=hooks))
        task = engine.add_task(TaskKind.APP, 0, core=0)
        outcomes = engine.run_segment(
            task, WorkSegment(duration=NS_PER_MS, checkpoint_interval=10 * NS_PER_US)
        )
        assert len(outcomes) == 100
        assert sum(FcdAction.DRAIN_NIC in actions for actions in outcomes) >= 4
        assert hooks.calls.count("drain") >= 4

    def test_high_event_yields_within_one_interval(self) -> None:
        """Test Low work yields at the first checkpoint after a High emission."""
        t_emit = 300 * NS_PER_US
        interval = 10 * NS_PER_US
        thresholds = FcdThresholds(priority_check=True)
        engine = Engine(fastcalldown=FastCallDown(thresholds, hooks=HighAfter(t_emit)))
        task = engine.add_task(TaskKind.APP, 0, core=0)
        outcomes = engine.run_segment(task, WorkSegment(duration=NS_PER_MS, checkpoint_interval=interval))
        core = engine.cores[0]
        assert FcdAction.PRIORITY_YIELD in outcomes[-1]
        assert all(FcdAction.PRIORITY_YIELD not in actions for actions in outcomes[:-1])
        assert t_emit <= core.now <= t_emit + interval + CHECK_COST_NS
        assert task.segment is not None
        assert task.segment.remaining > 0

    def test_no_yield_without_priority_check(self) -> None:
        """Test Low work runs to its end when priority checks are off."""
        engine = Engine(fastcalldown=FastCallDown(hooks=HighAfter(300 * NS_PER_US)))
        task = engine.add_task(TaskKind.APP, 0, core=0)
        outcomes = engine.run_segment(
            task, WorkSegment(duration=NS_PER_MS, checkpoint_interval=10 * NS_PER_US)
        )
        assert len(outcomes) == 100
        assert engine.cores[0].now >= NS_PER_MS
        assert task.segment is None


class TestCostCompare:
    """Tests for cost_compare function."""

    def test_formula(self) -> None:
        """Test both totals follow their cost models."""
        fcd, coroutine = cost_compare(1000)
        assert fcd == EMPTY_QUEUE_CHECK_COST_NS + CHECK_COST_NS * 3 * 1000
        assert coroutine == (COROUTINE_YIELD_COST_NS + EMPTY_QUEUE_CHECK_COST_NS) * 1000

    def test_fastcalldown_cheaper(self) -> None:
        """Test checks undercut per-request yields and empty polls."""
        for n in (10, 1000, 100_000):
            fcd, coroutine = cost_compare(n)
            assert fcd < coroutine

    def test_invalid(self) -> None:
        """Test at least one request is required."""
        with pytest.raises(ValueError):
            cost_compare(0)


class TestRegisterCallup:
    """Tests for register_callup function."""

    def test_driver_global(self) -> None:
        """Test a driver callback is installed on every driver."""
        drivers = [Driver(), Driver()]
        register_callup(CallupLayer.DRIVER, keyword_classifier, drivers=drivers)
        assert all(d.extraction.enabled for d in drivers)

    def test_driver_rejects_flow(self) -> None:
        """Test driver callbacks cannot target one flow."""
        with pytest.raises(ValueError):
            register_callup(CallupLayer.DRIVER, keyword_classifier, drivers=[Driver()], flow_id=1)

    def test_driver_needs_drivers(self) -> None:
        """Test a driver registration without drivers fails."""
        with pytest.raises(ValueError):
            register_callup(CallupLayer.DRIVER, keyword_classifier)

    def test_tcp_per_flow(self) -> None:
        """Test a TCP callback binds to one flow."""
        tcp = TcpLayer()
        tcp.open_flow(3)
        register_callup(CallupLayer.TCP, message_boundary_classifier, tcp=tcp, flow_id=3)
        assert tcp.flows[3].extraction is not None
        assert tcp.default_extraction is None

    def test_unsupported_layer(self) -> None:
        """Test layers without a hook are refused."""
        with pytest.raises(UnsupportedLayerError):
            register_callup(CallupLayer.EVENT, keyword_classifier)

    def test_remove(self) -> None:
        """Test registering None removes the callback."""
        tcp = TcpLayer()
        register_callup(CallupLayer.TCP, message_boundary_classifier, tcp=tcp)
        register_callup(CallupLayer.TCP, None, tcp=tcp)
        assert tcp.default_extraction is None


class TestKeywordClassifier:
    """Tests for the stateless classifier."""

    def test_header_packet(self) -> None:
        """Test a header packet yields its declared class."""
        assert keyword_classifier(encode_header(64, Priority.HIGH, 10)) is Priority.HIGH

    def test_continuation_packet(self) -> None:
        """Test a packet without a header stays unlabeled."""
        assert keyword_classifier(b"") is Priority.UNSET
