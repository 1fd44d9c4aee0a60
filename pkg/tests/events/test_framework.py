"""Tests for the priority-aware event framework."""

import numpy as np
import pytest

from elastack.constants import WOULD_BLOCK, Priority, PriorityClass
from elastack.errors import UnknownConsumerError
from elastack.events import Event, EventFramework, PriorityBinding


def framework(consumers: int = 1, prioritized: bool = True) -> EventFramework:
    """Build a framework with consumers 0..n-1."""
    events = EventFramework(prioritized=prioritized)
    for consumer in range(consumers):
        events.add_consumer(consumer)
    return events


class TestEmitAndGet:
    """Tests for emit and q_get_event."""

    def test_high_before_low(self) -> None:
        """Test a later High event is delivered before an earlier Low one."""
        events = framework()
        events.q_epoll_ctrl(1, 0, PriorityClass.ANY)
        events.emit(Event(flow_id=1, priority=Priority.LOW, t_emit=1))
        events.emit(Event(flow_id=1, priority=Priority.HIGH, t_emit=2))
        assert events.q_get_event(0).priority is Priority.HIGH
        assert events.q_get_event(0).priority is Priority.LOW
        assert events.q_get_event(0) is WOULD_BLOCK

    def test_unprioritized_is_fifo(self) -> None:
        """Test without priorities events leave in emission order."""
        events = framework(prioritized=False)
        events.q_epoll_ctrl(1, 0, PriorityClass.ANY)
        events.emit(Event(flow_id=1, priority=Priority.LOW, t_emit=1))
        events.emit(Event(flow_id=1, priority=Priority.HIGH, t_emit=2))
        assert events.q_get_event(0).t_emit == 1

    def test_producers_interleave(self) -> None:
        """Test events of several producers alternate by per-producer index."""
        events = framework()
        events.q_epoll_ctrl(1, 0, PriorityClass.ANY)
        events.emit(Event(flow_id=1, producer=0, t_emit=0))
        events.emit(Event(flow_id=1, producer=0, t_emit=1))
        events.emit(Event(flow_id=1, producer=1, t_emit=2))
        order = [(e.producer, e.producer_index) for e in (events.q_get_event(0) for _ in range(3))]
        assert order == [(0, 0), (1, 0), (0, 1)]

    def test_unset_treated_as_low(self) -> None:
        """Test an Unset event is queued Low."""
        events = framework()
        events.default_consumer = 0
        events.emit(Event(flow_id=1, priority=Priority.UNSET))
        assert events.pending_high(0) == 0
        assert events.q_get_event(0).priority is Priority.LOW

    def test_orphaned_without_route(self) -> None:
        """Test an event with no binding and no default consumer is dropped."""
        events = framework()
        assert not events.emit(Event(flow_id=7))
        assert events.orphaned == 1
        assert events.total_pending == 0

    def test_emit_hook(self) -> None:
        """Test the emit hook sees the receiving consumer."""
        events = framework(2)
        events.q_epoll_ctrl(1, 1, PriorityClass.ANY)
        seen = []
        events.on_emit = lambda consumer, event: seen.append(consumer)
        events.emit(Event(flow_id=1))
        assert seen == [1]

    def test_get_runs_checkpoint(self) -> None:
        """Test every receive call performs one implicit check."""
        events = framework()
        calls = []
        events.checkpoint = lambda: calls.append(1)
        events.q_get_event(0)
        events.q_get_event(0)
        assert len(calls) == 2

    def test_counters(self) -> None:
        """Test emitted and delivered counts."""
        events = framework()
        events.default_consumer = 0
        events.emit(Event(flow_id=1))
        events.q_get_event(0)
        assert events.emitted == 1
        assert events.delivered == 1


class TestEpollWait:
    """Tests for q_epoll_wait."""

    def test_batch_high_first(self) -> None:
        """Test a batch holds every High event before any Low."""
        events = framework()
        events.default_consumer = 0
        for priority in (Priority.LOW, Priority.HIGH, Priority.LOW, Priority.HIGH):
            events.emit(Event(flow_id=1, priority=priority))
        batch = events.q_epoll_wait(0, max_events=3)
        assert [e.priority for e in batch] == [Priority.HIGH, Priority.HIGH, Priority.LOW]
        assert events.pending(0) == 1

    def test_empty(self) -> None:
        """Test nothing pending blocks."""
        assert framework().q_epoll_wait(0, max_events=4) is WOULD_BLOCK

    def test_invalid_max(self) -> None:
        """Test max_events must be positive."""
        with pytest.raises(ValueError):
            framework().q_epoll_wait(0, max_events=0)


class TestBindings:
    """Tests for q_epoll_ctrl bindings."""

    def test_split_binding(self) -> None:
        """Test High and Low events of a flow can go to different consumers."""
        events = framework(2)
        events.q_epoll_ctrl(1, 0, PriorityClass.HIGH)
        events.q_epoll_ctrl(1, 1, PriorityClass.LOW)
        events.emit(Event(flow_id=1, priority=Priority.HIGH))
        events.emit(Event(flow_id=1, priority=Priority.LOW))
        assert events.pending_high(0) == 1
        assert events.pending(1) == 1
        assert set(events.bindings(1)) == {
            PriorityBinding(1, 0, PriorityClass.HIGH),
            PriorityBinding(1, 1, PriorityClass.LOW),
        }

    def test_any_binding_listed_once(self) -> None:
        """Test an ANY binding is reported as one binding."""
        events = framework()
        events.q_epoll_ctrl(1, 0, PriorityClass.ANY)
        assert events.bindings(1) == [PriorityBinding(1, 0, PriorityClass.ANY)]

    def test_override_warns(self) -> None:
        """Test rebinding a class to another consumer wins and is counted."""
        events = framework(2)
        events.q_epoll_ctrl(1, 0, PriorityClass.ANY)
        events.q_epoll_ctrl(1, 1, PriorityClass.HIGH)
        assert events.binding_warnings == 1
        assert events.route_of(1, Priority.HIGH) == 1
        assert events.route_of(1, Priority.LOW) == 0

    def test_unknown_consumer(self) -> None:
        """Test binding to a missing consumer fails."""
        with pytest.raises(UnknownConsumerError):
            framework().q_epoll_ctrl(1, 5, PriorityClass.ANY)

    def test_none_filter_rejected(self) -> None:
        """Test the NONE class cannot be bound."""
        with pytest.raises(ValueError):
            framework().q_epoll_ctrl(1, 0, PriorityClass.NONE)

    def test_unbind(self) -> None:
        """Test unbinding falls back to the default consumer."""
        events = framework()
        events.q_epoll_ctrl(1, 0, PriorityClass.ANY)
        events.unbind(1)
        assert events.route_of(1, Priority.LOW) is None

    def test_unknown_consumer_on_receive(self) -> None:
        """Test receiving for a missing consumer fails like binding does."""
        events = framework()
        calls = []
        events.checkpoint = lambda: calls.append(1)
        with pytest.raises(UnknownConsumerError):
            events.q_get_event(3)
        with pytest.raises(UnknownConsumerError):
            events.q_epoll_wait(3, max_events=4)
        assert calls == []


class TestDeliveryOrder:
    """Tests for the delivery order and conservation of events."""

    def test_matches_stable_sort(self) -> None:
        """Test 10000 random emissions drain in (class, producer index) order."""
        rng = np.random.default_rng(11)
        events = framework()
        events.default_consumer = 0
        producers = rng.integers(0, 3, size=10_000)
        highs = rng.random(10_000) < 0.3
        counts = [0, 0, 0]
        expected = []
        for seq, (producer, high) in enumerate(zip(producers.tolist(), highs.tolist())):
            priority = Priority.HIGH if high else Priority.LOW
            events.emit(Event(flow_id=1, priority=priority, producer=producer, t_emit=seq))
            expected.append((0 if high else 1, counts[producer], seq))
            counts[producer] += 1
        oracle = [seq for _, _, seq in sorted(expected, key=lambda e: (e[0], e[1]))]
        drained = []
        while (batch := events.q_epoll_wait(0, max_events=64)) is not WOULD_BLOCK:
            drained.extend(e.t_emit for e in batch)
        assert drained == oracle

    def test_no_event_lost(self) -> None:
        """Test emitted equals delivered plus pending plus orphaned."""
        rng = np.random.default_rng(5)
        events = framework(2)
        for flow_id in range(0, 40, 2):
            events.q_epoll_ctrl(flow_id, flow_id % 4 // 2, PriorityClass.ANY)
        for _ in range(2_000):
            flow_id = int(rng.integers(0, 40))
            priority = Priority.HIGH if rng.random() < 0.5 else Priority.LOW
            events.emit(Event(flow_id=flow_id, priority=priority))
            if rng.random() < 0.3:
                events.q_epoll_wait(int(rng.integers(0, 2)), max_events=3)
        assert events.orphaned > 0
        assert events.total_pending > 0
        assert events.emitted == events.delivered + events.total_pending + events.orphaned

    @pytest.mark.parametrize("low_backlog", [0, 50])
    def test_high_wait_ignores_low_backlog(self, low_backlog: int) -> None:
        """Test High events leave at the same positions with a 10x Low backlog."""
        events = framework()
        events.default_consumer = 0
        for _ in range(low_backlog):
            events.emit(Event(flow_id=1, priority=Priority.LOW))
        for _ in range(5):
            events.emit(Event(flow_id=2, priority=Priority.HIGH))
        positions = [
            i for i in range(5 + low_backlog) if events.q_get_event(0).priority is Priority.HIGH
        ]
        assert positions == [0, 1, 2, 3, 4]
