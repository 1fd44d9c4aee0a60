"""Tests for the multi-queue NIC model."""

import numpy as np
import pytest

from elastack.constants import (
    EMPTY_QUEUE_CHECK_COST_NS,
    EnqueueResult,
    Priority,
    PriorityClass,
)
from elastack.nic import (
    Nic,
    NicQueue,
    Packet,
    RssMap,
    nic_enqueue,
    rss_hash,
    rx_burst,
    rx_cost_ns,
)
from tests.conftest import make_packet


class TestRssHash:
    """Tests for rss_hash function."""

    def test_in_range(self) -> None:
        """Test every flow lands in a valid group."""
        for flow_id in range(1, 500):
            assert 0 <= rss_hash(flow_id, 6) < 6

    def test_deterministic(self) -> None:
        """Test the same flow always maps to the same group."""
        assert rss_hash(1234, 16) == rss_hash(1234, 16)

    def test_single_group(self) -> None:
        """Test one group takes every flow."""
        assert {rss_hash(f, 1) for f in range(100)} == {0}

    def test_spreads_flows(self) -> None:
        """Test consecutive flows use every group."""
        assert {rss_hash(f, 4) for f in range(1, 200)} == {0, 1, 2, 3}

    def test_balanced_groups(self) -> None:
        """Test 10000 flows put between 800 and 1700 flows in each of 8 groups."""
        sizes = np.bincount([rss_hash(f, 8) for f in range(10_000)], minlength=8)
        assert len(sizes) == 8
        assert sizes.min() >= 800
        assert sizes.max() <= 1700

    def test_invalid_groups(self) -> None:
        """Test zero groups is rejected."""
        with pytest.raises(ValueError):
            rss_hash(1, 0)


class TestRxCost:
    """Tests for rx_cost_ns function."""

    def test_empty_poll(self) -> None:
        """Test an empty poll costs the empty check."""
        assert rx_cost_ns(0) == EMPTY_QUEUE_CHECK_COST_NS

    def test_full_batch(self) -> None:
        """Test a full burst costs one microsecond."""
        assert rx_cost_ns(32) == 1000

    def test_pro_rated(self) -> None:
        """Test partial bursts are pro-rated."""
        assert rx_cost_ns(16) == 500


class TestNicQueue:
    """Tests for NicQueue and nic_enqueue."""

    def test_accepts_until_full(self) -> None:
        """Test tail drop once the ring is full."""
        queue = NicQueue(queue_id=0, capacity=2)
        assert nic_enqueue(make_packet(), queue, now=1) is EnqueueResult.ACCEPTED
        assert nic_enqueue(make_packet(), queue, now=2) is EnqueueResult.ACCEPTED
        assert nic_enqueue(make_packet(), queue, now=3) is EnqueueResult.DROPPED
        assert len(queue) == 2
        assert queue.drops == 1
        assert queue.offered == 3

    def test_first_drop_time(self) -> None:
        """Test only the first overflow time is kept."""
        queue = NicQueue(queue_id=0, capacity=1)
        nic_enqueue(make_packet(), queue, now=0)
        nic_enqueue(make_packet(), queue, now=10)
        nic_enqueue(make_packet(), queue, now=20)
        assert queue.first_drop_ns == 10

    def test_stamps_arrival(self, packet: Packet) -> None:
        """Test accepted packets carry their arrival time."""
        queue = NicQueue(queue_id=0)
        nic_enqueue(packet, queue, now=42)
        assert packet.t_arrive_nic == 42

    def test_invalid_capacity(self) -> None:
        """Test a ring needs at least one descriptor."""
        with pytest.raises(ValueError):
            NicQueue(queue_id=0, capacity=0)


class TestRxBurst:
    """Tests for rx_burst function."""

    def test_fifo_order(self) -> None:
        """Test packets leave in arrival order."""
        queue = NicQueue(queue_id=0)
        for seq in range(5):
            nic_enqueue(make_packet(seq_start=seq), queue, now=seq)
        burst = rx_burst(queue, max_batch=3)
        assert [p.seq_start for p in burst.packets] == [0, 1, 2]
        assert len(queue) == 2
        assert queue.dequeued == 3

    def test_empty_burst_cost(self) -> None:
        """Test polling an empty ring still costs."""
        burst = rx_burst(NicQueue(queue_id=0))
        assert burst.packets == []
        assert burst.cost_ns == EMPTY_QUEUE_CHECK_COST_NS

    def test_invalid_batch(self) -> None:
        """Test the burst limit must be positive."""
        with pytest.raises(ValueError):
            rx_burst(NicQueue(queue_id=0), max_batch=0)

    def test_packets_conserved(self) -> None:
        """Test every offered packet is dropped, received or still queued."""
        rng = np.random.default_rng(8)
        queue = NicQueue(queue_id=0, capacity=64)
        received = 0
        for now in range(5_000):
            for _ in range(int(rng.integers(0, 4))):
                nic_enqueue(make_packet(), queue, now=now)
            if now % 7 == 0:
                received += len(rx_burst(queue, max_batch=8).packets)
        assert queue.drops > 0
        assert queue.offered == queue.enqueued + queue.drops
        assert queue.enqueued == received + len(queue)
        assert queue.dequeued == received


class TestNic:
    """Tests for Nic class."""

    def test_rss_steering(self) -> None:
        """Test packets land on the ring of their flow group."""
        nic = Nic(num_queues=4)
        for flow_id in range(1, 20):
            nic.receive(make_packet(flow_id=flow_id), now=0)
        for queue in nic.queues:
            for packet in queue.ring:
                assert nic.rss.queue_of(packet.flow_id) == queue.queue_id

    def test_queue_count_bounds(self) -> None:
        """Test ring count is limited to the supported range."""
        with pytest.raises(ValueError):
            Nic(num_queues=0)
        with pytest.raises(ValueError):
            Nic(num_queues=17)

    def test_rss_map_must_fit(self) -> None:
        """Test a map pointing at a missing ring is rejected."""
        with pytest.raises(ValueError):
            Nic(num_queues=2, rss=RssMap(num_groups=3, group_to_queue=[0, 1, 2]))

    def test_arrival_hook_only_on_accept(self) -> None:
        """Test the arrival hook fires for accepted packets only."""
        nic = Nic(num_queues=1, capacity=1)
        seen = []
        nic.on_arrival = lambda queue, packet, now: seen.append(now)
        nic.receive(make_packet(), now=5)
        nic.receive(make_packet(), now=6)
        assert seen == [5]
        assert nic.total_drops == 1
        assert nic.drops_per_queue() == [1]

    def test_pre_classifier(self) -> None:
        """Test a reserved ring takes the packets its class matches."""
        nic = Nic(
            num_queues=2,
            rss=RssMap(num_groups=1, group_to_queue=[0]),
            classifier=lambda p: PriorityClass.HIGH
            if p.priority is Priority.HIGH
            else PriorityClass.LOW,
        )
        nic.queues[1].priority_class = PriorityClass.HIGH
        nic.receive(make_packet(priority=Priority.HIGH), now=0)
        nic.receive(make_packet(priority=Priority.LOW), now=0)
        assert len(nic.queues[1]) == 1
        assert len(nic.queues[0]) == 1


class TestPacket:
    """Tests for Packet labeling."""

    def test_label_writes_metadata(self, packet: Packet) -> None:
        """Test a label sets priority and metadata."""
        packet.label(Priority.HIGH)
        assert packet.priority is Priority.HIGH
        assert packet.metadata_label is Priority.HIGH

    def test_unset_label_ignored(self, packet: Packet) -> None:
        """Test an Unset label leaves the packet untouched."""
        packet.label(Priority.UNSET)
        assert packet.metadata_label is None

    def test_seq_end(self) -> None:
        """Test seq_end is one past the last byte."""
        assert make_packet(seq_start=100, seq_len=50).seq_end == 150
