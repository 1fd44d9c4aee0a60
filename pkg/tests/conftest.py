"""Pytest configuration and shared fixtures.

This module provides small hosts, workloads and packets used across
the test modules.
"""

import pytest

from elastack.constants import NS_PER_MS, NS_PER_US, Priority
from elastack.nic import Packet, RequestDescriptor
from elastack.resources import pack
from elastack.runtime import HostOptions, HostRuntime
from elastack.workload import RequestClass, WorkloadSpec


def make_packet(
    flow_id: int = 1,
    seq_start: int = 0,
    seq_len: int = 64,
    priority: Priority = Priority.UNSET,
) -> Packet:
    """Build a bare packet without a request descriptor."""
    return Packet(flow_id=flow_id, seq_start=seq_start, seq_len=seq_len, priority=priority)


@pytest.fixture
def packet() -> Packet:
    """Provide a single 64-byte packet on flow 1."""
    return make_packet()


@pytest.fixture
def descriptor() -> RequestDescriptor:
    """Provide a High request descriptor of one packet."""
    return RequestDescriptor(
        request_id=0,
        flow_id=1,
        total_length=64,
        request_class="high",
        service_time_ns=10 * NS_PER_US,
        priority=Priority.HIGH,
    )


@pytest.fixture
def small_workload() -> WorkloadSpec:
    """Provide 100 single-packet requests over 10 ms on 8 connections."""
    return WorkloadSpec(
        num_connections=8,
        classes=[RequestClass(name="request", fraction=1.0, service_time_ns=5 * NS_PER_US)],
        rate_rps=10_000,
        duration_ns=10 * NS_PER_MS,
        seed=3,
    )


@pytest.fixture
def single_core_host() -> HostRuntime:
    """Provide a one-core host with one NIC queue and K = M = 1."""
    return HostRuntime(HostOptions(num_cores=1, nic_queues=1), pack(1, 1, 1, 1))
