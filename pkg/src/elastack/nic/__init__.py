"""Simulated multi-queue NIC with RSS flow groups."""

from elastack.nic.packet import Packet, RequestDescriptor
from elastack.nic.queue import (
    Nic,
    NicQueue,
    RssMap,
    RxBurst,
    nic_enqueue,
    rss_hash,
    rx_burst,
    rx_cost_ns,
)

__all__ = [
    "Nic",
    "NicQueue",
    "Packet",
    "RequestDescriptor",
    "RssMap",
    "RxBurst",
    "nic_enqueue",
    "rss_hash",
    "rx_burst",
    "rx_cost_ns",
]
