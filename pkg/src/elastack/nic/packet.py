"""Packets and the request descriptors they carry."""

from dataclasses import dataclass
from typing import Optional

from elastack.constants import Priority


@dataclass(frozen=True)
class RequestDescriptor:
    """Workload-side description of one request message.

    Simulated packets carry no real payload; the descriptor stands in
    for the request body so that every layer can account for it.

    Attributes:
        request_id: Unique request id.
        flow_id: Connection the request travels on.
        total_length: Request length in bytes, header included.
        request_class: Name of the workload class.
        service_time_ns: Application work the request needs.
        priority: Priority the header declares.
    """

    request_id: int
    flow_id: int
    total_length: int
    request_class: str
    service_time_ns: int
    priority: Priority


@dataclass(slots=True)
class Packet:
    """Unit flowing NIC -> driver -> TCP -> application and back.

    Attributes:
        flow_id: Connection id.
        seq_start: First byte of this segment in the flow's sequence space.
        seq_len: Payload bytes.
        payload: Bytes visible to extraction callbacks (the request header
            on a header packet, empty on continuation packets).
        request: Descriptor of the message this segment belongs to.
        priority: Label written by an extraction point.
        metadata_label: Last label written into packet metadata, if any.
        t_arrive_nic: Virtual time the packet entered the NIC ring.
        t_leave_server: Virtual time the packet left the server.
        is_response: True for server-to-client packets.
    """

    flow_id: int
    seq_start: int
    seq_len: int
    payload: bytes = b""
    request: Optional[RequestDescriptor] = None
    priority: Priority = Priority.UNSET
    metadata_label: Optional[Priority] = None
    t_arrive_nic: int = -1
    t_leave_server: int = -1
    is_response: bool = False

    @property
    def seq_end(self) -> int:
        """Sequence number one past the last payload byte."""
        return self.seq_start + self.seq_len

    def label(self, priority: Priority) -> None:
        """Write a scheduling label into the packet metadata.

        Args:
            priority: Label to write. ``UNSET`` leaves the packet untouched.
        """
        if priority is Priority.UNSET:
            return
        self.priority = priority
        self.metadata_label = priority
