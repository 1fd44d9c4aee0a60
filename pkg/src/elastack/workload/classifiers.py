"""Priority classifiers applications register as extraction callbacks."""

from elastack.constants import Priority
from elastack.nic.packet import Packet
from elastack.tcp.flow import MessageBoundary
from elastack.tcp.header import decode_header


def keyword_classifier(payload: bytes) -> Priority:
    """Label a packet from the class field of a request header.

    Stateless: only a packet that starts with a header can be
    classified, so continuation packets of a request stay unlabeled.

    Args:
        payload: Bytes of one packet.

    Returns:
        Declared priority, or UNSET when no header is present.
    """
    header = decode_header(payload)
    if header is None:
        return Priority.UNSET
    return header.priority


def message_boundary_classifier(packet: Packet, private_field: bytearray) -> Priority:
    """Label every packet of a message with the priority of its header.

    Tracks the bytes left in the current message in the flow's private
    field, so the label read from the header packet carries over to the
    continuation packets. Must see a flow's packets in sequence order.

    Args:
        packet: Segment being delivered in order.
        private_field: The flow's 64-byte scratch area.

    Returns:
        Priority of the message the packet belongs to.
    """
    boundary = MessageBoundary.load(private_field)
    if boundary.remaining_bytes == 0:
        header = decode_header(packet.payload)
        if header is None:
            return Priority.UNSET
        boundary.current_label = header.priority
        boundary.remaining_bytes = header.total_length
    label = boundary.current_label
    boundary.remaining_bytes = max(0, boundary.remaining_bytes - packet.seq_len)
    boundary.store(private_field)
    return label
