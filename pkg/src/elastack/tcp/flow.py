"""Per-flow TCP state, message reassembly and the private field."""

import struct
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Final, Optional

from elastack.constants import PRIVATE_FIELD_BYTES, Priority
from elastack.nic.packet import Packet, RequestDescriptor

# Stateful classifier: the packet plus read-write access to its flow's private field
TcpCallback = Callable[[Packet, bytearray], Priority]

# remaining_bytes (u32), label code (u8)
BOUNDARY_FORMAT: Final[str] = "<IB"
_LABEL_CODES: Final[dict[Priority, int]] = {Priority.UNSET: 0, Priority.LOW: 1, Priority.HIGH: 2}
_CODE_LABELS: Final[dict[int, Priority]] = {v: k for k, v in _LABEL_CODES.items()}


@dataclass
class MessageBoundary:
    """Cross-packet labeling state kept in a flow's private field.

    Attributes:
        remaining_bytes: Unread bytes of the current message; 0 means the next
            payload byte starts a new header.
        current_label: Label of the current message.
    """

    remaining_bytes: int = 0
    current_label: Priority = Priority.UNSET

    def __post_init__(self) -> None:
        """Validate the byte count."""
        if self.remaining_bytes < 0:
            raise ValueError(f"remaining_bytes must be >= 0, got {self.remaining_bytes}")

    @classmethod
    def load(cls, private_field: bytearray, offset: int = 0) -> "MessageBoundary":
        """Read the boundary from a private field."""
        remaining, code = struct.unpack_from(BOUNDARY_FORMAT, private_field, offset)
        return cls(remaining_bytes=remaining, current_label=_CODE_LABELS.get(code, Priority.UNSET))

    def store(self, private_field: bytearray, offset: int = 0) -> None:
        """Write the boundary into a private field."""
        struct.pack_into(
            BOUNDARY_FORMAT,
            private_field,
            offset,
            self.remaining_bytes,
            _LABEL_CODES[self.current_label],
        )


@dataclass
class TcpExtraction:
    """TCP-layer extraction point bound to one flow (or installed globally).

    Attributes:
        callback: Stateful classifier.
        cost_ns: Cost charged per invocation.
    """

    callback: TcpCallback
    cost_ns: int


@dataclass(eq=False)
class Message:
    """One request message as the receive side assembles it.

    Attributes:
        descriptor: Request the bytes belong to.
        seq_start: First sequence number of the message.
        length: Message bytes.
        received: Bytes delivered in order so far.
        read: Bytes the application has consumed.
        all_high: Every segment so far was labeled High.
        consumed: Fully read through either receive path.
    """

    descriptor: RequestDescriptor
    seq_start: int
    length: int
    received: int = 0
    read: int = 0
    all_high: bool = True
    consumed: bool = False

    @property
    def complete(self) -> bool:
        """All bytes of the message have arrived."""
        return self.received >= self.length


@dataclass
class FlowState:
    """A TCP-lite connection.

    Attributes:
        flow_id: Connection id.
        next_expected_seq: Next in-order receive sequence number.
        ordered_rcv: Messages in sequence order.
        prio_rcv: Complete High messages for out-of-order receive.
        extraction: Per-flow extraction callback, if registered.
        private_field: 64-byte scratch area shared with the callback.
        established: Connection is usable.
        out_of_order: Segments held until the gap before them fills.
        assembling: Messages by request id still receiving bytes.
        snd_next: Next send sequence number.
        duplicates: Segments behind next_expected_seq.
        out_of_window: Segments beyond the receive window.
    """

    flow_id: int
    next_expected_seq: int = 0
    ordered_rcv: deque = field(default_factory=deque)
    prio_rcv: deque = field(default_factory=deque)
    extraction: Optional[TcpExtraction] = None
    private_field: bytearray = field(default_factory=lambda: bytearray(PRIVATE_FIELD_BYTES))
    established: bool = True
    out_of_order: dict[int, Packet] = field(default_factory=dict)
    assembling: dict[int, Message] = field(default_factory=dict)
    snd_next: int = 0
    duplicates: int = 0
    out_of_window: int = 0

    def head_message(self) -> Optional[Message]:
        """Get the oldest message not yet consumed."""
        while self.ordered_rcv and self.ordered_rcv[0].consumed:
            self.ordered_rcv.popleft()
        return self.ordered_rcv[0] if self.ordered_rcv else None
