"""TCP-lite: established flows, sequencing, reassembly and fastcallup.

Handshake, retransmission and congestion control are not modeled. The
layer keeps in-order delivery per flow, runs the TCP-layer extraction
callback on every payload segment in sequence order, and feeds both the
ordered receive path and the High-only out-of-order receive path.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Optional, Union

from elastack.constants import (
    TCP_BATCH_PACKETS,
    TCP_EXTRACTION_COST_NS,
    TCP_MSS_BYTES,
    TCP_PACKET_COST_NS,
    TCP_RECEIVE_WINDOW_BYTES,
    WOULD_BLOCK,
    Blocking,
    EventKind,
    Priority,
)
from elastack.errors import PrivateFieldBoundsError, UnknownFlowError
from elastack.events.framework import EXTERNAL_PRODUCER, Event
from elastack.nic.packet import Packet, RequestDescriptor
from elastack.tcp.flow import FlowState, Message, TcpCallback, TcpExtraction

logger = logging.getLogger(__name__)

EmitFn = Callable[[Event], bool]
TxFn = Callable[[Packet], None]
CheckpointHook = Callable[[], None]


@dataclass
class BatchResult:
    """Outcome of one TCP batch.

    Attributes:
        processed: Segments taken from the batch.
        events: Events emitted.
        cost_ns: Processing cost to charge the stack core.
    """

    processed: int = 0
    events: int = 0
    cost_ns: int = 0


class TcpLayer:
    """Flow table and per-segment processing shared by all stack coroutines.

    A flow is processed by exactly one stack coroutine at a time (the one
    owning its RSS group); the table itself is shared.

    Example:
        >>> tcp = TcpLayer(emit=events.emit)
        >>> tcp.open_flow(1)
        >>> tcp.register_extraction(1, stateful_classifier)
    """

    def __init__(
        self,
        emit: Optional[EmitFn] = None,
        tx: Optional[TxFn] = None,
        packet_cost_ns: int = TCP_PACKET_COST_NS,
        extraction_cost_ns: int = TCP_EXTRACTION_COST_NS,
        priority_receive: bool = True,
        mss: int = TCP_MSS_BYTES,
    ) -> None:
        """Initialize the layer.

        Args:
            emit: Event sink (normally ``EventFramework.emit``).
            tx: Sink for outgoing segments (normally the owning driver).
            packet_cost_ns: Cost per processed segment.
            extraction_cost_ns: Cost per extraction callback.
            priority_receive: Maintain the High out-of-order receive path.
            mss: Send-side maximum segment size.
        """
        self.flows: dict[int, FlowState] = {}
        self.emit = emit
        self.tx = tx
        self.packet_cost_ns = packet_cost_ns
        self.extraction_cost_ns = extraction_cost_ns
        self.priority_receive = priority_receive
        self.mss = mss
        self.default_extraction: Optional[TcpExtraction] = None
        self.checkpoint: Optional[CheckpointHook] = None
        self.unknown_flow_segments = 0
        self.callbacks_run = 0

    # ------------------------------------------------------------------ #
    # Flows and callbacks
    # ------------------------------------------------------------------ #

    def open_flow(self, flow_id: int) -> FlowState:
        """Establish a flow (idempotent)."""
        flow = self.flows.get(flow_id)
        if flow is None:
            flow = FlowState(flow_id=flow_id)
            self.flows[flow_id] = flow
        return flow

    def get(self, flow_id: int) -> FlowState:
        """Look up an established flow.

        Raises:
            UnknownFlowError: If the flow does not exist.
        """
        flow = self.flows.get(flow_id)
        if flow is None or not flow.established:
            raise UnknownFlowError(flow_id)
        return flow

    def register_extraction(self, flow_id: Optional[int], callback: Optional[TcpCallback]) -> None:
        """Register, replace or remove a TCP-layer extraction callback.

        Args:
            flow_id: Flow to bind to, or None for every flow without its own.
            callback: Stateful classifier, None to remove.

        Raises:
            UnknownFlowError: If a named flow does not exist.
        """
        extraction = (
            TcpExtraction(callback=callback, cost_ns=self.extraction_cost_ns)
            if callback is not None
            else None
        )
        if flow_id is None:
            self.default_extraction = extraction
            return
        self.get(flow_id).extraction = extraction

    # ------------------------------------------------------------------ #
    # Receive processing
    # ------------------------------------------------------------------ #

    def process_batch(
        self,
        packets: Iterable[Packet],
        now: int,
        producer: int = EXTERNAL_PRODUCER,
        max_batch: int = TCP_BATCH_PACKETS,
    ) -> BatchResult:
        """Process a batch of received segments.

        Events are stamped with the time at which their segment finished
        processing, starting from ``now``.

        Args:
            packets: Segments in processing order.
            now: Time the batch starts.
            producer: Stack coroutine doing the work.
            max_batch: Segments taken at most.

        Returns:
            BatchResult with counts and cost.
        """
        result = BatchResult()
        for packet in packets:
            if result.processed >= max_batch:
                break
            result.processed += 1
            result.cost_ns += self.packet_cost_ns
            flow = self.flows.get(packet.flow_id)
            if flow is None or not flow.established:
                self.unknown_flow_segments += 1
                continue
            self._receive(flow, packet, now, producer, result)
        return result

    def _receive(
        self, flow: FlowState, packet: Packet, now: int, producer: int, result: BatchResult
    ) -> None:
        if packet.seq_len == 0:
            return
        if packet.seq_end <= flow.next_expected_seq:
            flow.duplicates += 1
            return
        if packet.seq_start > flow.next_expected_seq:
            if packet.seq_end - flow.next_expected_seq > TCP_RECEIVE_WINDOW_BYTES:
                flow.out_of_window += 1
                return
            flow.out_of_order[packet.seq_start] = packet
            return
        if packet.seq_start < flow.next_expected_seq:
            flow.duplicates += 1
            return
        self._deliver(flow, packet, now, producer, result)
        while flow.next_expected_seq in flow.out_of_order:
            self._deliver(flow, flow.out_of_order.pop(flow.next_expected_seq), now, producer, result)

    def _deliver(
        self, flow: FlowState, packet: Packet, now: int, producer: int, result: BatchResult
    ) -> None:
        extraction = flow.extraction or self.default_extraction
        if extraction is not None:
            # read field, read packet, update field, write label to metadata
            packet.label(extraction.callback(packet, flow.private_field))
            result.cost_ns += extraction.cost_ns
            self.callbacks_run += 1
        if packet.priority is Priority.UNSET:
            packet.priority = Priority.LOW

        if packet.request is not None:
            self._assemble(flow, packet)
        flow.next_expected_seq = packet.seq_end

        if self.emit is not None:
            result.events += 1
            self.emit(
                Event(
                    flow_id=flow.flow_id,
                    kind=EventKind.READABLE,
                    priority=packet.priority,
                    t_emit=now + result.cost_ns,
                    producer=producer,
                )
            )

    def _assemble(self, flow: FlowState, packet: Packet) -> None:
        descriptor = packet.request
        message = flow.assembling.get(descriptor.request_id)
        if message is None:
            message = Message(
                descriptor=descriptor,
                seq_start=packet.seq_start,
                length=descriptor.total_length,
            )
            flow.assembling[descriptor.request_id] = message
            flow.ordered_rcv.append(message)
        message.received += packet.seq_len
        message.all_high = message.all_high and packet.priority is Priority.HIGH
        if message.complete:
            del flow.assembling[descriptor.request_id]
            if self.priority_receive and message.all_high:
                flow.prio_rcv.append(message)

    # ------------------------------------------------------------------ #
    # Socket-side receive
    # ------------------------------------------------------------------ #

    def _implicit_check(self) -> None:
        if self.checkpoint is not None:
            self.checkpoint()

    def recv(self, flow_id: int, max_bytes: int) -> Union[int, Blocking]:
        """Deliver contiguous in-order bytes.

        Args:
            flow_id: Flow to read.
            max_bytes: Upper bound on bytes delivered.

        Returns:
            Bytes delivered, or WOULD_BLOCK if none are available.

        Raises:
            UnknownFlowError: If the flow does not exist.
        """
        flow = self.get(flow_id)
        delivered = 0
        while delivered < max_bytes:
            message = flow.head_message()
            if message is None:
                break
            available = message.received - message.read
            if available <= 0:
                break
            take = min(available, max_bytes - delivered)
            message.read += take
            delivered += take
            if message.read >= message.length:
                message.consumed = True
            elif take < available or message.read >= message.received:
                break
        self._implicit_check()
        return delivered if delivered else WOULD_BLOCK

    def next_message(self, flow_id: int) -> Optional[Message]:
        """Get the head message of a flow if all of it has arrived and none was read."""
        message = self.get(flow_id).head_message()
        if message is None or not message.complete or message.read:
            return None
        return message

    def recv_message(self, flow_id: int) -> Union[Message, Blocking]:
        """Read the whole head message in order.

        Returns:
            The message, or WOULD_BLOCK if it has not fully arrived.
        """
        message = self.next_message(flow_id)
        if message is None:
            self._implicit_check()
            return WOULD_BLOCK
        self.recv(flow_id, message.length)
        return message

    def recv_priority(self, flow_id: int) -> Union[Message, Blocking]:
        """Receive the oldest complete High message, bypassing earlier Low data.

        Args:
            flow_id: Flow to read.

        Returns:
            The message, or WOULD_BLOCK if no High message is ready.

        Raises:
            UnknownFlowError: If the flow does not exist.
        """
        flow = self.get(flow_id)
        message = None
        while flow.prio_rcv:
            candidate = flow.prio_rcv.popleft()
            if not candidate.consumed and not candidate.read:
                message = candidate
                break
        self._implicit_check()
        if message is None:
            return WOULD_BLOCK
        message.read = message.length
        message.consumed = True
        return message

    # ------------------------------------------------------------------ #
    # Send
    # ------------------------------------------------------------------ #

    def segment(self, nbytes: int) -> list[int]:
        """Split a send into MSS-sized segment lengths."""
        full, rest = divmod(nbytes, self.mss)
        return [self.mss] * full + ([rest] if rest else [])

    def send(
        self,
        flow_id: int,
        nbytes: int,
        priority: Priority,
        request: Optional[RequestDescriptor] = None,
    ) -> list[Packet]:
        """Segment a send and queue it to the driver.

        Args:
            flow_id: Flow to send on.
            nbytes: Bytes to send.
            priority: Label stamped on every segment.
            request: Request this send answers, if any.

        Returns:
            Segments queued, in sequence order.

        Raises:
            UnknownFlowError: If the flow does not exist.
        """
        flow = self.get(flow_id)
        packets = []
        for length in self.segment(nbytes):
            packet = Packet(
                flow_id=flow_id,
                seq_start=flow.snd_next,
                seq_len=length,
                request=request,
                is_response=True,
            )
            packet.label(priority)
            flow.snd_next += length
            packets.append(packet)
            if self.tx is not None:
                self.tx(packet)
        self._implicit_check()
        return packets

    # ------------------------------------------------------------------ #
    # Private field
    # ------------------------------------------------------------------ #

    def private_field_access(
        self,
        flow_id: int,
        mode: Literal["read", "write"],
        offset: int,
        length: int,
        data: Optional[bytes] = None,
    ) -> bytes:
        """Read or write a flow's private field.

        Args:
            flow_id: Flow whose field is accessed.
            mode: "read" or "write".
            offset: First byte.
            length: Bytes accessed.
            data: Bytes to write (exactly ``length``) in write mode.

        Returns:
            The bytes now held in the accessed range.

        Raises:
            PrivateFieldBoundsError: If the range leaves the 64-byte field.
            ValueError: If write data does not match ``length``.
            UnknownFlowError: If the flow does not exist.
        """
        flow = self.get(flow_id)
        if offset < 0 or length < 0 or offset + length > len(flow.private_field):
            raise PrivateFieldBoundsError(
                f"Range [{offset}, {offset + length}) outside {len(flow.private_field)}-byte field"
            )
        if mode == "write":
            if data is None or len(data) != length:
                raise ValueError(f"write needs exactly {length} bytes")
            flow.private_field[offset : offset + length] = data
        elif mode != "read":
            raise ValueError(f"mode must be 'read' or 'write', got {mode!r}")
        return bytes(flow.private_field[offset : offset + length])

    # ------------------------------------------------------------------ #
    # Counters
    # ------------------------------------------------------------------ #

    @property
    def out_of_window(self) -> int:
        """Segments ignored as beyond the receive window, over all flows."""
        return sum(f.out_of_window for f in self.flows.values())

    @property
    def duplicates(self) -> int:
        """Duplicate segments ignored, over all flows."""
        return sum(f.duplicates for f in self.flows.values())
