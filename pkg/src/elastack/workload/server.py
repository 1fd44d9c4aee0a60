"""Built-in request/response server run by every application coroutine.

Models an IoT gateway: read a complete request, do its service work,
answer with a small response.
"""

from dataclasses import dataclass
from typing import Optional, Protocol, Union

from elastack.constants import DEFAULT_RESPONSE_BYTES, Blocking, Priority
from elastack.engine.cores import WorkSegment
from elastack.events.framework import Event
from elastack.nic.packet import Packet, RequestDescriptor
from elastack.tcp.flow import Message


class SocketApi(Protocol):
    """Non-blocking socket calls an application makes."""

    def recv_message(self, flow_id: int) -> Union[Message, Blocking]:
        """Read the next complete message in order."""
        ...

    def recv_priority(self, flow_id: int) -> Union[Message, Blocking]:
        """Read the oldest complete High message out of order."""
        ...

    def send(
        self,
        flow_id: int,
        nbytes: int,
        priority: Priority,
        request: Optional[RequestDescriptor] = None,
    ) -> list[Packet]:
        """Send bytes on a flow."""
        ...


@dataclass
class ServeJob:
    """A request taken off a socket and the work it needs.

    Attributes:
        flow_id: Connection to answer on.
        request: The request.
        priority: Label the request carried through the stack.
        segment: Service work.
    """

    flow_id: int
    request: RequestDescriptor
    priority: Priority
    segment: WorkSegment


class IoTServer:
    """Request handler shared by application coroutines.

    Example:
        >>> server = IoTServer(api, checkpoint_interval_ns=10_000)
        >>> job = server.app_serve(event)
        >>> job.segment.duration
        1000
    """

    def __init__(
        self,
        api: SocketApi,
        checkpoint_interval_ns: Optional[int],
        response_bytes: int = DEFAULT_RESPONSE_BYTES,
        priority_recv: bool = True,
    ) -> None:
        """Initialize the server.

        Args:
            api: Socket calls.
            checkpoint_interval_ns: Checkpoint spacing inside service work;
                None places a single checkpoint at the end of each request.
            response_bytes: Response size.
            priority_recv: Read High requests through the out-of-order path.

        Raises:
            ValueError: If the interval or response size is not positive.
        """
        if checkpoint_interval_ns is not None and checkpoint_interval_ns <= 0:
            raise ValueError(f"checkpoint_interval_ns must be > 0, got {checkpoint_interval_ns}")
        if response_bytes <= 0:
            raise ValueError(f"response_bytes must be > 0, got {response_bytes}")
        self.api = api
        self.checkpoint_interval_ns = checkpoint_interval_ns
        self.response_bytes = response_bytes
        self.priority_recv = priority_recv
        self.served = 0
        self.empty_reads = 0

    def segment_for(self, service_time_ns: int) -> WorkSegment:
        """Build the work segment of a request."""
        interval = self.checkpoint_interval_ns or max(1, service_time_ns)
        return WorkSegment(duration=service_time_ns, checkpoint_interval=interval)

    def app_serve(self, event: Event) -> Optional[ServeJob]:
        """Take the request an event signals.

        High events go through the out-of-order receive path first, so a
        complete High request does not wait behind earlier Low bytes.

        Args:
            event: Readiness event delivered to the coroutine.

        Returns:
            The job to run, or None if no complete request is readable yet.
        """
        message: Union[Message, Blocking] = Blocking.WOULD_BLOCK
        if self.priority_recv and event.priority is Priority.HIGH:
            message = self.api.recv_priority(event.flow_id)
        if message is Blocking.WOULD_BLOCK:
            message = self.api.recv_message(event.flow_id)
        if message is Blocking.WOULD_BLOCK:
            self.empty_reads += 1
            return None
        self.served += 1
        request = message.descriptor
        return ServeJob(
            flow_id=event.flow_id,
            request=request,
            priority=Priority.HIGH if message.all_high else Priority.LOW,
            segment=self.segment_for(request.service_time_ns),
        )

    def respond(self, job: ServeJob) -> list[Packet]:
        """Send the response of a finished job."""
        return self.api.send(job.flow_id, self.response_bytes, job.priority, job.request)
