"""Fixed 16-byte request header used by workloads and extraction callbacks."""

import struct
from dataclasses import dataclass
from typing import Optional

from elastack.constants import REQUEST_HEADER_BYTES, REQUEST_HEADER_FORMAT, Priority

_CLASS_CODES = {Priority.LOW: 0, Priority.HIGH: 1, Priority.UNSET: 0}
_CODE_CLASSES = {0: Priority.LOW, 1: Priority.HIGH}


@dataclass(frozen=True)
class RequestHeader:
    """Decoded request header.

    Attributes:
        total_length: Message length in bytes, header included.
        priority: Class the request declares.
        service_time_ns: Application work the request asks for.
    """

    total_length: int
    priority: Priority
    service_time_ns: int


def encode_header(total_length: int, priority: Priority, service_time_ns: int) -> bytes:
    """Pack a request header.

    Args:
        total_length: Message length in bytes.
        priority: Declared class.
        service_time_ns: Requested service time.

    Returns:
        16 header bytes.
    """
    return struct.pack(REQUEST_HEADER_FORMAT, total_length, _CLASS_CODES[priority], service_time_ns)


def decode_header(payload: bytes) -> Optional[RequestHeader]:
    """Unpack a request header from the start of a payload.

    Args:
        payload: Packet bytes.

    Returns:
        RequestHeader, or None if the payload is too short to hold one.
    """
    if len(payload) < REQUEST_HEADER_BYTES:
        return None
    total_length, code, service_time_ns = struct.unpack_from(REQUEST_HEADER_FORMAT, payload)
    return RequestHeader(
        total_length=total_length,
        priority=_CODE_CLASSES.get(code, Priority.LOW),
        service_time_ns=service_time_ns,
    )
