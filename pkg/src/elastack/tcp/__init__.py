"""TCP-lite connection layer with per-flow private fields."""

from elastack.tcp.flow import (
    FlowState,
    Message,
    MessageBoundary,
    TcpCallback,
    TcpExtraction,
)
from elastack.tcp.header import RequestHeader, decode_header, encode_header
from elastack.tcp.layer import BatchResult, TcpLayer

__all__ = [
    "BatchResult",
    "FlowState",
    "Message",
    "MessageBoundary",
    "RequestHeader",
    "TcpCallback",
    "TcpExtraction",
    "TcpLayer",
    "decode_header",
    "encode_header",
]
