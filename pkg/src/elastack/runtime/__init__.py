"""Coroutine bodies and the host runtime that wires every layer together."""

from elastack.runtime.app import AppCoroutine
from elastack.runtime.host import HostOptions, HostRuntime
from elastack.runtime.stack import StackCoroutine

__all__ = [
    "AppCoroutine",
    "HostOptions",
    "HostRuntime",
    "StackCoroutine",
]
