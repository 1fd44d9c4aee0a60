"""Fastcalldown checkpoints and fastcallup extraction registration."""

from elastack.fastpath.calldown import (
    YIELD_ACTIONS,
    CheckpointHooks,
    FastCallDown,
    FcdCounters,
    FcdState,
    FcdThresholds,
    cost_compare,
)
from elastack.fastpath.callup import register_callup

__all__ = [
    "YIELD_ACTIONS",
    "CheckpointHooks",
    "FastCallDown",
    "FcdCounters",
    "FcdState",
    "FcdThresholds",
    "cost_compare",
    "register_callup",
]
