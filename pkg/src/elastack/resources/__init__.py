"""Dynamic detect: resource plans, policy tables and the resource manager."""

from elastack.resources.manager import (
    LoadSummary,
    MigrationReport,
    PlanTarget,
    ResourceManager,
    StatisticPeriod,
)
from elastack.resources.plan import ResourcePlan, pack, spread_groups
from elastack.resources.policy import DEFAULT_POLICY, PolicyEntry, PolicyTable

__all__ = [
    "DEFAULT_POLICY",
    "LoadSummary",
    "MigrationReport",
    "PlanTarget",
    "PolicyEntry",
    "PolicyTable",
    "ResourceManager",
    "ResourcePlan",
    "StatisticPeriod",
    "pack",
    "spread_groups",
]
