"""Dynamic detect: measure each statistic period and re-plan the cores.

The manager runs outside the plan's cores and only acts at period
boundaries. It turns the offered rate into a load percentage, walks the
policy table one step per period toward that load and, when a core has
been saturated for consecutive periods under an unchanged (K, M), moves
one application coroutine off it.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Protocol

from elastack.constants import (
    DEFAULT_REFERENCE_RPS,
    DEFAULT_STATISTIC_PERIOD_NS,
    NS_PER_S,
    OVERLOAD_BUSY_RATIO,
    OVERLOAD_CONSECUTIVE_PERIODS,
    CoreRole,
)
from elastack.errors import InvalidPlanError
from elastack.resources.plan import ResourcePlan, pack
from elastack.resources.policy import PolicyEntry, PolicyTable

logger = logging.getLogger(__name__)


@dataclass
class StatisticPeriod:
    """Counters of one completed statistic period.

    Attributes:
        index: Period number from 0.
        t_start: Period start.
        t_end: Period end.
        offered_requests: Requests that reached the NIC.
        packets_in: Packets accepted by the NIC.
        packets_out: Packets transmitted.
        drops: NIC drops.
        completed: Responses sent.
        event_backlog: Events waiting at the end of the period.
        buffer_backlog: Packets waiting in driver buffers at the end.
        core_work_ns: Charged time per core excluding idle polling.
    """

    index: int
    t_start: int
    t_end: int
    offered_requests: int = 0
    packets_in: int = 0
    packets_out: int = 0
    drops: int = 0
    completed: int = 0
    event_backlog: int = 0
    buffer_backlog: int = 0
    core_work_ns: dict[int, int] = field(default_factory=dict)

    @property
    def length_ns(self) -> int:
        """Period length."""
        return self.t_end - self.t_start


@dataclass
class LoadSummary:
    """What the manager concluded about one period.

    Attributes:
        load_pct: Offered rate as a percentage of the reference capacity.
        offered_rps: Offered rate.
        busy_ratio: Share of the period each core spent working.
        overloaded: Cores above the overload ratio this period.
    """

    load_pct: float
    offered_rps: float
    busy_ratio: dict[int, float] = field(default_factory=dict)
    overloaded: dict[int, bool] = field(default_factory=dict)


@dataclass
class MigrationReport:
    """Changes made when a plan was applied.

    Attributes:
        moved: (coroutine, from core, to core).
        suspended: Coroutines set to drain and suspend.
        woken: Coroutines brought back from suspension.
        groups: (flow group, from stack, to stack).
        rebound_flows: Flows whose event routing changed.
    """

    moved: list[tuple[str, int, int]] = field(default_factory=list)
    suspended: list[str] = field(default_factory=list)
    woken: list[str] = field(default_factory=list)
    groups: list[tuple[int, int, int]] = field(default_factory=list)
    rebound_flows: int = 0

    @property
    def empty(self) -> bool:
        """Nothing changed."""
        return not (self.moved or self.suspended or self.woken or self.groups or self.rebound_flows)


class PlanTarget(Protocol):
    """The runtime a plan is applied to."""

    def apply_plan(self, plan: ResourcePlan) -> MigrationReport:
        """Suspend, wake and move coroutines and remap flow groups."""
        ...


class ResourceManager:
    """Per-period load detection and plan decisions.

    Example:
        >>> manager = ResourceManager(num_cores=8, num_groups=16)
        >>> period = StatisticPeriod(index=0, t_start=0, t_end=10_000_000, offered_requests=200)
        >>> manager.collect(period).load_pct
        10.0
    """

    def __init__(
        self,
        num_cores: int,
        num_groups: int,
        policy: Optional[PolicyTable] = None,
        period_ns: int = DEFAULT_STATISTIC_PERIOD_NS,
        reference_rps: float = DEFAULT_REFERENCE_RPS,
        overload_ratio: float = OVERLOAD_BUSY_RATIO,
        overload_periods: int = OVERLOAD_CONSECUTIVE_PERIODS,
        target: Optional[PlanTarget] = None,
        pool_stacks: Optional[int] = None,
        pool_apps: Optional[int] = None,
    ) -> None:
        """Initialize the manager.

        Args:
            num_cores: Cores available to plans.
            num_groups: RSS flow groups.
            policy: Load-to-plan table.
            period_ns: Statistic period.
            reference_rps: Offered rate that counts as 100% load.
            overload_ratio: Busy share above which a core is overloaded.
            overload_periods: Consecutive overloaded periods before moving
                application load off a core.
            target: Runtime plans are applied to.
            pool_stacks: Stack coroutines created at start (default: table max).
            pool_apps: App coroutines created at start (default: table max).

        Raises:
            ValueError: If a period or reference is not positive.
        """
        if period_ns <= 0:
            raise ValueError(f"period_ns must be > 0, got {period_ns}")
        if reference_rps <= 0:
            raise ValueError(f"reference_rps must be > 0, got {reference_rps}")
        self.num_cores = num_cores
        self.num_groups = num_groups
        self.policy = policy or PolicyTable()
        self.period_ns = period_ns
        self.reference_rps = reference_rps
        self.overload_ratio = overload_ratio
        self.overload_periods = overload_periods
        self.target = target
        self.pool_stacks = pool_stacks or self.policy.max_stack_coroutines
        self.pool_apps = pool_apps or self.policy.max_app_coroutines
        self.overload_streak: dict[int, int] = {}

    def collect(self, period: StatisticPeriod) -> LoadSummary:
        """Summarize a completed period.

        Args:
            period: Counters of the period.

        Returns:
            LoadSummary with load and per-core overload flags.
        """
        length = period.length_ns or self.period_ns
        offered_rps = period.offered_requests * NS_PER_S / length
        summary = LoadSummary(load_pct=100.0 * offered_rps / self.reference_rps, offered_rps=offered_rps)
        for core, work in period.core_work_ns.items():
            ratio = work / length
            overloaded = ratio > self.overload_ratio
            summary.busy_ratio[core] = ratio
            summary.overloaded[core] = overloaded
            self.overload_streak[core] = self.overload_streak.get(core, 0) + 1 if overloaded else 0
        return summary

    def decide(self, summary: LoadSummary, current: ResourcePlan) -> ResourcePlan:
        """Choose the plan for the next period.

        The plan moves at most one policy step per period toward the step
        that matches the load, so a large load change takes several
        periods to reach its plan. A current plan that matches no step
        jumps straight to the matching one.

        Args:
            summary: Summary of the period just completed.
            current: Plan in effect.

        Returns:
            The next plan; ``current`` itself when nothing should change.
        """
        entry = self._next_step(self.policy.lookup(summary.load_pct), current)
        if entry is None:
            return self._relieve_overload(current)
        return pack(
            entry.stack_coroutines,
            entry.app_coroutines,
            self.num_cores,
            self.num_groups,
            entry.core_roles,
        )

    def _next_step(self, wanted: PolicyEntry, current: ResourcePlan) -> Optional[PolicyEntry]:
        size = (current.stack_coroutines, current.app_coroutines)
        if (wanted.stack_coroutines, wanted.app_coroutines) == size:
            return None
        entries = self.policy.entries
        target = next(i for i, e in enumerate(entries) if e is wanted)
        matching = [i for i, e in enumerate(entries) if (e.stack_coroutines, e.app_coroutines) == size]
        if not matching:
            return wanted
        index = matching[0] if target > matching[0] else matching[-1]
        step = 1 if target > index else -1
        # Steps of the current size are skipped
        while index != target:
            index += step
            if (entries[index].stack_coroutines, entries[index].app_coroutines) != size:
                break
        return entries[index]

    def _relieve_overload(self, plan: ResourcePlan) -> ResourcePlan:
        roles = plan.core_roles
        for core, streak in sorted(self.overload_streak.items()):
            apps = plan.apps_on(core)
            if streak < self.overload_periods or len(apps) < 2:
                continue
            idle = [c for c, r in enumerate(roles) if r is CoreRole.IDLE]
            if idle:
                target = idle[0]
            else:
                candidates = [
                    c
                    for c, r in enumerate(roles)
                    if c != core
                    and r in (CoreRole.APP_ONLY, CoreRole.SHARED)
                    and len(plan.apps_on(c)) < len(apps) - 1
                ]
                if not candidates:
                    continue
                target = min(candidates, key=lambda c: (len(plan.apps_on(c)), c))
            self.overload_streak[core] = 0
            logger.info("Core %d overloaded; moving A%d to core %d", core, apps[-1], target)
            return plan.with_app_moved(apps[-1], target)
        return plan

    def apply(self, plan: ResourcePlan) -> MigrationReport:
        """Apply a plan to the runtime.

        Args:
            plan: Plan to put in effect.

        Returns:
            What moved.

        Raises:
            InvalidPlanError: If the plan is inconsistent or needs
                coroutines beyond the pool created at start.
        """
        plan.validate()
        if plan.stack_coroutines > self.pool_stacks or plan.app_coroutines > self.pool_apps:
            raise InvalidPlanError(
                f"{plan.describe()} exceeds the coroutine pool "
                f"({self.pool_stacks} stacks, {self.pool_apps} apps)"
            )
        if plan.num_cores != self.num_cores:
            raise InvalidPlanError(f"Plan covers {plan.num_cores} cores, host has {self.num_cores}")
        if self.target is None:
            return MigrationReport()
        return self.target.apply_plan(plan)
