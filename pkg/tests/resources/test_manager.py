"""Tests for the dynamic-detect resource manager."""

import pytest

from elastack.constants import NS_PER_MS
from elastack.errors import InvalidPlanError
from elastack.resources import (
    MigrationReport,
    ResourceManager,
    ResourcePlan,
    StatisticPeriod,
    pack,
)


class RecordingTarget:
    """Plan target that records the plans applied to it."""

    def __init__(self) -> None:
        self.plans: list[ResourcePlan] = []

    def apply_plan(self, plan: ResourcePlan) -> MigrationReport:
        self.plans.append(plan)
        return MigrationReport(rebound_flows=1)


def period(offered: int, work: dict[int, int] | None = None, index: int = 0) -> StatisticPeriod:
    """Build a 10 ms period."""
    return StatisticPeriod(
        index=index,
        t_start=index * 10 * NS_PER_MS,
        t_end=(index + 1) * 10 * NS_PER_MS,
        offered_requests=offered,
        core_work_ns=work or {},
    )


class TestCollect:
    """Tests for ResourceManager.collect."""

    def test_load_percentage(self) -> None:
        """Test offered requests become a percentage of the reference."""
        manager = ResourceManager(num_cores=8, num_groups=6)
        summary = manager.collect(period(200))
        assert summary.offered_rps == pytest.approx(20_000)
        assert summary.load_pct == pytest.approx(10.0)

    def test_overload_streak(self) -> None:
        """Test consecutive saturated periods build a streak that resets."""
        manager = ResourceManager(num_cores=8, num_groups=6)
        busy = {7: 9_800_000}
        manager.collect(period(0, busy))
        assert manager.collect(period(0, busy, 1)).overloaded[7]
        assert manager.overload_streak[7] == 2
        manager.collect(period(0, {7: 1_000_000}, 2))
        assert manager.overload_streak[7] == 0

    def test_invalid_settings(self) -> None:
        """Test period and reference must be positive."""
        with pytest.raises(ValueError):
            ResourceManager(num_cores=1, num_groups=1, period_ns=0)
        with pytest.raises(ValueError):
            ResourceManager(num_cores=1, num_groups=1, reference_rps=0)


class TestDecide:
    """Tests for ResourceManager.decide."""

    def test_grows_one_step_per_period(self) -> None:
        """Test a step to 75% load reaches K=3, M=6 through K=2, M=4."""
        manager = ResourceManager(num_cores=8, num_groups=6)
        summary = manager.collect(period(1500))
        assert summary.load_pct == pytest.approx(75.0)
        first = manager.decide(summary, pack(1, 1, 8, 6))
        assert (first.stack_coroutines, first.app_coroutines) == (2, 4)
        second = manager.decide(manager.collect(period(1500, index=1)), first)
        assert (second.stack_coroutines, second.app_coroutines) == (3, 6)
        assert second == pack(3, 6, 8, 6)
        assert manager.decide(manager.collect(period(1500, index=2)), second) is second

    def test_shrinks_one_step_per_period(self) -> None:
        """Test a light load releases cores one step at a time."""
        manager = ResourceManager(num_cores=8, num_groups=6)
        first = manager.decide(manager.collect(period(100)), pack(3, 6, 8, 6))
        assert first == pack(2, 4, 8, 6)
        assert manager.decide(manager.collect(period(100, index=1)), first) == pack(1, 1, 8, 6)

    def test_plan_outside_table_jumps(self) -> None:
        """Test a plan that matches no step goes straight to the load's step."""
        manager = ResourceManager(num_cores=8, num_groups=6)
        summary = manager.collect(period(1500))
        assert manager.decide(summary, pack(1, 2, 8, 6)) == pack(3, 6, 8, 6)

    def test_unchanged(self) -> None:
        """Test the current plan is kept when the step matches."""
        manager = ResourceManager(num_cores=8, num_groups=6)
        current = pack(2, 4, 8, 6)
        summary = manager.collect(period(600))
        assert manager.decide(summary, current) is current

    def test_overload_moves_app_to_idle_core(self) -> None:
        """Test a saturated core hands an app to the first idle core."""
        manager = ResourceManager(num_cores=8, num_groups=6)
        current = pack(2, 4, 8, 6)
        busy = {7: 9_900_000}
        manager.collect(period(600, busy))
        summary = manager.collect(period(600, busy, 1))
        decided = manager.decide(summary, current)
        assert decided.app_cores == (7, 2, 6, 6)
        assert manager.overload_streak[7] == 0

    def test_single_overload_period_waits(self) -> None:
        """Test one saturated period is not enough to move."""
        manager = ResourceManager(num_cores=8, num_groups=6)
        current = pack(2, 4, 8, 6)
        summary = manager.collect(period(600, {7: 9_900_000}))
        assert manager.decide(summary, current) is current


class TestApply:
    """Tests for ResourceManager.apply."""

    def test_applies_to_target(self) -> None:
        """Test a valid plan reaches the target."""
        target = RecordingTarget()
        manager = ResourceManager(num_cores=8, num_groups=6, target=target)
        report = manager.apply(pack(2, 4, 8, 6))
        assert target.plans == [pack(2, 4, 8, 6)]
        assert report.rebound_flows == 1

    def test_without_target(self) -> None:
        """Test applying without a runtime changes nothing."""
        manager = ResourceManager(num_cores=8, num_groups=6)
        assert manager.apply(pack(1, 1, 8, 6)).empty

    def test_beyond_pool(self) -> None:
        """Test plans larger than the pool are refused."""
        manager = ResourceManager(num_cores=8, num_groups=6)
        with pytest.raises(InvalidPlanError):
            manager.apply(pack(4, 4, 8, 6))

    def test_core_count_mismatch(self) -> None:
        """Test plans for another core count are refused."""
        manager = ResourceManager(num_cores=8, num_groups=6)
        with pytest.raises(InvalidPlanError):
            manager.apply(pack(1, 1, 4, 6))
