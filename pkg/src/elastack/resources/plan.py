"""Resource plans: which coroutines run where and which stack owns which flows."""

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from elastack.constants import APPS_PER_CORE, CoreRole
from elastack.errors import InvalidPlanError


@dataclass(frozen=True)
class ResourcePlan:
    """Placement of K stack and M application coroutines on cores.

    Core roles follow from the placement: a core with a stack and apps is
    Shared, a stack alone is StackOnly, apps alone are AppOnly and an
    empty core is Idle (released).

    Attributes:
        stack_cores: Core of stack coroutine i.
        app_cores: Core of application coroutine j.
        group_to_stack: Stack coroutine owning RSS flow group g.
        num_cores: Cores the plan covers.
    """

    stack_cores: tuple[int, ...]
    app_cores: tuple[int, ...]
    group_to_stack: tuple[int, ...]
    num_cores: int

    @property
    def stack_coroutines(self) -> int:
        """K."""
        return len(self.stack_cores)

    @property
    def app_coroutines(self) -> int:
        """M."""
        return len(self.app_cores)

    @property
    def core_roles(self) -> tuple[CoreRole, ...]:
        """Role of every core."""
        stacks = set(self.stack_cores)
        apps = set(self.app_cores)
        roles = []
        for core in range(self.num_cores):
            if core in stacks and core in apps:
                roles.append(CoreRole.SHARED)
            elif core in stacks:
                roles.append(CoreRole.STACK_ONLY)
            elif core in apps:
                roles.append(CoreRole.APP_ONLY)
            else:
                roles.append(CoreRole.IDLE)
        return tuple(roles)

    @property
    def cores_in_use(self) -> int:
        """Cores that are not Idle."""
        return sum(role is not CoreRole.IDLE for role in self.core_roles)

    def apps_on(self, core: int) -> list[int]:
        """Application coroutines placed on a core."""
        return [j for j, c in enumerate(self.app_cores) if c == core]

    def validate(self) -> None:
        """Check the plan is internally consistent.

        Raises:
            InvalidPlanError: If a coroutine sits on a missing core, two
                stacks share a core, or a flow group has no live owner.
        """
        if not self.stack_cores:
            raise InvalidPlanError("A plan needs at least one stack coroutine")
        if not self.app_cores:
            raise InvalidPlanError("A plan needs at least one application coroutine")
        for core in (*self.stack_cores, *self.app_cores):
            if not 0 <= core < self.num_cores:
                raise InvalidPlanError(f"Core {core} outside [0, {self.num_cores})")
        if len(set(self.stack_cores)) != len(self.stack_cores):
            raise InvalidPlanError("Two stack coroutines placed on one core")
        for group, stack in enumerate(self.group_to_stack):
            if not 0 <= stack < self.stack_coroutines:
                raise InvalidPlanError(f"Flow group {group} mapped to missing stack {stack}")

    def with_app_moved(self, app: int, core: int) -> "ResourcePlan":
        """Get a copy with one application coroutine on another core."""
        app_cores = list(self.app_cores)
        app_cores[app] = core
        return replace(self, app_cores=tuple(app_cores))

    def describe(self) -> str:
        """Short text form such as ``K=2 M=4 [S,S,-,A,A]``."""
        marks = {
            CoreRole.SHARED: "A+S",
            CoreRole.STACK_ONLY: "S",
            CoreRole.APP_ONLY: "A",
            CoreRole.IDLE: "-",
        }
        roles = ",".join(marks[r] for r in self.core_roles)
        return f"K={self.stack_coroutines} M={self.app_coroutines} [{roles}]"


def spread_groups(num_groups: int, stack_coroutines: int) -> tuple[int, ...]:
    """Assign flow groups to stacks round-robin."""
    return tuple(g % stack_coroutines for g in range(num_groups))


def pack(
    stack_coroutines: int,
    app_coroutines: int,
    num_cores: int,
    num_groups: int,
    core_roles: Optional[Sequence[CoreRole]] = None,
) -> ResourcePlan:
    """Build a plan for K stacks and M apps.

    Without explicit roles, K = M = 1 shares one core; otherwise stacks
    take the lowest cores one each and apps fill the highest cores two
    at a time, so growing K or M moves few coroutines. With explicit
    roles, stacks go to Shared/StackOnly cores in order and apps are dealt
    round-robin over Shared/AppOnly cores.

    Args:
        stack_coroutines: K.
        app_coroutines: M.
        num_cores: Cores available.
        num_groups: RSS flow groups.
        core_roles: Optional role per core.

    Returns:
        A validated plan.

    Raises:
        InvalidPlanError: If the coroutines do not fit the cores or roles.
    """
    if stack_coroutines < 1 or app_coroutines < 1:
        raise InvalidPlanError("K and M must both be >= 1")
    if core_roles is not None:
        plan = _pack_roles(stack_coroutines, app_coroutines, num_cores, num_groups, core_roles)
    elif stack_coroutines == 1 and app_coroutines == 1:
        plan = ResourcePlan((0,), (0,), spread_groups(num_groups, 1), num_cores)
    else:
        needed = stack_coroutines + math.ceil(app_coroutines / APPS_PER_CORE)
        if needed > num_cores:
            raise InvalidPlanError(
                f"K={stack_coroutines} M={app_coroutines} needs {needed} cores, have {num_cores}"
            )
        plan = ResourcePlan(
            stack_cores=tuple(range(stack_coroutines)),
            app_cores=tuple(num_cores - 1 - j // APPS_PER_CORE for j in range(app_coroutines)),
            group_to_stack=spread_groups(num_groups, stack_coroutines),
            num_cores=num_cores,
        )
    plan.validate()
    return plan


def _pack_roles(
    stack_coroutines: int,
    app_coroutines: int,
    num_cores: int,
    num_groups: int,
    core_roles: Sequence[CoreRole],
) -> ResourcePlan:
    if len(core_roles) > num_cores:
        raise InvalidPlanError(f"{len(core_roles)} roles given for {num_cores} cores")
    stack_slots = [
        c for c, r in enumerate(core_roles) if r in (CoreRole.SHARED, CoreRole.STACK_ONLY)
    ]
    app_slots = [c for c, r in enumerate(core_roles) if r in (CoreRole.SHARED, CoreRole.APP_ONLY)]
    if len(stack_slots) != stack_coroutines:
        raise InvalidPlanError(
            f"Roles provide {len(stack_slots)} stack cores for K={stack_coroutines}"
        )
    if not app_slots:
        raise InvalidPlanError("Roles provide no core for application coroutines")
    return ResourcePlan(
        stack_cores=tuple(stack_slots),
        app_cores=tuple(app_slots[j % len(app_slots)] for j in range(app_coroutines)),
        group_to_stack=spread_groups(num_groups, stack_coroutines),
        num_cores=num_cores,
    )
