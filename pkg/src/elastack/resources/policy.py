"""Load-to-plan policy tables."""

from dataclasses import dataclass
from typing import Optional, Sequence

from elastack.constants import CoreRole


@dataclass(frozen=True)
class PolicyEntry:
    """One step of a policy table.

    Attributes:
        load_pct_max: Highest load (percent of reference) this step covers.
        stack_coroutines: K.
        app_coroutines: M.
        core_roles: Optional explicit role per core.
    """

    load_pct_max: float
    stack_coroutines: int
    app_coroutines: int
    core_roles: Optional[tuple[CoreRole, ...]] = None

    def __post_init__(self) -> None:
        """Validate the step."""
        if self.stack_coroutines < 1 or self.app_coroutines < 1:
            raise ValueError("K and M must both be >= 1")
        if self.load_pct_max < 0:
            raise ValueError(f"load_pct_max must be >= 0, got {self.load_pct_max}")


DEFAULT_POLICY: tuple[PolicyEntry, ...] = (
    PolicyEntry(load_pct_max=12.0, stack_coroutines=1, app_coroutines=1),
    PolicyEntry(load_pct_max=50.0, stack_coroutines=2, app_coroutines=4),
    PolicyEntry(load_pct_max=100.0, stack_coroutines=3, app_coroutines=6),
)


class PolicyTable:
    """Monotone step table from load to (K, M).

    Example:
        >>> table = PolicyTable()
        >>> table.lookup(75.0).stack_coroutines
        3
    """

    def __init__(self, entries: Sequence[PolicyEntry] = DEFAULT_POLICY) -> None:
        """Initialize the table.

        Args:
            entries: Steps in increasing load order.

        Raises:
            ValueError: If the table is empty or not sorted by load.
        """
        if not entries:
            raise ValueError("A policy table needs at least one entry")
        bounds = [e.load_pct_max for e in entries]
        if bounds != sorted(bounds):
            raise ValueError("Policy entries must be sorted by load_pct_max")
        self.entries = tuple(entries)

    def lookup(self, load_pct: float) -> PolicyEntry:
        """Get the step for a load; loads above the table use the last step."""
        for entry in self.entries:
            if load_pct <= entry.load_pct_max:
                return entry
        return self.entries[-1]

    @property
    def max_stack_coroutines(self) -> int:
        """Largest K in the table."""
        return max(e.stack_coroutines for e in self.entries)

    @property
    def max_app_coroutines(self) -> int:
        """Largest M in the table."""
        return max(e.app_coroutines for e in self.entries)
