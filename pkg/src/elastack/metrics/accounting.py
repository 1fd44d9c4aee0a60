"""CPU efficiency accounting: useful application time over consumed time."""

from collections.abc import Iterable
from dataclasses import dataclass, field

from elastack.constants import ChargeKind
from elastack.engine.cores import Core
from elastack.errors import EfficiencyUndefinedError


@dataclass
class CpuAccount:
    """Consumed virtual CPU time.

    Attributes:
        gamma_app: Time in application service work.
        gamma_total: All charged time of stack and app coroutines,
            polling, checks and idle spinning included.
        by_kind: gamma_total split by category.
    """

    gamma_app: int = 0
    gamma_total: int = 0
    by_kind: dict[ChargeKind, int] = field(default_factory=lambda: {k: 0 for k in ChargeKind})

    def __post_init__(self) -> None:
        """Validate the accounting identity."""
        if not 0 <= self.gamma_app <= self.gamma_total:
            raise ValueError(
                f"Need 0 <= gamma_app <= gamma_total, got {self.gamma_app}, {self.gamma_total}"
            )

    @classmethod
    def from_cores(cls, cores: Iterable[Core]) -> "CpuAccount":
        """Sum the charges of a set of cores."""
        by_kind = {k: 0 for k in ChargeKind}
        for core in cores:
            for kind, ns in core.charges.items():
                by_kind[kind] += ns
        return cls(
            gamma_app=by_kind[ChargeKind.APP],
            gamma_total=sum(by_kind.values()),
            by_kind=by_kind,
        )

    def since(self, earlier: "CpuAccount") -> "CpuAccount":
        """Get the time consumed after an earlier snapshot."""
        by_kind = {k: self.by_kind[k] - earlier.by_kind[k] for k in ChargeKind}
        return CpuAccount(
            gamma_app=self.gamma_app - earlier.gamma_app,
            gamma_total=self.gamma_total - earlier.gamma_total,
            by_kind=by_kind,
        )

    def efficiency(self) -> float:
        """Get the share of consumed time spent in application work.

        Raises:
            EfficiencyUndefinedError: If no time was consumed.
        """
        if self.gamma_total == 0:
            raise EfficiencyUndefinedError("No CPU time consumed")
        return self.gamma_app / self.gamma_total

    def share(self, kind: ChargeKind) -> float:
        """Get the share of consumed time in one category (0 when nothing ran)."""
        if self.gamma_total == 0:
            return 0.0
        return self.by_kind[kind] / self.gamma_total
