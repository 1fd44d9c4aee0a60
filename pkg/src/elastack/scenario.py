"""Scenario files, experiment presets and acceptance checks.

A scenario is one simulated run: topology, thresholds, feature toggles,
extraction setup, workload and resource policy. An experiment groups the
variants of one comparison with the checks that relate their reports.
Scenario files are JSON validated with pydantic; unknown keys are
rejected.
"""

import copy
import json
import logging
import operator
from collections.abc import Callable
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator

from elastack.config import get_config
from elastack.constants import (
    CHECK_COST_NS,
    COROUTINE_BUDGET_NS,
    DEFAULT_REFERENCE_RPS,
    DEFAULT_RESPONSE_BYTES,
    MAX_NIC_QUEUES,
    NIC_CHECK_INTERVAL_NS,
    NIC_QUEUE_CAPACITY,
    NS_PER_MS,
    NS_PER_S,
    NS_PER_US,
    OVERLOAD_BUSY_RATIO,
    OVERLOAD_CONSECUTIVE_PERIODS,
    TCP_PROCESS_INTERVAL_NS,
    CoreRole,
    ExtractionMode,
    Priority,
)
from elastack.errors import ScenarioError, UnknownPresetError
from elastack.resources import PolicyEntry
from elastack.workload import BurstSpec, RateStep, RequestClass, WorkloadSpec

logger = logging.getLogger(__name__)


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TopologyConfig(_Model):
    """Cores, NIC rings and buffer sizes."""

    cores: int = Field(1, ge=1)
    nic_queues: int = Field(4, ge=1, le=MAX_NIC_QUEUES)
    nic_capacity: int = Field(NIC_QUEUE_CAPACITY, ge=1)
    rx_capacity: Optional[int] = Field(None, ge=1)
    response_bytes: int = Field(DEFAULT_RESPONSE_BYTES, gt=0)


class ThresholdConfig(_Model):
    """Fastcalldown thresholds and checkpoint spacing."""

    nic_check_interval_ns: int = Field(NIC_CHECK_INTERVAL_NS, gt=0)
    tcp_process_interval_ns: int = Field(TCP_PROCESS_INTERVAL_NS, gt=0)
    coroutine_budget_ns: int = Field(COROUTINE_BUDGET_NS, gt=0)
    check_cost_ns: int = Field(CHECK_COST_NS, ge=0)
    checkpoint_interval_ns: int = Field(
        default_factory=lambda: get_config().timing.checkpoint_interval_ns, gt=0
    )


class FeatureToggles(_Model):
    """Independent switches for fastcalldown and the priority features."""

    explicit_checkpoints: bool = True
    event_prio: bool = True
    ooo_prio: bool = True
    driver_prio: bool = True
    diffluence: bool = False
    priority_yield: bool = False


class ExtractionConfig(_Model):
    """Which extraction points run."""

    mode: ExtractionMode = ExtractionMode.NONE


class RequestClassModel(_Model):
    """One class of the request mix."""

    name: str
    fraction: float = Field(ge=0, le=1)
    service_time_ns: int = Field(gt=0)
    priority: Priority = Priority.LOW
    request_bytes: int = Field(64, gt=0)


class BurstModel(_Model):
    """Burst arrival mode."""

    bursts_per_s: float = Field(gt=0)
    burst_size: int = Field(ge=1)
    spacing_ns: Optional[int] = Field(None, ge=1)


class RateStepModel(_Model):
    """Offered rate from ``at_ns`` on."""

    at_ns: int = Field(ge=0)
    rate_rps: float = Field(ge=0)


class WorkloadConfig(_Model):
    """Open-loop workload; ``drain_ns`` is simulated after the arrival window."""

    num_connections: int = Field(64, ge=1)
    classes: list[RequestClassModel] = Field(min_length=1)
    rate_rps: float = Field(0.0, ge=0)
    duration_ns: int = Field(100 * NS_PER_MS, gt=0)
    arrival: Literal["uniform", "poisson"] = "uniform"
    steps: list[RateStepModel] = Field(default_factory=list)
    burst: Optional[BurstModel] = None
    compress_to_ns: Optional[int] = Field(None, gt=0, le=NS_PER_S)
    drain_ns: int = Field(50 * NS_PER_MS, ge=0)

    @model_validator(mode="after")
    def _check_mix(self) -> "WorkloadConfig":
        total = sum(c.fraction for c in self.classes)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"class fractions must sum to 1, got {total}")
        if self.burst is None and self.rate_rps <= 0 and not self.steps:
            raise ValueError("a rate, rate steps or a burst mode is required")
        return self

    def to_spec(self, seed: int) -> WorkloadSpec:
        """Build the generator input."""
        return WorkloadSpec(
            num_connections=self.num_connections,
            classes=[RequestClass(**c.model_dump()) for c in self.classes],
            rate_rps=self.rate_rps,
            duration_ns=self.duration_ns,
            seed=seed,
            arrival=self.arrival,
            steps=[RateStep(s.at_ns, s.rate_rps) for s in self.steps],
            burst=BurstSpec(**self.burst.model_dump()) if self.burst is not None else None,
            compress_to_ns=self.compress_to_ns,
        )


class PolicyEntryModel(_Model):
    """One row of a policy table file."""

    load_pct_max: float = Field(ge=0)
    K: int = Field(ge=1)
    M: int = Field(ge=1)
    core_roles: Optional[list[CoreRole]] = None

    def to_entry(self) -> PolicyEntry:
        """Convert to the resource manager's entry type."""
        roles = tuple(self.core_roles) if self.core_roles is not None else None
        return PolicyEntry(self.load_pct_max, self.K, self.M, roles)


class ResourceConfig(_Model):
    """Initial plan and the dynamic-detect policy."""

    dynamic: bool = False
    stack_coroutines: int = Field(1, ge=1)
    app_coroutines: int = Field(1, ge=1)
    core_roles: Optional[list[CoreRole]] = None
    period_ns: int = Field(
        default_factory=lambda: get_config().timing.statistic_period_ns, gt=0
    )
    reference_rps: float = Field(DEFAULT_REFERENCE_RPS, gt=0)
    overload_ratio: float = Field(OVERLOAD_BUSY_RATIO, gt=0)
    overload_periods: int = Field(OVERLOAD_CONSECUTIVE_PERIODS, ge=1)
    policy: Optional[list[PolicyEntryModel]] = None
    policy_file: Optional[str] = None

    def policy_entries(self) -> Optional[list[PolicyEntry]]:
        """Get the configured policy table, None for the default.

        Raises:
            ScenarioError: If the policy file cannot be loaded.
        """
        if self.policy is not None:
            return [entry.to_entry() for entry in self.policy]
        if self.policy_file is not None:
            return load_policy(Path(self.policy_file))
        return None


Comparison = Literal["<", "<=", "==", "!=", ">=", ">"]

_OPERATORS: dict[str, Callable[[Any, Any], bool]] = {
    "<": operator.lt,
    "<=": operator.le,
    "==": operator.eq,
    "!=": operator.ne,
    ">=": operator.ge,
    ">": operator.gt,
}


class Check(_Model):
    """Acceptance check ``left op factor * right``.

    Paths are dotted report paths; in an experiment they start with the
    variant name (``on.nic.drops``). ``right`` is a number or a path.
    """

    name: str
    left: str
    op: Comparison
    right: Union[float, str]
    factor: float = 1.0


class CheckResult(_Model):
    """Outcome of one check."""

    name: str
    passed: bool
    left: Any = None
    right: Any = None
    detail: str = ""


def evaluate_check(check: Check, resolve: Callable[[str], Any]) -> CheckResult:
    """Evaluate a check against resolved report values.

    Args:
        check: The check.
        resolve: Maps a dotted path to its value; raises KeyError if absent.

    Returns:
        CheckResult; a missing or empty value fails the check.
    """
    try:
        left = resolve(check.left)
        right = resolve(check.right) if isinstance(check.right, str) else check.right
    except (KeyError, IndexError, ValueError) as e:
        return CheckResult(name=check.name, passed=False, detail=f"missing value: {e}")
    if left is None or right is None:
        return CheckResult(name=check.name, passed=False, left=left, right=right, detail="no data")
    passed = _OPERATORS[check.op](left, check.factor * right)
    return CheckResult(
        name=check.name,
        passed=bool(passed),
        left=left,
        right=right,
        detail=f"{left} {check.op} {check.factor:g} * {right}",
    )


class Scenario(_Model):
    """One simulated run."""

    name: str = "scenario"
    seed: int = Field(default_factory=lambda: get_config().run.seed)
    topology: TopologyConfig = Field(default_factory=TopologyConfig)
    thresholds: ThresholdConfig = Field(default_factory=ThresholdConfig)
    features: FeatureToggles = Field(default_factory=FeatureToggles)
    extraction: ExtractionConfig = Field(default_factory=ExtractionConfig)
    workload: WorkloadConfig
    resources: ResourceConfig = Field(default_factory=ResourceConfig)
    checks: list[Check] = Field(default_factory=list)


class Experiment(_Model):
    """Variants of one comparison and the checks relating them."""

    name: str
    description: str = ""
    variants: dict[str, Scenario]
    checks: list[Check] = Field(default_factory=list)


# ---------------------------------------------------------------------- #
# Loading and overrides
# ---------------------------------------------------------------------- #


def parse_value(text: str) -> Any:
    """Parse an override value as a JSON literal, falling back to a string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Apply ``a.b.c=value`` overrides to a raw scenario dict in place.

    Raises:
        ScenarioError: If an override is malformed or walks into a non-object.
    """
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ScenarioError(f"Override must look like key=value, got {item!r}")
        parts = key.split(".")
        node = data
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ScenarioError(f"Override {key!r}: {part!r} is not an object")
            node = child
        node[parts[-1]] = parse_value(raw)
    return data


def scenario_from_dict(data: dict[str, Any], overrides: Optional[list[str]] = None) -> Scenario:
    """Validate a raw scenario dict after applying overrides.

    Raises:
        ScenarioError: If the result is not a valid scenario.
    """
    data = apply_overrides(copy.deepcopy(data), overrides or [])
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        raise ScenarioError(f"Invalid scenario: {e}") from e


def load_scenario(ref: str, overrides: Optional[list[str]] = None) -> Scenario:
    """Load a scenario from a JSON file or a ``preset.variant`` reference.

    Args:
        ref: File path, or preset name and variant such as ``exp2.on``.
        overrides: ``key=value`` overrides.

    Returns:
        The validated scenario.

    Raises:
        ScenarioError: If the file is unreadable or invalid.
        UnknownPresetError: If a preset reference does not resolve.
    """
    path = Path(ref)
    if path.exists():
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ScenarioError(f"Cannot read scenario {path}: {e}") from e
        if not isinstance(data, dict):
            raise ScenarioError(f"Scenario {path} must hold a JSON object")
        return scenario_from_dict(data, overrides)
    preset_name, _, variant = ref.partition(".")
    if preset_name not in PRESETS:
        raise UnknownPresetError(f"No scenario file or preset named {ref!r}")
    experiment = preset(preset_name)
    if not variant:
        variant = next(iter(experiment.variants))
    if variant not in experiment.variants:
        raise UnknownPresetError(
            f"Preset {preset_name} has no variant {variant!r} "
            f"(have {', '.join(experiment.variants)})"
        )
    return scenario_from_dict(experiment.variants[variant].model_dump(mode="json"), overrides)


def load_policy(path: Path) -> list[PolicyEntry]:
    """Load a policy table file: a JSON list of {load_pct_max, K, M, core_roles?}.

    Raises:
        ScenarioError: If the file is unreadable or invalid.
    """
    try:
        rows = TypeAdapter(list[PolicyEntryModel]).validate_json(path.read_text())
    except OSError as e:
        raise ScenarioError(f"Cannot read policy {path}: {e}") from e
    except ValidationError as e:
        raise ScenarioError(f"Invalid policy {path}: {e}") from e
    try:
        return [row.to_entry() for row in rows]
    except ValueError as e:
        raise ScenarioError(f"Invalid policy {path}: {e}") from e


# ---------------------------------------------------------------------- #
# Presets
# ---------------------------------------------------------------------- #


def _high(p99_path: str) -> str:
    return f"{p99_path}.latency.priority.high.p99_ns"


def _exp1() -> Experiment:
    scenario = Scenario(
        name="exp1.dynamic",
        topology=TopologyConfig(cores=8, nic_queues=6),
        workload=WorkloadConfig(
            num_connections=120,
            classes=[RequestClassModel(name="request", fraction=1.0, service_time_ns=8 * NS_PER_US)],
            rate_rps=20_000,
            steps=[RateStepModel(at_ns=25 * NS_PER_MS, rate_rps=150_000)],
            duration_ns=60 * NS_PER_MS,
            drain_ns=10 * NS_PER_MS,
        ),
        resources=ResourceConfig(dynamic=True, period_ns=10 * NS_PER_MS),
    )
    return Experiment(
        name="exp1",
        description="Load step from 10% to 75% of a 200 KRPS reference under dynamic detect",
        variants={"dynamic": scenario},
        checks=[
            Check(
                name="K=3, M=6 applied within two periods of the step",
                left="dynamic.resources.applied.3x6",
                op="<=",
                right=float(45 * NS_PER_MS),
            ),
            Check(
                name="p99 recovers to 1.5x of the pre-step value",
                left="dynamic.resources.recovery.settled_p99_all_ns",
                op="<=",
                right="dynamic.resources.recovery.baseline_p99_all_ns",
                factor=1.5,
            ),
        ],
    )


def _exp2() -> Experiment:
    base = Scenario(
        name="exp2.on",
        topology=TopologyConfig(cores=1, nic_queues=1),
        workload=WorkloadConfig(
            classes=[
                RequestClassModel(name="short", fraction=0.995, service_time_ns=1 * NS_PER_US),
                RequestClassModel(name="long", fraction=0.005, service_time_ns=1 * NS_PER_MS),
            ],
            burst=BurstModel(bursts_per_s=1, burst_size=60_000),
            duration_ns=NS_PER_S,
            drain_ns=100 * NS_PER_MS,
        ),
    )
    off = base.model_copy(
        update={
            "name": "exp2.off",
            "features": FeatureToggles(explicit_checkpoints=False),
        }
    )
    return Experiment(
        name="exp2",
        description="Line-rate burst with 1 ms requests; fastcalldown on vs off",
        variants={"on": base, "off": off},
        checks=[
            Check(name="no drops with fastcalldown", left="on.nic.drops", op="==", right=0),
            Check(name="drops without fastcalldown", left="off.nic.drops", op=">", right=0),
        ],
    )


def _exp3() -> Experiment:
    def variant(name: str, mode: ExtractionMode, request_bytes: int) -> Scenario:
        return Scenario(
            name=f"exp3.{name}",
            topology=TopologyConfig(cores=1, nic_queues=1),
            extraction=ExtractionConfig(mode=mode),
            workload=WorkloadConfig(
                classes=[
                    RequestClassModel(
                        name="high",
                        fraction=0.05,
                        service_time_ns=100 * NS_PER_US,
                        priority=Priority.HIGH,
                        request_bytes=request_bytes,
                    ),
                    RequestClassModel(
                        name="low",
                        fraction=0.95,
                        service_time_ns=100 * NS_PER_US,
                        request_bytes=request_bytes,
                    ),
                ],
                rate_rps=8_500,
                arrival="poisson",
                duration_ns=500 * NS_PER_MS,
                drain_ns=200 * NS_PER_MS,
            ),
        )

    return Experiment(
        name="exp3",
        description="Stateful TCP-layer vs stateless driver-layer labeling of 3-packet requests",
        variants={
            "tcp": variant("tcp", ExtractionMode.TCP, 4096),
            "driver": variant("driver", ExtractionMode.DRIVER, 4096),
            "none": variant("none", ExtractionMode.NONE, 4096),
            "driver_1024": variant("driver_1024", ExtractionMode.DRIVER, 1024),
        },
        checks=[
            Check(
                name="stateful labeling marks every High packet",
                left="tcp.labels.high_labeled",
                op="==",
                right="tcp.labels.high_request_packets",
            ),
            Check(
                name="stateless labeling marks only header packets",
                left="driver.labels.high_labeled",
                op="==",
                right="driver.labels.high_requests",
            ),
            Check(
                name="stateless labeling misses continuation packets",
                left="driver.labels.high_continuation_labeled",
                op="==",
                right=0,
            ),
            Check(
                name="single-packet requests are fully labeled at the driver",
                left="driver_1024.labels.high_labeled",
                op="==",
                right="driver_1024.labels.high_request_packets",
            ),
            Check(
                name="stateful High p99 below stateless",
                left=_high("tcp"),
                op="<",
                right=_high("driver"),
            ),
            Check(
                name="stateless High p99 not above unlabeled",
                left=_high("driver"),
                op="<=",
                right=_high("none"),
            ),
        ],
    )


def _exp4() -> Experiment:
    workload = WorkloadConfig(
        classes=[
            RequestClassModel(
                name="lc", fraction=0.9, service_time_ns=5 * NS_PER_US, priority=Priority.HIGH
            ),
            RequestClassModel(name="be", fraction=0.1, service_time_ns=500 * NS_PER_US),
        ],
        burst=BurstModel(bursts_per_s=200, burst_size=50),
        duration_ns=100 * NS_PER_MS,
    )
    shared = Scenario(
        name="exp4.shared",
        topology=TopologyConfig(cores=1, nic_queues=1),
        extraction=ExtractionConfig(mode=ExtractionMode.DRIVER),
        features=FeatureToggles(priority_yield=True),
        workload=workload,
    )
    dedicated = Scenario(
        name="exp4.dedicated",
        topology=TopologyConfig(cores=2, nic_queues=1),
        extraction=ExtractionConfig(mode=ExtractionMode.DRIVER),
        features=FeatureToggles(priority_yield=True),
        workload=workload,
        resources=ResourceConfig(core_roles=[CoreRole.STACK_ONLY, CoreRole.APP_ONLY]),
    )
    return Experiment(
        name="exp4",
        description="Latency-critical and best-effort co-location: shared core vs dedicated stack core",
        variants={"shared": shared, "dedicated": dedicated},
        checks=[
            Check(
                name="sharing the stack core raises CPU efficiency",
                left="shared.cpu.eta",
                op=">",
                right="dedicated.cpu.eta",
            ),
        ],
    )


def _exp5() -> Experiment:
    def variant(name: str, mode: ExtractionMode) -> Scenario:
        return Scenario(
            name=f"exp5.{name}",
            topology=TopologyConfig(cores=1, nic_queues=1),
            extraction=ExtractionConfig(mode=mode),
            workload=WorkloadConfig(
                classes=[
                    RequestClassModel(
                        name="high",
                        fraction=0.05,
                        service_time_ns=10 * NS_PER_US,
                        priority=Priority.HIGH,
                    ),
                    RequestClassModel(name="low", fraction=0.95, service_time_ns=10 * NS_PER_US),
                ],
                burst=BurstModel(bursts_per_s=50, burst_size=1000),
                duration_ns=100 * NS_PER_MS,
            ),
        )

    return Experiment(
        name="exp5",
        description="Extraction at the driver vs the TCP layer vs no labeling under bursts",
        variants={
            "driver": variant("driver", ExtractionMode.DRIVER),
            "tcp": variant("tcp", ExtractionMode.TCP),
            "none": variant("none", ExtractionMode.NONE),
        },
        checks=[
            Check(name="driver-layer below TCP-layer", left=_high("driver"), op="<", right=_high("tcp")),
            Check(name="TCP-layer below no labeling", left=_high("tcp"), op="<", right=_high("none")),
        ],
    )


def _exp6() -> Experiment:
    workload = WorkloadConfig(
        num_connections=100,
        classes=[
            RequestClassModel(
                name="short", fraction=0.995, service_time_ns=1 * NS_PER_US, priority=Priority.HIGH
            ),
            RequestClassModel(name="long", fraction=0.005, service_time_ns=1 * NS_PER_MS),
        ],
        rate_rps=100_000,
        duration_ns=100 * NS_PER_MS,
    )
    diffluence = Scenario(
        name="exp6.diffluence",
        topology=TopologyConfig(cores=2, nic_queues=1),
        extraction=ExtractionConfig(mode=ExtractionMode.DRIVER),
        features=FeatureToggles(diffluence=True),
        workload=workload,
        resources=ResourceConfig(
            stack_coroutines=1,
            app_coroutines=2,
            core_roles=[CoreRole.SHARED, CoreRole.APP_ONLY],
        ),
    )
    single = Scenario(
        name="exp6.no_diffluence",
        topology=TopologyConfig(cores=1, nic_queues=1),
        extraction=ExtractionConfig(mode=ExtractionMode.DRIVER),
        workload=workload,
    )
    return Experiment(
        name="exp6",
        description="Priority diffluence of 1 ms requests to a dedicated core",
        variants={"diffluence": diffluence, "no_diffluence": single},
        checks=[
            Check(
                name="High p99 under 100 us with diffluence",
                left=_high("diffluence"),
                op="<",
                right=float(100 * NS_PER_US),
            ),
            Check(
                name="High p99 blocked behind 1 ms requests without diffluence",
                left=_high("no_diffluence"),
                op=">=",
                right=float(NS_PER_MS),
            ),
        ],
    )


def _exp7() -> Experiment:
    scenario = Scenario(
        name="exp7.compressed",
        topology=TopologyConfig(cores=8, nic_queues=6),
        workload=WorkloadConfig(
            num_connections=2000,
            classes=[
                RequestClassModel(
                    name="alarm", fraction=0.05, service_time_ns=2 * NS_PER_US, priority=Priority.HIGH
                ),
                RequestClassModel(name="telemetry", fraction=0.95, service_time_ns=2 * NS_PER_US),
            ],
            rate_rps=20_000,
            duration_ns=NS_PER_S,
            compress_to_ns=100 * NS_PER_MS,
            drain_ns=20 * NS_PER_MS,
        ),
        extraction=ExtractionConfig(mode=ExtractionMode.DRIVER),
        resources=ResourceConfig(dynamic=True, period_ns=10 * NS_PER_MS),
    )
    return Experiment(
        name="exp7",
        description="High-concurrency IoT traffic with each second compressed into 100 ms",
        variants={"compressed": scenario},
        checks=[
            Check(name="every request answered", left="compressed.requests.incomplete", op="==", right=0),
            Check(name="no NIC drops", left="compressed.nic.drops", op="==", right=0),
        ],
    )


PRESETS: dict[str, Callable[[], Experiment]] = {
    "exp1": _exp1,
    "exp2": _exp2,
    "exp3": _exp3,
    "exp4": _exp4,
    "exp5": _exp5,
    "exp6": _exp6,
    "exp7": _exp7,
}


def preset(name: str) -> Experiment:
    """Get an experiment preset by name.

    Raises:
        UnknownPresetError: If the name is not a known preset.
    """
    factory = PRESETS.get(name)
    if factory is None:
        raise UnknownPresetError(f"Unknown preset {name!r} (have {', '.join(PRESETS)})")
    return factory()


def write_preset(name: str, out_dir: Path) -> list[Path]:
    """Write one scenario JSON file per variant of a preset.

    Returns:
        Written paths, named ``<preset>_<variant>.json``.
    """
    experiment = preset(name)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for variant, scenario in experiment.variants.items():
        path = out_dir / f"{name}_{variant}.json"
        path.write_text(json.dumps(scenario.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")
        paths.append(path)
    logger.info("Wrote %d scenario files for %s", len(paths), name)
    return paths
