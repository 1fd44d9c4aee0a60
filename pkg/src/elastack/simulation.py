"""Running scenarios and experiments end to end."""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

from elastack.constants import ChargeKind, CoreRole, Priority
from elastack.errors import EfficiencyUndefinedError
from elastack.fastpath import FcdThresholds
from elastack.metrics import TimelineRow, lookup, summarize_recorder, write_report
from elastack.resources import PolicyTable, ResourceManager, ResourcePlan, pack
from elastack.runtime import HostOptions, HostRuntime
from elastack.scenario import CheckResult, Experiment, Scenario, evaluate_check
from elastack.workload import ArrivalSchedule, generate

logger = logging.getLogger(__name__)


@dataclass
class SimulationResult:
    """Outcome of one scenario run.

    Attributes:
        scenario: The scenario that ran.
        report: JSON-ready report.
        timeline: One row per statistic period.
        checks: Results of the scenario's own checks.
    """

    scenario: Scenario
    report: dict[str, Any]
    timeline: list[TimelineRow]
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """True when every check passed."""
        return all(c.passed for c in self.checks)


@dataclass
class ExperimentResult:
    """Outcome of every variant of an experiment and its checks."""

    experiment: Experiment
    variants: dict[str, SimulationResult]
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        """True when every variant check and experiment check passed."""
        return all(c.passed for c in self.checks) and all(
            v.passed for v in self.variants.values()
        )


def build_plan(scenario: Scenario) -> ResourcePlan:
    """Build the initial plan of a scenario.

    Raises:
        InvalidPlanError: If the coroutines do not fit the topology.
    """
    res = scenario.resources
    return pack(
        res.stack_coroutines,
        res.app_coroutines,
        scenario.topology.cores,
        scenario.topology.nic_queues,
        res.core_roles,
    )


def build_host(scenario: Scenario) -> tuple[HostRuntime, ResourceManager]:
    """Create the host and its resource manager.

    A dynamic scenario sizes the coroutine pool for the largest plan of
    its policy table.

    Raises:
        InvalidPlanError: If the initial plan does not fit.
        ScenarioError: If the policy file cannot be loaded.
    """
    topo = scenario.topology
    res = scenario.resources
    thresholds = scenario.thresholds
    features = scenario.features
    entries = res.policy_entries()
    policy = PolicyTable(entries) if entries is not None else PolicyTable()
    pool_stacks, pool_apps = res.stack_coroutines, res.app_coroutines
    if res.dynamic:
        pool_stacks = max(pool_stacks, policy.max_stack_coroutines)
        pool_apps = max(pool_apps, policy.max_app_coroutines)

    options = HostOptions(
        num_cores=topo.cores,
        nic_queues=topo.nic_queues,
        nic_capacity=topo.nic_capacity,
        rx_capacity=topo.rx_capacity,
        thresholds=FcdThresholds(
            nic_check_interval=thresholds.nic_check_interval_ns,
            tcp_process_interval=thresholds.tcp_process_interval_ns,
            coroutine_budget=thresholds.coroutine_budget_ns,
            check_cost=thresholds.check_cost_ns,
            priority_check=features.priority_yield,
        ),
        checkpoint_interval_ns=(
            thresholds.checkpoint_interval_ns if features.explicit_checkpoints else None
        ),
        extraction=scenario.extraction.mode,
        event_prio=features.event_prio,
        ooo_prio=features.ooo_prio,
        driver_prio=features.driver_prio,
        diffluence=features.diffluence,
        response_bytes=topo.response_bytes,
        pool_stacks=pool_stacks,
        pool_apps=pool_apps,
    )
    host = HostRuntime(options, build_plan(scenario))
    manager = ResourceManager(
        num_cores=topo.cores,
        num_groups=topo.nic_queues,
        policy=policy,
        period_ns=res.period_ns,
        reference_rps=res.reference_rps,
        overload_ratio=res.overload_ratio,
        overload_periods=res.overload_periods,
        target=host,
        pool_stacks=pool_stacks,
        pool_apps=pool_apps,
    )
    return host, manager


def _labels(schedule: ArrivalSchedule) -> dict[str, int]:
    high_requests = sum(1 for r in schedule.requests if r.priority is Priority.HIGH)
    packets = labeled = header_labeled = continuation_labeled = 0
    for arrival in schedule.arrivals:
        packet = arrival.packet
        if packet.request is None or packet.request.priority is not Priority.HIGH:
            continue
        packets += 1
        if packet.metadata_label is not Priority.HIGH:
            continue
        labeled += 1
        if packet.payload:
            header_labeled += 1
        else:
            continuation_labeled += 1
    return {
        "high_requests": high_requests,
        "high_request_packets": packets,
        "high_labeled": labeled,
        "high_header_labeled": header_labeled,
        "high_continuation_labeled": continuation_labeled,
    }


def _first_applied(changes: list[dict[str, Any]]) -> dict[str, int]:
    applied: dict[str, int] = {}
    for change in changes:
        key = f"{change['stack_coroutines']}x{change['app_coroutines']}"
        applied.setdefault(key, change["t_ns"])
    return applied


def recovery_periods(changes: list[dict[str, Any]], timeline: list[TimelineRow]) -> dict[str, Any]:
    """Locate the periods around the first dynamic re-plan.

    The baseline is the last period before the one whose statistics
    triggered the first change. The settled period is the first one that
    starts after the final plan size was first applied.
    """
    dynamic = changes[1:]
    if not dynamic:
        return {}
    recovery: dict[str, Any] = {}
    trigger = next((row for row in timeline if row.t_end_ns == dynamic[0]["t_ns"]), None)
    if trigger is not None and trigger.period > 0:
        baseline = timeline[trigger.period - 1]
        recovery["baseline_period"] = baseline.period
        recovery["baseline_p99_all_ns"] = baseline.p99_all_ns
    final = (dynamic[-1]["stack_coroutines"], dynamic[-1]["app_coroutines"])
    applied = next(
        c["t_ns"] for c in dynamic if (c["stack_coroutines"], c["app_coroutines"]) == final
    )
    settled = next((row for row in timeline if row.t_start_ns >= applied), None)
    if settled is not None:
        recovery["settled_period"] = settled.period
        recovery["settled_p99_all_ns"] = settled.p99_all_ns
    return recovery


def build_report(
    scenario: Scenario, host: HostRuntime, schedule: ArrivalSchedule
) -> dict[str, Any]:
    """Collect every counter of a finished run into a JSON-ready dict."""
    account = host.cpu_account()
    try:
        eta: Optional[float] = account.efficiency()
    except EfficiencyUndefinedError:
        eta = None
    work = (
        account.by_kind[ChargeKind.APP]
        + account.by_kind[ChargeKind.STACK]
        + account.by_kind[ChargeKind.CHECK]
    )
    counters = host.fcd.counters
    first_drops = [q.first_drop_ns for q in host.nic.queues if q.first_drop_ns >= 0]
    plan = host.plan
    return {
        "scenario": scenario.name,
        "seed": scenario.seed,
        "requests": {
            "offered": host.offered,
            "completed": host.completed,
            "incomplete": host.incomplete,
        },
        "latency": {
            "class": summarize_recorder(host.latency),
            "priority": summarize_recorder(host.latency_by_priority),
        },
        "nic": {
            "packets_in": sum(q.enqueued for q in host.nic.queues),
            "drops": host.nic.total_drops,
            "drops_per_queue": host.nic.drops_per_queue(),
            "first_drop_ns": min(first_drops) if first_drops else None,
        },
        "driver": {
            "rx_drops": sum(s.driver.rx.drops for s in host.stacks),
            "tx_drops": host.tx_drops,
            "callbacks_run": sum(s.driver.callbacks_run for s in host.stacks),
            "packets_out": host.packets_out,
        },
        "tcp": {
            "callbacks_run": host.tcp.callbacks_run,
            "out_of_window": host.tcp.out_of_window,
            "duplicates": host.tcp.duplicates,
            "unknown_flow_segments": host.tcp.unknown_flow_segments,
        },
        "events": {
            "emitted": host.events.emitted,
            "delivered": host.events.delivered,
            "orphaned": host.events.orphaned,
            "binding_warnings": host.events.binding_warnings,
        },
        "labels": _labels(schedule),
        "fastcalldown": {
            "checks": counters.checks,
            "idle_checks": counters.idle_checks,
            "actions": {a.value: n for a, n in counters.actions.items()},
            "check_share_of_work": account.by_kind[ChargeKind.CHECK] / work if work else 0.0,
        },
        "cpu": {
            "gamma_app": account.gamma_app,
            "gamma_total": account.gamma_total,
            "eta": eta,
            "by_kind": {k.value: ns for k, ns in account.by_kind.items()},
        },
        "cores": [
            {
                "id": core.id,
                "role": core.role.value,
                "now_ns": core.now,
                "charges": {k.value: ns for k, ns in core.charges.items()},
            }
            for core in host.engine.cores
        ],
        "resources": {
            "dynamic": scenario.resources.dynamic,
            "plan_changes": host.plan_changes,
            "applied": _first_applied(host.plan_changes),
            "recovery": recovery_periods(host.plan_changes, host.timeline),
            "final_plan": plan.describe() if plan is not None else None,
            "last_change_ns": host.plan_changes[-1]["t_ns"] if host.plan_changes else None,
            "idle_cores": host.cores_in_role(CoreRole.IDLE),
        },
        "app": {
            "served": host.server.served,
            "empty_reads": host.server.empty_reads,
            "preemptions": sum(app.preemptions for app in host.apps),
        },
        "timeline": [asdict(row) for row in host.timeline],
    }


def run_scenario(scenario: Scenario, out_dir: Optional[Path] = None) -> SimulationResult:
    """Run one scenario to the end of its drain window.

    Args:
        scenario: Scenario to run.
        out_dir: Where to write the report and timeline, None to skip.

    Returns:
        SimulationResult with the report and the scenario's check results.

    Raises:
        InvalidPlanError: If the initial plan does not fit.
        ScenarioError: If the policy file cannot be loaded.
    """
    host, manager = build_host(scenario)
    schedule = generate(scenario.workload.to_spec(scenario.seed))
    host.load_schedule(schedule)
    host.start_periods(manager, dynamic=scenario.resources.dynamic)
    end = schedule_end(scenario, schedule)
    logger.info(
        "Running %s: %d requests, %d packets until %d ns",
        scenario.name,
        len(schedule.requests),
        len(schedule.arrivals),
        end,
    )
    host.run(until=end)
    report = build_report(scenario, host, schedule)
    checks = [evaluate_check(c, lambda path: lookup(report, path)) for c in scenario.checks]
    if out_dir is not None:
        write_report(report, host.timeline, out_dir)
    logger.info(
        "%s: %d/%d completed, %d NIC drops",
        scenario.name,
        host.completed,
        host.offered,
        host.nic.total_drops,
    )
    return SimulationResult(scenario, report, host.timeline, checks)


def schedule_end(scenario: Scenario, schedule: ArrivalSchedule) -> int:
    """Get the end of simulated time: the arrival window plus the drain window."""
    window = scenario.workload.compress_to_ns or scenario.workload.duration_ns
    last = schedule.arrivals[-1].t if schedule.arrivals else 0
    return max(window, last + 1) + scenario.workload.drain_ns


def run_experiment(experiment: Experiment, out_dir: Optional[Path] = None) -> ExperimentResult:
    """Run every variant of an experiment and evaluate its checks.

    Args:
        experiment: Experiment to run.
        out_dir: Reports go to ``out_dir/<variant>``; None to skip writing.

    Returns:
        ExperimentResult.
    """
    variants = {}
    for name, scenario in experiment.variants.items():
        variants[name] = run_scenario(scenario, out_dir / name if out_dir is not None else None)
    combined = {name: result.report for name, result in variants.items()}
    checks = [evaluate_check(c, lambda path: lookup(combined, path)) for c in experiment.checks]
    for check in checks:
        logger.info("%s: %s (%s)", "PASS" if check.passed else "FAIL", check.name, check.detail)
    return ExperimentResult(experiment, variants, checks)
