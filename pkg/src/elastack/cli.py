"""Command-line interface for elastack.

Exit codes: 0 success, 2 invalid scenario or usage, 3 a check failed.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from elastack.config import get_config
from elastack.constants import APP_NAME, APP_VERSION
from elastack.errors import ElastackError, ScenarioError
from elastack.metrics import lookup
from elastack.scenario import (
    PRESETS,
    Check,
    CheckResult,
    evaluate_check,
    load_scenario,
    preset,
    write_preset,
)
from elastack.simulation import SimulationResult, run_experiment, run_scenario

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CHECK_FAILED = 3

console = Console()


def setup_logging(verbose: int = 0) -> None:
    """Route log records through rich.

    Args:
        verbose: 0 uses ELASTACK_LOG_LEVEL, 1 INFO, 2 or more DEBUG.
    """
    level: Any = get_config().run.log_level.upper()
    if verbose == 1:
        level = logging.INFO
    elif verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def parse_assertion(text: str) -> Check:
    """Parse ``--assert`` text such as ``nic.drops==0`` or ``a.b<=1.5*c.d``.

    Raises:
        ScenarioError: If no comparison operator is found.
    """
    for op in ("<=", ">=", "==", "!=", "<", ">"):
        left, sep, right = text.partition(op)
        if not sep:
            continue
        left, right = left.strip(), right.strip()
        factor = 1.0
        if "*" in right:
            head, _, right = right.partition("*")
            try:
                factor = float(head)
            except ValueError as e:
                raise ScenarioError(f"Assertion factor must be a number: {text!r}") from e
            right = right.strip()
        try:
            value: Any = float(right)
        except ValueError:
            value = right
        return Check(name=text, left=left, op=op, right=value, factor=factor)
    raise ScenarioError(f"Assertion needs a comparison operator: {text!r}")


def _fmt_ns(value: Optional[int]) -> str:
    if value is None:
        return "-"
    if value >= 1_000_000:
        return f"{value / 1_000_000:.2f} ms"
    if value >= 1_000:
        return f"{value / 1_000:.1f} us"
    return f"{value} ns"


def print_summary(result: SimulationResult) -> None:
    """Print the headline numbers of a run."""
    report = result.report
    table = Table(title=f"{report['scenario']} (seed {report['seed']})")
    table.add_column("latency", style="cyan")
    table.add_column("count", justify="right")
    table.add_column("p50", justify="right")
    table.add_column("p99", justify="right")
    table.add_column("max", justify="right")
    for section in ("class", "priority"):
        for key, stats in report["latency"][section].items():
            if section == "priority" and key == "all":
                continue
            p99 = _fmt_ns(stats.get("p99_ns"))
            if stats.get("low_sample"):
                p99 += " *"
            table.add_row(
                f"{section}:{key}",
                str(stats["count"]),
                _fmt_ns(stats.get("p50_ns")),
                p99,
                _fmt_ns(stats.get("max_ns")),
            )
    console.print(table)
    requests = report["requests"]
    eta = report["cpu"]["eta"]
    console.print(
        f"requests {requests['completed']}/{requests['offered']} completed, "
        f"{requests['incomplete']} incomplete, {report['nic']['drops']} NIC drops, "
        f"eta {'-' if eta is None else format(eta, '.3f')}"
    )
    console.print(f"final plan {report['resources']['final_plan']}")


def print_checks(checks: list[CheckResult], title: str = "checks") -> None:
    """Print check outcomes."""
    if not checks:
        return
    table = Table(title=title)
    table.add_column("check")
    table.add_column("result")
    table.add_column("detail")
    for check in checks:
        mark = "[green]PASS[/green]" if check.passed else "[red]FAIL[/red]"
        table.add_row(check.name, mark, check.detail)
    console.print(table)


def cmd_run(args: argparse.Namespace) -> int:
    """Run one scenario file or preset variant."""
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    scenario = load_scenario(args.scenario, overrides)
    enforce = args.assertions is not None
    assertions = [parse_assertion(a) for a in args.assertions or [] if a]
    scenario = scenario.model_copy(update={"checks": [*scenario.checks, *assertions]})
    out_dir = Path(args.out) if args.out else None
    result = run_scenario(scenario, out_dir)
    print_summary(result)
    print_checks(result.checks)
    if out_dir is not None:
        console.print(f"report written to {out_dir}")
    return EXIT_CHECK_FAILED if enforce and not result.passed else EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    """Run every variant of a preset and its comparisons."""
    experiment = preset(args.name)
    console.print(f"[bold]{experiment.name}[/bold]: {experiment.description}")
    out_dir = Path(args.out) if args.out else None
    result = run_experiment(experiment, out_dir)
    for name, variant in result.variants.items():
        print_summary(variant)
        print_checks(variant.checks, title=f"{name} checks")
    print_checks(result.checks, title=f"{experiment.name} checks")
    return EXIT_CHECK_FAILED if args.enforce and not result.passed else EXIT_OK


def cmd_preset(args: argparse.Namespace) -> int:
    """Write a preset's variants as scenario files."""
    out_dir = Path(args.out) if args.out else Path(get_config().run.output_dir)
    for path in write_preset(args.name, out_dir):
        console.print(str(path))
    return EXIT_OK


def cmd_presets(args: argparse.Namespace) -> int:
    """List the presets."""
    table = Table(title="presets")
    table.add_column("name", style="cyan")
    table.add_column("variants")
    table.add_column("description")
    for name in PRESETS:
        experiment = preset(name)
        table.add_row(name, ", ".join(experiment.variants), experiment.description)
    console.print(table)
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    """Evaluate assertions against a written report."""
    path = Path(args.report)
    try:
        report = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ScenarioError(f"Cannot read report {path}: {e}") from e
    checks = [
        evaluate_check(parse_assertion(a), lambda p: lookup(report, p)) for a in args.assertions
    ]
    print_checks(checks)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK_FAILED


def parse_args(argv: Optional[list[str]] = None) -> argparse.Namespace:
    """Parse command line arguments.

    Returns:
        Parsed arguments.
    """
    parser = argparse.ArgumentParser(
        prog=APP_NAME,
        description="Deterministic simulator of an elastic, priority-aware user-space network stack",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"{APP_NAME} v{APP_VERSION}",
    )
    parser.add_argument(
        "--verbose",
        "-v",
        action="count",
        default=0,
        help="Log progress (-v INFO, -vv DEBUG)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a scenario file or preset variant (exp2.on)")
    run.add_argument("scenario", help="Scenario JSON file or <preset>.<variant>")
    run.add_argument("--seed", type=int, help="Override the scenario seed")
    run.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="Override a scenario field, e.g. features.diffluence=true",
    )
    run.add_argument(
        "--assert",
        dest="assertions",
        action="append",
        nargs="?",
        const="",
        metavar="EXPR",
        help="Fail with exit code 3 when a check fails; EXPR adds one, e.g. nic.drops==0",
    )
    run.add_argument("--out", "-o", help="Directory for report.json and timeline.csv")
    run.set_defaults(func=cmd_run)

    exp = sub.add_parser("experiment", help="Run all variants of a preset and compare them")
    exp.add_argument("name", choices=list(PRESETS))
    exp.add_argument("--out", "-o", help="Directory for per-variant reports")
    exp.add_argument(
        "--assert",
        dest="enforce",
        action="store_true",
        help="Fail with exit code 3 when a comparison fails",
    )
    exp.set_defaults(func=cmd_experiment)

    pre = sub.add_parser("preset", help="Write a preset's variants as scenario files")
    pre.add_argument("name", choices=list(PRESETS))
    pre.add_argument("--out", "-o", help="Target directory (default: ELASTACK_OUTPUT_DIR)")
    pre.set_defaults(func=cmd_preset)

    lst = sub.add_parser("presets", help="List the experiment presets")
    lst.set_defaults(func=cmd_presets)

    chk = sub.add_parser("check", help="Evaluate assertions against a written report")
    chk.add_argument("report", help="Path to report.json")
    chk.add_argument("assertions", nargs="+", metavar="EXPR")
    chk.set_defaults(func=cmd_check)

    return parser.parse_args(argv)


def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point for the CLI.

    Returns:
        Exit code.
    """
    args = parse_args(argv)
    setup_logging(args.verbose)
    try:
        return args.func(args)
    except ElastackError as e:
        console.print(f"[red]error:[/red] {e}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
