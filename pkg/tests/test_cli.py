"""Tests for the command-line interface."""

import json
from pathlib import Path

import pytest

from elastack.cli import EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_OK, main, parse_args, parse_assertion
from elastack.errors import ScenarioError
from elastack.metrics import REPORT_FILE


@pytest.fixture
def scenario_file(tmp_path: Path) -> Path:
    """Write a 10-request scenario file."""
    path = tmp_path / "tiny.json"
    path.write_text(
        json.dumps(
            {
                "name": "tiny",
                "topology": {"cores": 1, "nic_queues": 1},
                "workload": {
                    "num_connections": 4,
                    "classes": [{"name": "request", "fraction": 1.0, "service_time_ns": 5000}],
                    "rate_rps": 1000,
                    "duration_ns": 10_000_000,
                    "drain_ns": 10_000_000,
                },
            }
        )
    )
    return path


class TestParseAssertion:
    """Tests for parse_assertion function."""

    def test_constant(self) -> None:
        """Test a comparison with a number."""
        check = parse_assertion("nic.drops==0")
        assert (check.left, check.op, check.right, check.factor) == ("nic.drops", "==", 0.0, 1.0)

    def test_two_char_operator_first(self) -> None:
        """Test <= is not read as <."""
        check = parse_assertion("a.b <= c.d")
        assert (check.left, check.op, check.right) == ("a.b", "<=", "c.d")

    def test_factor(self) -> None:
        """Test a factor in front of the right-hand path."""
        check = parse_assertion("on.p99<=1.5*off.p99")
        assert check.factor == 1.5
        assert check.right == "off.p99"

    def test_bad_factor(self) -> None:
        """Test a non-numeric factor."""
        with pytest.raises(ScenarioError):
            parse_assertion("a<=x*b")

    def test_no_operator(self) -> None:
        """Test text without a comparison."""
        with pytest.raises(ScenarioError):
            parse_assertion("nic.drops")


class TestParseArgs:
    """Tests for parse_args function."""

    def test_run_options(self) -> None:
        """Test run collects repeated overrides and assertions."""
        args = parse_args(
            ["-v", "run", "exp2.on", "--seed", "4", "--set", "a=1", "--set", "b=2", "--assert", "x==0"]
        )
        assert args.verbose == 1
        assert args.seed == 4
        assert args.set == ["a=1", "b=2"]
        assert args.assertions == ["x==0"]

    def test_command_required(self) -> None:
        """Test a subcommand is required."""
        with pytest.raises(SystemExit):
            parse_args([])

    def test_unknown_preset(self) -> None:
        """Test experiment names are restricted to the presets."""
        with pytest.raises(SystemExit):
            parse_args(["experiment", "exp9"])


class TestMain:
    """Tests for main function."""

    def test_presets(self) -> None:
        """Test listing presets succeeds."""
        assert main(["presets"]) == EXIT_OK

    def test_run_passing(self, scenario_file: Path, tmp_path: Path) -> None:
        """Test a run whose assertions hold writes its report."""
        out = tmp_path / "out"
        code = main(["run", str(scenario_file), "--assert", "requests.incomplete==0", "--out", str(out)])
        assert code == EXIT_OK
        assert json.loads((out / REPORT_FILE).read_text())["requests"]["completed"] == 10

    def test_run_failing_check(self, scenario_file: Path) -> None:
        """Test a failed assertion sets the check exit code."""
        assert main(["run", str(scenario_file), "--assert", "nic.drops>0"]) == EXIT_CHECK_FAILED

    def test_scenario_check_needs_assert(self, tmp_path: Path, scenario_file: Path) -> None:
        """Test a failing scenario check only changes the exit code under --assert."""
        data = json.loads(scenario_file.read_text())
        data["checks"] = [{"name": "drops", "left": "nic.drops", "op": ">", "right": 0}]
        path = tmp_path / "checked.json"
        path.write_text(json.dumps(data))
        assert main(["run", str(path)]) == EXIT_OK
        assert main(["run", str(path), "--assert"]) == EXIT_CHECK_FAILED

    def test_bare_assert_passing(self, scenario_file: Path) -> None:
        """Test --assert without an expression passes when every check holds."""
        args = parse_args(["run", str(scenario_file), "--assert"])
        assert args.assertions == [""]
        assert main(["run", str(scenario_file), "--assert"]) == EXIT_OK

    def test_run_unknown_scenario(self) -> None:
        """Test an unknown scenario reference is a usage error."""
        assert main(["run", "no-such-scenario"]) == EXIT_INVALID

    def test_run_invalid_override(self, scenario_file: Path) -> None:
        """Test an override that breaks validation is a usage error."""
        assert main(["run", str(scenario_file), "--set", "topology.cores=0"]) == EXIT_INVALID

    def test_preset_files(self, tmp_path: Path) -> None:
        """Test presets are written as scenario files."""
        assert main(["preset", "exp3", "--out", str(tmp_path)]) == EXIT_OK
        assert sorted(p.name for p in tmp_path.iterdir()) == [
            "exp3_driver.json",
            "exp3_driver_1024.json",
            "exp3_none.json",
            "exp3_tcp.json",
        ]

    def test_check_report(self, tmp_path: Path) -> None:
        """Test assertions against a saved report."""
        report = tmp_path / REPORT_FILE
        report.write_text(json.dumps({"nic": {"drops": 0}, "requests": {"completed": 5}}))
        assert main(["check", str(report), "nic.drops==0", "requests.completed>=5"]) == EXIT_OK
        assert main(["check", str(report), "requests.completed>5"]) == EXIT_CHECK_FAILED

    def test_check_missing_report(self, tmp_path: Path) -> None:
        """Test a missing report is a usage error."""
        assert main(["check", str(tmp_path / "absent.json"), "nic.drops==0"]) == EXIT_INVALID

    def test_experiment_assert_flag(self) -> None:
        """Test experiment takes --assert as a plain switch."""
        assert parse_args(["experiment", "exp2", "--assert"]).enforce
        assert not parse_args(["experiment", "exp2"]).enforce
