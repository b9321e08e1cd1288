"""Invariant suite: full pass, subsetting, fault isolation, report format."""

import pytest

from consolve.errors import ContractError
from consolve.verify import ALL_CHECKS, CheckResult, format_report, run_suite


def test_full_suite_passes():
    results = run_suite()
    assert len(results) == len(ALL_CHECKS)
    assert [r.name for r in results] == list(ALL_CHECKS)
    failing = [r for r in results if not r.ok]
    assert not failing, format_report(results)
    # every check reports a nonempty human-readable detail
    assert all(r.detail for r in results)


def test_subset_runs_only_named_checks_in_order():
    results = run_suite(["drop-formula", "schedule-terminal"])
    assert [r.name for r in results] == ["drop-formula", "schedule-terminal"]
    assert all(r.ok for r in results)


def test_unknown_check_name_rejected():
    with pytest.raises(ContractError):
        run_suite(["schedule-terminal", "no-such-check"])


def test_fault_injection_fails_exactly_the_faulted_check():
    def corrupt(path):
        with open(path, "r+b") as fh:
            fh.seek(-3, 2)
            byte = fh.read(1)
            fh.seek(-3, 2)
            fh.write(bytes([byte[0] ^ 0xFF]))

    names = ["schedule-terminal", "checkpoint-roundtrip", "drop-formula"]
    results = run_suite(names, faults={"checkpoint-roundtrip": corrupt})
    by_name = {r.name: r for r in results}
    assert not by_name["checkpoint-roundtrip"].ok
    assert by_name["schedule-terminal"].ok
    assert by_name["drop-formula"].ok


def test_failed_check_does_not_stop_later_checks():
    def explode(path):
        raise RuntimeError("injected fault")

    results = run_suite(
        ["checkpoint-roundtrip", "schedule-terminal"],
        faults={"checkpoint-roundtrip": explode},
    )
    assert [r.ok for r in results] == [False, True]
    assert "injected fault" in results[0].detail


def test_format_report_lines_and_summary():
    results = [
        CheckResult("alpha", True, "fine"),
        CheckResult("beta", False, "AssertionError: broke"),
    ]
    report = format_report(results)
    lines = report.splitlines()
    assert lines[0] == "[PASS] alpha: fine"
    assert lines[1] == "[FAIL] beta: AssertionError: broke"
    assert lines[2] == "1/2 checks passed; failing: beta"


def test_format_report_all_green_summary():
    report = format_report([CheckResult("alpha", True, "fine")])
    assert report.splitlines()[-1] == "1/1 checks passed"
