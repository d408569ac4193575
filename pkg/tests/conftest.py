import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# one line per acceptance criterion, printed after the run
_criteria: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_P" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        name = report.nodeid.split("::")[-1][len("test_"):]
        detail = dict(report.user_properties).get("measured", "")
        _criteria[name] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria):
        outcome, detail = _criteria[name]
        terminalreporter.write_line(f"{outcome}  {name}  {detail}".rstrip())
    n_pass = sum(outcome == "PASS" for outcome, _ in _criteria.values())
    terminalreporter.write_line(f"{n_pass}/{len(_criteria)} criteria passed")
