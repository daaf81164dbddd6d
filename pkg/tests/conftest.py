from __future__ import annotations

import pytest


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number: int, title: str, checks: list[tuple[str, bool]]) -> None:
        ok = all(passed for _, passed in checks)
        failed = [name for name, passed in checks if not passed]
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}"
        if failed:
            line += " (failed: " + "; ".join(failed) + ")"
        request.config.acceptance_lines.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
