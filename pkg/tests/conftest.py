"""Shared fixtures: isolated HOME, portal harness, acceptance summary."""

from __future__ import annotations

import os
import re

import pytest

import helpers

CRITERIA = {
    1: "end-to-end tool run through real CLI and server processes",
    2: "reference-state restoration on wiped and freshly added back-ends",
    3: "one conformance suite fits every ostp back-end; jobs spread across both",
    4: "role/action access matrix holds without deviation",
    5: "local and remote runs byte-identical; local runs touch no server",
    6: "concurrent jobs isolated and identical; job dirs swept after TTL",
    7: "manifest policy violations rejected with their exact codes",
    8: "installs survive repeated kills without half-installed plugins",
    9: "registry state identical over the API after a restart",
    10: "portal UI round trip produces the same bytes as the CLI",
}

_CRITERION_RE = re.compile(r"test_criterion_0?(\d+)")
_outcomes: dict[int, str] = {}


@pytest.fixture(scope="session", autouse=True)
def isolated_home(tmp_path_factory):
    """Keep ~/.sselab (CLI config and token cache) out of the real home."""
    home = tmp_path_factory.mktemp("home")
    previous = os.environ.get("HOME")
    os.environ["HOME"] = str(home)
    yield home
    if previous is not None:
        os.environ["HOME"] = previous


@pytest.fixture()
def portal(tmp_path):
    p = helpers.Portal(tmp_path)
    yield p
    p.close()


def pytest_runtest_logreport(report):
    match = _CRITERION_RE.search(report.nodeid)
    if match is None:
        return
    number = int(match.group(1))
    if report.when == "call":
        _outcomes[number] = "PASS" if report.passed else (
            "SKIP" if report.skipped else "FAIL")
    elif report.when == "setup" and not report.passed:
        _outcomes[number] = "SKIP" if report.skipped else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(_outcomes):
        terminalreporter.write_line(
            "criterion %2d %s: %s"
            % (number, _outcomes[number], CRITERIA.get(number, "")))
