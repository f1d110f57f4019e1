from pathlib import Path

import pytest

from ersatz.core import ReasonerConfig
from ersatz.ingestion import load_manifest
from ersatz.knowledge import build_kb

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
WASHINGTON = DATA / "washington22" / "manifest.json"
TRAY = DATA / "tray" / "manifest.json"

_acceptance_lines: list[str] = []


@pytest.fixture(scope="session")
def washington_manifest():
    return load_manifest(WASHINGTON)


@pytest.fixture(scope="session")
def tray_manifest():
    return load_manifest(TRAY)


@pytest.fixture
def washington_kb(washington_manifest):
    # function scope: queries mutate the substitution-model cache
    return build_kb(washington_manifest, ReasonerConfig(rng_seed=7))


@pytest.fixture
def tray_kb(tray_manifest):
    return build_kb(tray_manifest, ReasonerConfig(rng_seed=0))


def pytest_runtest_logreport(report):
    if report.when != "call" or "acceptance" not in report.keywords:
        return
    props = dict(report.user_properties)
    if hasattr(report, "wasxfail"):
        status = "FAIL (expected, strict xfail)"
    else:
        status = "PASS" if report.passed else "FAIL"
    _acceptance_lines.append(f"{status}  {props.get('criterion', report.nodeid)}: {props.get('detail', '')}")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
