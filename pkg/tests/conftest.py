import functools

import pytest

from optimult.arrays import ArraySpec
from optimult.pipeline import PipelineConfig, optimize


@functools.lru_cache(maxsize=None)
def _synth(width, square, dnc=True):
    return optimize(ArraySpec(width, square), PipelineConfig(dnc=dnc))


@pytest.fixture(scope="session")
def synth():
    """Memoized ``optimize`` with default limits: (bits, report)."""
    return _synth


_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def verdict_line():
    """Record (and print) one PASS/FAIL line per acceptance criterion."""
    def record(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        print(line)
        _ACCEPTANCE.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
