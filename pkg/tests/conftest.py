import time
from contextlib import contextmanager

import pytest

_LINES = []


class CriterionRecorder:
    """Times one acceptance criterion and records a single PASS/FAIL line."""

    def __init__(self):
        self.details = []

    def note(self, text: str):
        self.details.append(text)

    @contextmanager
    def run(self, number: int, title: str, limit_s: float):
        start = time.perf_counter()
        ok, err = False, None
        try:
            yield self
            ok = True
        except Exception as exc:
            msg = str(exc).splitlines()[0] if str(exc) else ""
            err = f"{type(exc).__name__}: {msg}" if msg else type(exc).__name__
            raise
        finally:
            elapsed = time.perf_counter() - start
            if ok and elapsed >= limit_s:
                ok, err = False, f"runtime {elapsed:.2f}s exceeds {limit_s:g}s"
            parts = [f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title} ({elapsed:.2f}s / {limit_s:g}s)"]
            parts += self.details
            if err:
                parts.append(f"reason: {err}")
            line = " | ".join(parts)
            _LINES.append((number, line))
            print(line)
            if ok is False and err and err.startswith("runtime"):
                pytest.fail(err)


@pytest.fixture
def criterion():
    return CriterionRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)
