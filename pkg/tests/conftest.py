from __future__ import annotations

import sys
import threading
from typing import Callable

import pytest

from lfmove import Domain


@pytest.fixture
def domain() -> Domain:
    return Domain(checked=True)


@pytest.fixture
def fast_switching():
    """Shrink the GIL switch interval so threads interleave finely."""
    old = sys.getswitchinterval()
    sys.setswitchinterval(1e-5)
    yield
    sys.setswitchinterval(old)


def run_threads(n: int, target: Callable[[int], object], timeout: float = 120.0) -> list:
    """Run ``target(k)`` on ``n`` threads released together; re-raise the first error."""
    barrier = threading.Barrier(n)
    results: list = [None] * n
    errors: list[BaseException] = []

    def body(k: int) -> None:
        try:
            barrier.wait()
            results[k] = target(k)
        except BaseException as exc:
            errors.append(exc)
            barrier.abort()

    threads = [threading.Thread(target=body, args=(k,), daemon=True) for k in range(n)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout)
        if t.is_alive():
            raise TimeoutError("worker thread did not finish")
    if errors:
        raise errors[0]
    return results


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines after the test report."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
