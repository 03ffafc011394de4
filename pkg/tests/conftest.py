import numpy as np
import pytest

from fxhybrid import _pykernels, kernels


BACKENDS = [pytest.param(_pykernels, id="python")]
if kernels.BACKEND == "cython":
    from fxhybrid import _ckernels

    BACKENDS.append(pytest.param(_ckernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_bars(n, seed=0, start=110.0):
    """Random-walk OHLC satisfying the bar invariants (arrays, not a BarSeries)."""
    r = np.random.default_rng(seed)
    close = start + np.cumsum(r.normal(0, 0.05, n))
    open_ = np.concatenate(([start], close[:-1])) + r.normal(0, 0.01, n)
    high = np.maximum(open_, close) + np.abs(r.normal(0, 0.03, n))
    low = np.minimum(open_, close) - np.abs(r.normal(0, 0.03, n))
    return open_, high, low, close


# one line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES: list = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} ({detail})"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
