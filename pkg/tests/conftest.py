import numpy as np
import pytest

from fedmia.nncore import ConvNetSpec


def small_spec(**overrides):
    """A network with < 500 parameters and two conv blocks."""
    kw = dict(
        in_channels=2,
        window_len=16,
        classes=3,
        conv_blocks=((3, 3, 2), (4, 3, 1)),
        dense_hidden=5,
    )
    kw.update(overrides)
    return ConvNetSpec(**kw)


def central_differences(f, x, h=1e-5):
    grad = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (f(x + e) - f(x - e)) / (2 * h)
    return grad


def max_relative_error(analytic, numeric, floor=1e-8):
    keep = (np.abs(analytic) >= floor) | (np.abs(numeric) >= floor)
    if not keep.any():
        return 0.0
    a, n = analytic[keep], numeric[keep]
    return float(np.max(np.abs(a - n) / np.maximum(np.abs(a), np.abs(n))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance reporting ------------------------------------------------------

CRITERIA = {}


def record_criterion(number, name, passed, detail):
    """passed: True, False, or None for a skipped optional criterion."""
    CRITERIA[number] = (name, passed, detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        name, passed, detail = CRITERIA[number]
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  [{number:2d}] {name}: {detail}")
