import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng):
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_unit(rng):
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


_CRITERIA = {}


@pytest.fixture(scope="session")
def criterion():
    """Record one outcome per acceptance criterion; sub-checks of a criterion are ANDed."""

    def record(key, ok, detail):
        prev_ok, prev_detail = _CRITERIA.get(key, (True, ""))
        merged = None if ok is None else prev_ok and bool(ok)
        _CRITERIA[key] = (merged, f"{prev_detail}; {detail}" if prev_detail else detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: int(k[1:])):
        ok, detail = _CRITERIA[key]
        status = "N/A" if ok is None else ("PASS" if ok else "FAIL")
        terminalreporter.write_line(f"{key} {status}: {detail}")
