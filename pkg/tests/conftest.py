import numpy as np
import pytest


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. every entry of ``x`` (mutated in place)."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return g


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)
    return float(np.max(np.abs(a - b)) / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance reporting -------------------------------------------------------

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        n, title = marker.args
        entry = _CRITERIA.setdefault(n, {"title": title, "passed": True, "details": []})
        entry["passed"] &= report.outcome == "passed"
        entry["details"].extend(f"{k}={v}" for k, v in item.user_properties)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        status = "PASS" if e["passed"] else "FAIL"
        detail = f"  ({', '.join(e['details'])})" if e["details"] else ""
        terminalreporter.write_line(f"[{status}] criterion {n}: {e['title']}{detail}")
