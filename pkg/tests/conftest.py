import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "qanalog", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("qanalog")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def binomial_ok(count: int, n: int, p: float, k: float = 3.0) -> bool:
    """|count/n - p| within k standard errors (with a floor for p near 0 or 1)."""
    se = max(np.sqrt(p * (1 - p) / n), 1.0 / n)
    return abs(count / n - p) <= k * se


def pytest_terminal_summary(terminalreporter):
    from stat_helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} C{cid} {detail}")
