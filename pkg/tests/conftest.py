import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qtda.complex_core import PointCloud, complex_at, filtration_scales, pairwise_distances

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_cloud(rng, n, d=2):
    return PointCloud.from_floats(rng.random((n, d)))


def random_pair(rng, n, d=2, k=1):
    """Nested complexes at two random scale indices, holding dimensions up to k+1."""
    dm = pairwise_distances(random_cloud(rng, n, d))
    sched = filtration_scales(dm)
    i, j = sorted(rng.integers(0, len(sched), size=2))
    return complex_at(dm, sched, int(i), k), complex_at(dm, sched, int(j), k)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""
    def record(number: int, title: str, ok: bool, detail: str, seconds: float):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {title} | {detail} | {seconds:.2f}s"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
