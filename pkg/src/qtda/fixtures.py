"""Small hand-checkable point clouds used by the CLI and the tests."""
from __future__ import annotations

from dataclasses import dataclass

from .complex_core import (
    CliqueComplex, DistanceMatrix, FiltrationSchedule, PointCloud, complex_at, filtration_scales,
    pairwise_distances,
)
from .gap_probe import ZENO_POINTS

# Rectangle ABCD with E below CD: the 4-cycle closes at scale 3 while CDE fills only a corner.
RECTANGLE_POINTS = {"A": (0.0, 0.0), "B": (3.0, 0.0), "C": (3.0, -2.0), "D": (0.0, -2.0), "E": (1.5, -3.0)}
# Unit square: a 4-cycle at scale 1 that is filled by both diagonals' triangles at sqrt(2).
SQUARE_POINTS = {"A": (0.0, 0.0), "B": (1.0, 0.0), "C": (1.0, -1.0), "D": (0.0, -1.0)}


@dataclass(frozen=True)
class Fixture:
    name: str
    cloud: PointCloud
    dm: DistanceMatrix
    schedule: FiltrationSchedule
    i: int
    j: int
    k: int

    def complexes(self, k_max: int | None = None) -> tuple[CliqueComplex, CliqueComplex]:
        km = self.k if k_max is None else k_max
        return complex_at(self.dm, self.schedule, self.i, km), complex_at(self.dm, self.schedule, self.j, km)


def _scale_index(schedule: FiltrationSchedule, mu: float, tol: float = 1e-3) -> int:
    return next(t for t, m in enumerate(schedule.scales) if abs(m - mu) < tol)


def _build(name: str, points: dict, mu_i: float, mu_j: float, k: int) -> Fixture:
    labels = list(points)
    cloud = PointCloud.from_floats([points[l] for l in labels], labels=labels)
    dm = pairwise_distances(cloud)
    sched = filtration_scales(dm)
    return Fixture(name, cloud, dm, sched, _scale_index(sched, mu_i), _scale_index(sched, mu_j), k)


def rectangle() -> Fixture:
    """Both scales at mu = 3, where beta_0 = beta_1 = 1."""
    return _build("rectangle", RECTANGLE_POINTS, 3.0, 3.0, 1)


def square_pair() -> Fixture:
    return _build("square", SQUARE_POINTS, 1.0, 2 ** 0.5, 1)


def zeno_pair() -> Fixture:
    return _build("zeno", ZENO_POINTS, 2.0, 2.42, 1)


FIXTURES = {"rectangle": rectangle, "square": square_pair, "zeno": zeno_pair}
