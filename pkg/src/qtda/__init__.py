"""Persistent Betti numbers: exact classical engines, a matrix-level emulator of
the quantum estimator, spectral-gap probes and resource formulas."""

__version__ = "0.1.0"

from .complex_core import (  # noqa: F401
    PointCloud, build_clique_complex, filtration_scales, load_point_cloud, pairwise_distances,
)
from .classical_engines import FiltrationOracle  # noqa: F401
