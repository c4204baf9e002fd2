import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qtda.boundary_lab import boundary_dense, combinatorial_laplacian, persistent_laplacian
from qtda.classical_engines import betti_via_laplacian
from qtda.complex_core import load_point_cloud
from qtda.fixtures import square_pair, zeno_pair
from qtda.gap_probe import (
    SWEEP_HEADER, ZENO_POINTS, boundary_gaps, gap_report, gap_scaling_sweep, harmonic_representative,
    ker_im_product_singular_values, laplacian_gap, pi_pi_gap, sweep_trial, zeno_counterexample,
)

from conftest import random_pair

FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"
seeds = st.integers(0, 2**32 - 1)


def test_zeno_overlaps():
    rep = zeno_counterexample()
    assert rep.overlaps[0] == pytest.approx(0.945, abs=1e-3)
    assert rep.overlaps[1] == pytest.approx(0.055, abs=1e-3)
    assert sum(rep.overlaps) == pytest.approx(1.0, abs=1e-12)
    assert rep.kernel_cosine >= 1 - 1e-9
    assert rep.eigenvalues[1] == pytest.approx(3.0)


def test_zeno_fixture_file_matches_constants():
    pc = load_point_cloud(FIXTURES / "zeno.csv")
    assert pc.labels == tuple(ZENO_POINTS)
    assert np.allclose(pc.coords, np.array(list(ZENO_POINTS.values())), atol=2 ** -15)


def test_zeno_pair_gaps():
    g = gap_report(*zeno_pair().complexes(), 1)
    assert g.lambda_dk_i == pytest.approx(math.sqrt(2))
    assert g.lambda_dk1_j == pytest.approx(math.sqrt(3))
    assert 0 < g.lambda_pipi < 1
    assert g.lambda_laplacian == pytest.approx(2.0)
    assert g.min_boundary_gap() == pytest.approx(math.sqrt(2))


def test_square_pair_intersection_gap_is_one():
    # the surviving square hole lies inside Im d2^j, so Ker and Im meet at angle zero
    assert pi_pi_gap(*square_pair().complexes(), 1) == 1.0


@given(seeds, st.integers(3, 8))
def test_equal_scales_give_unit_intersection_gap(seed, n):
    cx, _ = random_pair(np.random.default_rng(seed), n)
    assert pi_pi_gap(cx, cx, 1) == 1.0


@given(seeds, st.integers(3, 8))
def test_product_singular_values_in_unit_interval(seed, n):
    cx_i, cx_j = random_pair(np.random.default_rng(seed), n)
    s = ker_im_product_singular_values(cx_i, cx_j, 1)
    assert s.size == 0 or (s.min() >= -1e-12 and s.max() <= 1 + 1e-9)
    g = boundary_gaps(cx_i, cx_j, 1)
    if g.lambda_dk_i is not None:
        sv = np.linalg.svd(boundary_dense(cx_i, 1).astype(float), compute_uv=False)
        assert g.lambda_dk_i == pytest.approx(sv[sv > 1e-9 * sv[0]].min())


@given(seeds, st.integers(3, 8))
def test_laplacian_gap_matches_eigenvalues(seed, n):
    cx_i, cx_j = random_pair(np.random.default_rng(seed), n)
    lg = laplacian_gap(cx_i, cx_j, 1)
    d = persistent_laplacian(cx_i, cx_j, 1).delta.astype(float)
    if lg is None:
        assert not d.any()
    else:
        w = np.linalg.eigvalsh(d)
        assert lg == pytest.approx(w[w > 1e-9 * np.abs(w).max()].min())


def test_gaps_reject_unnested():
    cx_i, cx_j = square_pair().complexes()
    with pytest.raises(ValueError):
        boundary_gaps(cx_j, cx_i, 1)


@given(seeds, st.integers(3, 8))
def test_harmonic_representative_dimension(seed, n):
    cx, _ = random_pair(np.random.default_rng(seed), n)
    h = harmonic_representative(cx, 1)
    assert h.shape[1] == betti_via_laplacian(cx, 1)
    if h.size:
        assert np.allclose(combinatorial_laplacian(cx, 1).delta @ h, 0, atol=1e-8)


def test_sweep_header_only_for_zero_trials():
    table = gap_scaling_sweep("random-geometric", [6, 8], 1, 0, seed=3)
    assert table.to_csv() == ",".join(SWEEP_HEADER) + "\n"
    assert table.summary() == {}


@pytest.mark.parametrize("generator", ["random-geometric", "random-graph"])
def test_sweep_rows_recompute_and_parallel_match(generator):
    serial = gap_scaling_sweep(generator, [5, 7], 1, 3, seed=9, quantile_j=0.6)
    parallel = gap_scaling_sweep(generator, [5, 7], 1, 3, seed=9, jobs=2, quantile_j=0.6)
    assert serial.to_csv() == parallel.to_csv()
    for row in serial.rows:
        again = sweep_trial(generator, row["N"], 1, row["trial"], 9, quantile_j=0.6)
        assert again == row
    rows = list(csv.DictReader(io.StringIO(serial.to_csv())))
    assert len(rows) == len(serial.rows)
    for r in rows:
        if r["lambda_pipi"]:
            assert 0 < float(r["lambda_pipi"]) <= 1


def test_sweep_summary_quartiles():
    table = gap_scaling_sweep("random-graph", [6], 1, 8, seed=2)
    stats = table.summary()["6"]["S_k"]
    vals = [r["S_k"] for r in table.rows]
    assert stats["median"] == pytest.approx(float(np.median(vals)))
    assert stats["q1"] <= stats["median"] <= stats["q3"] and stats["count"] == len(vals)


def test_sweep_rejects_bad_arguments():
    with pytest.raises(ValueError):
        gap_scaling_sweep("random-geometric", [3], 3, 1, seed=0)
    with pytest.raises(ValueError):
        sweep_trial("lattice", 5, 1, 0, 0)
