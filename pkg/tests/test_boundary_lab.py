import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qtda.boundary_lab import (
    NestingError, SparseSignedMatrix, boundary_dense, boundary_matrix, chain_vector, combinatorial_laplacian,
    naive_restricted_boundary, persistent_kernel_dims, persistent_laplacian, persistent_laplacian_schur,
    restricted_boundary,
)
from qtda.exact import GF2, GFP, Q, R, bareiss_rank, integer_nullspace, low_column_reduce, parse_field, rank
from qtda.fixtures import rectangle, square_pair, zeno_pair

from conftest import random_pair

seeds = st.integers(0, 2**32 - 1)

RP2 = [(1, 2, 3), (1, 3, 4), (1, 4, 5), (1, 5, 6), (1, 2, 6), (2, 3, 5), (3, 4, 6), (2, 4, 5), (3, 5, 6), (2, 4, 6)]


def _rp2_boundary():
    edges = sorted({e for t in RP2 for e in itertools.combinations(t, 2)})
    m = np.zeros((len(edges), len(RP2)), dtype=np.int64)
    for c, t in enumerate(RP2):
        for l in range(3):
            m[edges.index(t[:l] + t[l + 1:]), c] = (-1) ** l
    return m


def _cos(a, b):
    return abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))


@given(seeds, st.integers(3, 7), st.integers(1, 2))
def test_boundary_squares_to_zero(seed, n, k):
    cx, _ = random_pair(np.random.default_rng(seed), n, k=k)
    assert not (boundary_dense(cx, k) @ boundary_dense(cx, k + 1)).any()


def test_triangle_boundary_signs():
    fx = square_pair()
    cx = fx.complexes()[1]
    d2 = boundary_dense(cx, 2)
    col = d2[:, cx.index_of((0, 1, 2))]
    # d(ABC) = BC - AC + AB
    assert col[cx.index_of((1, 2))] == 1 and col[cx.index_of((0, 2))] == -1 and col[cx.index_of((0, 1))] == 1


def test_boundary_matrix_json_and_fields():
    cx = square_pair().complexes()[1]
    m = boundary_matrix(cx, 2, "GF2")
    assert all(v == 1 for _, _, v in m.entries)
    doc = json.loads(boundary_matrix(cx, 1).to_json())
    assert doc["field"] == "Q" and doc["rows"][:2] == ["1", "2"]
    assert all(e[2] in {"1/1", "-1/1"} for e in doc["entries"])
    with pytest.raises(ValueError):
        boundary_matrix(cx, 5)


def test_rank_over_fields_detects_torsion():
    m = _rp2_boundary()
    assert rank(m, Q) == bareiss_rank(m) == 10
    assert rank(m, GF2) == 9
    assert rank(m, GFP(3)) == 10
    assert rank(m.astype(float), R) == 10
    assert parse_field("gf3") == GFP(3)
    with pytest.raises(ValueError):
        parse_field("GF4")


@given(st.lists(st.lists(st.integers(-3, 3), min_size=4, max_size=4), min_size=1, max_size=5))
def test_exact_rank_matches_float_and_nullspace(rows):
    m = np.array(rows, dtype=np.int64)
    r = rank(m, Q)
    assert r == np.linalg.matrix_rank(m.astype(float))
    ns = integer_nullspace(m)
    assert ns.shape[1] == 4 - r
    assert not (m @ ns).any()


@given(st.lists(st.lists(st.integers(-2, 2), min_size=5, max_size=5), min_size=1, max_size=5),
       st.sampled_from([Q, GF2, GFP(3)]))
def test_low_column_reduce_records_operations(rows, field):
    m = np.array(rows, dtype=np.int64)
    red = low_column_reduce(m, field)
    prod = m @ red.y
    if field.kind != "Q":
        prod = np.mod(prod, field.modulus)
    assert np.array_equal(prod, red.reduced)
    lows = [np.flatnonzero(red.reduced[:, c])[-1] for c in range(m.shape[1]) if red.reduced[:, c].any()]
    assert len(lows) == len(set(lows)) == rank(m, field)


def test_rectangle_laplacian_kernel_direction():
    fx = rectangle()
    cx, _ = fx.complexes()
    lap = combinatorial_laplacian(cx, 1)
    assert lap.kernel_dim() == 1
    w, v = np.linalg.eigh(lap.delta.astype(float))
    ker = v[:, np.argmin(w)]
    names = {cx.name(s): s for s in cx.simplices(1)}
    cycle = chain_vector(cx, {names["AB"]: 1, names["BC"]: 1, names["CD"]: 1, names["AD"]: -1}, 1)
    want = -3 * cycle + boundary_dense(cx, 2)[:, cx.index_of(cx.simplices(2)[0])]
    assert cx.name(cx.simplices(2)[0]) == "CDE"
    assert _cos(ker, want) >= 1 - 1e-9


def test_square_pair_restricted_boundary():
    cx_i, cx_j = square_pair().complexes()
    rb = restricted_boundary(cx_i, cx_j, 1)
    assert rb.matrix.shape == (4, 2)
    assert rb.rank == 1
    names = {cx_i.name(s): s for s in cx_i.simplices(1)}
    cycle = chain_vector(cx_i, {names["AB"]: 1, names["BC"]: 1, names["CD"]: 1, names["AD"]: -1}, 1)
    for col in rb.matrix.T:
        if col.any():
            assert _cos(col.astype(float), cycle) == pytest.approx(1.0, abs=1e-12)
    # the selected chains live at scale j and their boundaries avoid the diagonals
    dj = boundary_dense(cx_j, 2)
    assert np.array_equal((dj @ rb.chains())[[s in cx_i for s in cx_j.simplices(1)]], rb.matrix)
    assert naive_restricted_boundary(cx_i, cx_j, 1).rank() == 3
    assert persistent_laplacian(cx_i, cx_j, 1).kernel_dim() == 0


def test_zeno_pair_restricted_vs_naive():
    cx_i, cx_j = zeno_pair().complexes()
    assert persistent_laplacian(cx_i, cx_j, 1).kernel_dim() == 1
    assert naive_restricted_boundary(cx_i, cx_j, 1).rank() == 1
    # d(ABX) leaves scale i, so no chain survives the change of basis and the hole persists
    assert restricted_boundary(cx_i, cx_j, 1).rank == 0


@given(seeds, st.integers(3, 8), st.sampled_from([2, 3]), st.integers(0, 2))
def test_persistent_laplacian_routes_agree(seed, n, d, k):
    cx_i, cx_j = random_pair(np.random.default_rng(seed), n, d, k)
    exact, schur = persistent_kernel_dims(cx_i, cx_j, k)
    assert exact == schur
    dense = persistent_laplacian(cx_i, cx_j, k).delta
    assert np.array_equal(dense, dense.T)
    schur_delta = persistent_laplacian_schur(cx_i, cx_j, k).delta
    if schur_delta.size:
        assert np.linalg.eigvalsh(schur_delta).min() > -1e-8


@given(seeds, st.integers(3, 7))
def test_persistent_laplacian_at_equal_scales_is_the_laplacian(seed, n):
    cx, _ = random_pair(np.random.default_rng(seed), n)
    assert np.array_equal(persistent_laplacian(cx, cx, 1).delta, combinatorial_laplacian(cx, 1).delta)


def test_nesting_violation_raises():
    cx_i, cx_j = square_pair().complexes()
    with pytest.raises(NestingError):
        persistent_laplacian(cx_j, cx_i, 1)


def test_sparse_matrix_gf_reduction():
    m = SparseSignedMatrix.from_dense(np.array([[2, -1], [0, 3]]), ["a", "b"], ["x", "y"], GFP(3))
    assert sorted(m.entries) == [(0, 0, 2), (0, 1, 2)]
    assert m.rank() == 1
