import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from qtda.boundary_lab import boundary_dense
from qtda.classical_engines import persistent_betti_rank_formula
from qtda.exact import Q, rank
from qtda.fixtures import rectangle, square_pair, zeno_pair
from qtda.gap_probe import GapReport, embedding_indices, gap_report, image_basis, kernel_basis, pi_pi_gap
from qtda.qsvt_emulator import (
    DEGREE_CONSTANT, EPS_FLOOR, EncodingParams, InfeasibleError, ProjectorGapError, SearchExhaustedError,
    amplitude_binary_search, chernoff_repetitions, degree_bound, encoding_alpha, encoding_error_propagation,
    error_budget, estimate_persistent_betti_quantum, even_svt_clenshaw, image_projector, instance_deltas,
    ker_im_projector, kernel_projector, prepare_quantum_betti, product_encoding, purified_norm_sq,
    purified_overlap, search_levels, simplex_fraction, threshold_polynomial,
)

from conftest import random_pair

seeds = st.integers(0, 2**32 - 1)


@pytest.mark.parametrize("w", [0.02, 0.05, 0.1, 0.2])
@pytest.mark.parametrize("eps", [1e-1, 1e-3, 1e-6])
@pytest.mark.parametrize("orientation", ["high_pass", "low_pass"])
def test_threshold_polynomial_contract(w, eps, orientation):
    p = threshold_polynomial(0.5, w, eps, orientation)
    assert p.band_error(10_000) <= eps
    assert p.degree <= degree_bound(w, eps)
    assert not p.coefficients[1::2].any()
    x = np.linspace(-1, 1, 4001)
    vals = p(x)
    assert vals.min() >= -1e-12 and vals.max() <= 1 + 1e-12
    assert np.allclose(vals, p(-x))


def test_threshold_polynomial_large_eps_is_constant():
    p = threshold_polynomial(0.3, 0.1, 0.6)
    assert p.degree == 0 and p(0.9) == 0.5


@pytest.mark.parametrize("c,w,eps", [(0.5, 0.6, 0.1), (0.8, 0.3, 0.1), (0.5, 0.1, 0.0), (0.5, 0.1, 1.0)])
def test_threshold_polynomial_infeasible(c, w, eps):
    with pytest.raises(InfeasibleError):
        threshold_polynomial(c, w, eps)


def test_clenshaw_route_matches_spectral():
    cx, _ = rectangle().complexes()
    d1 = boundary_dense(cx, 1).astype(float)
    p = threshold_polynomial(0.25, 0.2, 1e-4, "low_pass")
    alpha = math.sqrt(cx.n)
    spec = kernel_projector(d1, alpha, None, 1e-4, "poly")
    # same polynomial on the same normalized operator
    q = threshold_polynomial(spec.gap / (2 * alpha), 0.9 * spec.gap / (2 * alpha), 1e-4, "low_pass")
    assert np.abs(even_svt_clenshaw(d1 / alpha, q) - spec.matrix).max() < 1e-12
    assert even_svt_clenshaw(np.zeros((0, 3)), p).shape == (3, 3)


def test_product_encoding_rule():
    e = product_encoding(EncodingParams(2.0, 1, 0.1), EncodingParams(3.0, 2, 0.01))
    assert (e.alpha, e.ancillas) == (6.0, 3)
    assert e.error == pytest.approx(2 * 0.01 + 3 * 0.1)
    assert encoding_error_propagation([EncodingParams(1, 0, 0.01)], 10) == pytest.approx(40 * math.sqrt(0.01))
    with pytest.raises(ValueError):
        encoding_error_propagation([EncodingParams(1, 0, 1.5)], 3)
    with pytest.raises(ValueError):
        EncodingParams(1.0).check_norm(np.eye(2) * 2)


def _projector_inputs(cx_i, cx_j, k):
    assume(cx_i.count(k) > 0)
    return boundary_dense(cx_i, k).astype(float), boundary_dense(cx_j, k + 1).astype(float)


@given(seeds, st.integers(4, 8), st.sampled_from([1e-2, 1e-4, 1e-8]))
def test_ideal_projectors_are_exact(seed, n, eps):
    cx_i, cx_j = random_pair(np.random.default_rng(seed), n)
    dk, dk1 = _projector_inputs(cx_i, cx_j, 1)
    pk = kernel_projector(dk, math.sqrt(n), None, eps, "ideal")
    pi = image_projector(dk1.T, math.sqrt(n), None, eps, "ideal")
    for p in (pk.matrix, pi.matrix):
        assert np.allclose(p @ p, p) and np.allclose(p, p.T)
    assert not np.abs(dk @ pk.matrix).max() > 1e-9
    assert round(pk.trace()) == cx_i.count(1) - rank(dk.astype(int), Q)
    assert round(pi.trace()) == rank(dk1.astype(int), Q)


@given(seeds, st.integers(4, 8), st.sampled_from([1e-2, 1e-4, 1e-8, 1e-13]))
def test_poly_projectors_within_propagated_bound(seed, n, eps):
    cx_i, cx_j = random_pair(np.random.default_rng(seed), n)
    dk, dk1 = _projector_inputs(cx_i, cx_j, 1)
    alpha_k, alpha_k1 = encoding_alpha("direct", n, 1), encoding_alpha("direct", n, 2)
    ideal_k = kernel_projector(dk, alpha_k, None, 0, "ideal")
    ideal_i = image_projector(dk1.T, alpha_k1, None, 0, "ideal")
    pk = kernel_projector(dk, alpha_k, None, eps, "poly")
    pi = image_projector(dk1.T, alpha_k1, None, eps, "poly")
    assert pk.eps == max(eps, EPS_FLOOR)
    assert np.linalg.norm(pk.matrix - ideal_k.matrix, 2) <= pk.bound
    assert np.linalg.norm(pi.matrix - ideal_i.matrix, 2) <= pi.bound
    emb = embedding_indices(cx_i, cx_j, 1)
    gap = pi_pi_gap(cx_i, cx_j, 1)
    ideal = ker_im_projector(ideal_k, ideal_i, gap, 0, "ideal", emb)
    poly = ker_im_projector(pk, pi, gap, eps, "poly", emb)
    assert np.linalg.norm(poly.matrix - ideal.matrix, 2) <= poly.bound


def test_gap_larger_than_true_gap_rejected():
    cx, _ = square_pair().complexes()
    d1 = boundary_dense(cx, 1).astype(float)
    s = np.linalg.svd(d1, compute_uv=False)
    true = s[s > 1e-9].min()
    with pytest.raises(ProjectorGapError):
        kernel_projector(d1, 2.0, true * 1.5, 1e-3, "poly")
    with pytest.raises(InfeasibleError):
        kernel_projector(d1, 2.0, 1e-12, 1e-3, "poly")


@given(seeds, st.integers(4, 8))
def test_purified_state_identity(seed, n):
    cx_i, cx_j = random_pair(np.random.default_rng(seed), n)
    dk, _ = _projector_inputs(cx_i, cx_j, 1)
    p = kernel_projector(dk, math.sqrt(n), None, 0, "ideal")
    assert abs(purified_norm_sq(p.matrix) - round(p.trace()) / p.dim) < 1e-12
    assert purified_overlap(p, cx_i, 1) ** 2 == pytest.approx(purified_norm_sq(p.matrix), abs=1e-15)
    wrong_k = 0 if cx_i.count(0) != p.dim else 2
    with pytest.raises(ValueError):
        purified_overlap(p, cx_i, wrong_k)


@given(seeds, st.integers(4, 8))
def test_equal_scales_collapse_to_image(seed, n):
    cx, _ = random_pair(np.random.default_rng(seed), n)
    assert pi_pi_gap(cx, cx, 1) == 1.0
    dk, dk1 = _projector_inputs(cx, cx, 1)
    pk = kernel_projector(dk, math.sqrt(n), None, 0, "ideal")
    pi = image_projector(dk1.T, math.sqrt(n), None, 0, "ideal")
    pki = ker_im_projector(pk, pi, 1.0, 0, "ideal")
    assert np.abs(pki.matrix - pi.matrix).max() < 1e-12


def test_ker_im_projector_basis_checks():
    cx_i, cx_j = zeno_pair().complexes()
    dk, dk1 = boundary_dense(cx_i, 1).astype(float), boundary_dense(cx_j, 2).astype(float)
    pk = kernel_projector(dk, 3.0, None, 0, "ideal")
    pi = image_projector(dk1.T, 3.0, None, 0, "ideal")
    with pytest.raises(ValueError):
        ker_im_projector(pk, pi, 0.5, 0)
    with pytest.raises(InfeasibleError):
        ker_im_projector(pk, pi, 1.5, 0, "ideal", embedding_indices(cx_i, cx_j, 1))


def test_search_levels_and_chernoff():
    assert search_levels(0.25) == 2 and search_levels(0.1) == 4 and search_levels(0.5) == 0
    assert chernoff_repetitions(1.0, 0.0, 0.01) == math.ceil(6 * math.log(100))


@given(st.floats(0, 1), st.sampled_from([0.02, 0.05, 0.1]), seeds)
def test_binary_search_interval_contains_truth_noiseless(a, delta, seed):
    est = amplitude_binary_search(a, delta, 0.05, None, np.random.default_rng(seed))
    assert abs(est.value - a) <= delta + 1e-12
    assert est.levels <= search_levels(min(delta, 0.25))


def test_binary_search_failure_rate_with_noise():
    rng = np.random.default_rng(0)
    misses = 0
    for t in range(600):
        a = rng.random()
        est = amplitude_binary_search(a, 0.05, 0.05, None, rng, eps_x=0.25, eps_f=0.05)
        misses += abs(est.value - a) > 0.05
    assert misses / 600 <= 0.05


def test_binary_search_infeasible_and_exhausted():
    with pytest.raises(InfeasibleError):
        amplitude_binary_search(0.3, 0.1, 0.05, None, np.random.default_rng(0), eps_x=0.5)
    with pytest.raises(ValueError):
        amplitude_binary_search(1.3, 0.1, 0.05, None, np.random.default_rng(0))
    assert issubclass(SearchExhaustedError, RuntimeError)


@pytest.mark.parametrize("mapping", ["direct", "compact"])
@pytest.mark.parametrize("dims", [(1, 1, 1), (12, 20, 8), (0, 3, 3)])
def test_error_budget_meets_instance_target(mapping, dims):
    gaps = GapReport(0.7, 1.2, 0.4, 0.3)
    b = error_budget(0.4, 0.05, mapping, 10, 2, gaps, 4.0, 90, dims)
    d = min(b.delta)
    err = b.instance_error(d)
    assert err <= b.eps3 * (1 + 1e-9)
    if mapping == "direct":
        assert err == pytest.approx(b.eps3, rel=1e-9)
    assert b.to_dict()["eps3_propagated"] == err
    assert b.delta == instance_deltas(0.4, 90, math.comb(10, 3), *dims)


def test_error_budget_rejects_bad_input():
    gaps = GapReport(None, None, None, None)
    with pytest.raises(InfeasibleError):
        error_budget(0.0, 0.05, "direct", 5, 1, gaps)
    with pytest.raises(InfeasibleError):
        error_budget(0.4, 0.05, "direct", 5, 1, gaps, C=1.0)
    with pytest.raises(ValueError):
        error_budget(0.4, 0.05, "sparse", 5, 1, gaps)


def test_encoding_alpha():
    assert encoding_alpha("direct", 9, 2) == 3.0
    assert encoding_alpha("compact", 7, 1) == 4.0


@pytest.mark.parametrize("factory,want", [(square_pair, 0), (rectangle, 1), (zeno_pair, 1)])
@pytest.mark.parametrize("mode", ["ideal", "poly"])
def test_estimator_on_fixtures(factory, want, mode):
    fx = factory()
    cx_i, cx_j = fx.complexes()
    assert persistent_betti_rank_formula(cx_i, cx_j, fx.k) == want
    setup = prepare_quantum_betti(cx_i, cx_j, fx.k, 0.4, 0.05, mode)
    assert setup.truth["beta"] == want
    hits = sum(setup.run(s).beta_estimate == want for s in range(30))
    assert hits >= 27


def test_estimator_is_deterministic_per_seed():
    cx_i, cx_j = zeno_pair().complexes()
    a = estimate_persistent_betti_quantum(cx_i, cx_j, 1, 0.4, 0.05, rng=11).to_json()
    b = estimate_persistent_betti_quantum(cx_i, cx_j, 1, 0.4, 0.05, rng=11).to_json()
    assert a == b
    doc = json.loads(a)
    assert doc["seed"] == 11 and doc["rounded"] is True and len(doc["instances"]) == 3


def test_estimator_raw_value_when_delta_large():
    cx_i, cx_j = zeno_pair().complexes()
    res = estimate_persistent_betti_quantum(cx_i, cx_j, 1, 0.8, 0.05, rng=1)
    assert not res.rounded and res.beta_estimate == res.raw_estimate


def test_simplex_fraction_and_empty_level():
    cx_i, _ = square_pair().complexes()
    assert simplex_fraction(cx_i, 1) == 4 / 6
    with pytest.raises(InfeasibleError):
        prepare_quantum_betti(cx_i, cx_i, 2, 0.4, 0.05)
