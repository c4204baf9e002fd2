import csv
import dataclasses
import io
import json
import math

import pytest
from hypothesis import given, strategies as st

from qtda.gap_probe import GapReport
from qtda.qsvt_emulator import CALLS_CONSTANT, threshold_polynomial
from qtda.resource_model import (
    DEFAULT_CONSTANTS, FOOTNOTES, REFERENCES, CostModelInput, MissingParameterError, compare, fit_exponent,
    headline_speedup, main_register_qubits, membership_cost, ours_headline, permutation_factor, projector_cost,
    reference_cost, state_prep_cost, total_runtime,
)

GAPS = GapReport(0.5, 0.7, 0.3, None)


def _inp(**kw):
    base = dict(N=32, k=2, Delta=0.2, eta=0.05, gaps=GAPS)
    base.update(kw)
    return CostModelInput(**base)


def test_qubit_counts():
    assert main_register_qubits("direct", 255, 4) == 255
    assert main_register_qubits("compact", 255, 4) == 40
    assert total_runtime(_inp(N=255, k=4, mapping="compact")).qubits == 40


@given(st.integers(2, 400), st.integers(0, 12))
def test_compact_crossover_is_exact(n, k):
    if k + 1 > n:
        return
    compact = main_register_qubits("compact", n, k)
    assert compact == (k + 1) * math.ceil(math.log2(n + 1))
    assert (compact < main_register_qubits("direct", n, k)) == ((k + 1) * math.ceil(math.log2(n + 1)) < n)


@pytest.mark.parametrize("mapping,memory", [("direct", "qrom"), ("compact", "qrom"), ("compact", "qram")])
def test_breakdown_reproduces_totals_exactly(mapping, memory):
    rep = total_runtime(_inp(mapping=mapping, memory=memory))
    depth, total = rep.recompute()
    assert depth == rep.non_clifford_depth and total == rep.total
    doc = json.loads(rep.to_json())
    assert doc["constants"] == DEFAULT_CONSTANTS
    assert any("formula-level" in n for n in doc["notes"])


def test_constants_scale_and_are_echoed():
    base = total_runtime(_inp())
    doubled = total_runtime(_inp(constants={"repetitions": 2.0}))
    assert doubled.total == pytest.approx(2 * base.total)
    assert doubled.constants["repetitions"] == 2.0


def test_direct_mapping_requires_qrom():
    with pytest.raises(ValueError):
        membership_cost(_inp(memory="qram"))


def test_input_validation():
    with pytest.raises(ValueError):
        _inp(N=3, k=3)
    with pytest.raises(ValueError):
        _inp(S_k=10**9)
    with pytest.raises(ValueError):
        _inp(mapping="sparse")
    with pytest.raises(ValueError):
        projector_cost(_inp(), "nope")


def test_absent_gaps_default_to_one():
    a = _inp(gaps=GapReport())
    b = _inp(gaps=GapReport(1.0, 1.0, 1.0, None))
    assert total_runtime(a).total == total_runtime(b).total


def test_projector_calls_follow_gap_and_error():
    inp = _inp()
    p1 = projector_cost(inp, "ker", eps=1e-3)
    p2 = projector_cost(inp, "ker", eps=1e-6)
    assert p2.calls == pytest.approx(2 * p1.calls)
    slow = projector_cost(dataclasses.replace(inp, gaps=GapReport(0.25, 0.7, 0.3, None)), "ker", eps=1e-3)
    assert slow.calls == pytest.approx(2 * p1.calls)


def test_search_calls_track_emulator_degree():
    # the emulator's per-sample cost at delta is the degree of a w = delta/2 threshold polynomial
    for delta in (0.05, 0.1, 0.2):
        deg = threshold_polynomial(0.5, delta / 2, 0.0625).degree
        assert deg <= CALLS_CONSTANT / delta * math.log(1 / 0.0625)


def test_permutation_factor_values():
    assert permutation_factor(0) == 1.0
    assert permutation_factor(1) == pytest.approx(math.sqrt(2))
    assert permutation_factor(10) == pytest.approx(math.sqrt(11 ** 11 / math.factorial(11)))


def test_state_prep_compact_needs_eps_s():
    with pytest.raises(MissingParameterError):
        state_prep_cost(_inp(mapping="compact"), 1e-3)


def test_self_reference_ratio_is_one():
    table = compare(_inp(), "self", sweep_N=[8, 16, 32])
    rows = list(csv.DictReader(io.StringIO(table.to_csv())))
    assert [float(r["ratio"]) for r in rows] == [1.0, 1.0, 1.0]
    assert list(rows[0]) == ["reference", "param_point", "ours", "theirs", "ratio"]


def test_estimated_rows_are_labelled():
    table = compare(_inp(), "gk")
    assert table.to_csv().splitlines()[1].startswith("gk (estimated)")
    assert set(table.footnotes) == set(FOOTNOTES)


@pytest.mark.parametrize("ref,params", [("uas", {}), ("hayakawa", {"Lambda1": 0.5}), ("classical_sparse", {}),
                                        ("classical_power", {"beta": 1})])
def test_missing_reference_parameters(ref, params):
    with pytest.raises(MissingParameterError):
        reference_cost(_inp(), ref, params)


def test_every_reference_evaluates():
    params = {"Lambda": 0.3, "Lambda1": 0.5, "Lambda2": 0.4, "S_bar": 50, "beta": 2}
    for ref in REFERENCES:
        assert reference_cost(_inp(), ref, params) > 0
    with pytest.raises(ValueError):
        reference_cost(_inp(), "other", params)


def test_hayakawa_ratio_is_headline_times_k4():
    inp = _inp(k=3)
    ratio = reference_cost(inp, "hayakawa", {"Lambda1": 1.0, "Lambda2": 1.0}) / ours_headline(
        dataclasses.replace(inp, gaps=GapReport(1.0, 1.0, 1.0, None)))
    assert ratio == pytest.approx(headline_speedup(inp) * inp.k ** 4)


def test_dense_k3_exponent_fits():
    grid = [16, 32, 64, 128, 256, 512]
    inp = _inp(k=3)
    classical = compare(inp, "classical_opt", sweep_N=grid).exponent_fits
    assert classical["theirs"] == pytest.approx(9.6, abs=0.5)
    assert classical["ours"] == pytest.approx(3.5, abs=0.15)
    assert fit_exponent([2, 4, 8], [4, 16, 64]) == pytest.approx(2.0)
