"""Distance estimator tests: exhaustive oracles, witness checks, monotonicity."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfab.codes import CssCode, get_code
from qfab.distance import (
    estimate_distance_decoder,
    estimate_distance_infoset,
    lighten_representative,
)
from qfab.gf2 import BinaryMatrix


def _exhaustive_distance(code: CssCode, basis: str) -> int:
    # brute force over every vector; only for n small enough to enumerate
    h, pair = (code.hx, code.logicals()[0]) if basis == "Z" else (
        code.hz,
        code.logicals()[1],
    )
    hd = h.to_dense().astype(np.int64)
    pd = pair.to_dense().astype(np.int64)
    n = code.n
    best = n + 1
    for bits in itertools.product((0, 1), repeat=n):
        v = np.asarray(bits, dtype=np.int64)
        if (hd @ v & 1).any() or not (pd @ v & 1).any():
            continue
        best = min(best, int(v.sum()))
    return best


def _matrices(code: CssCode, basis: str) -> tuple[BinaryMatrix, BinaryMatrix]:
    if basis == "Z":
        return code.hx, code.logicals()[0]
    return code.hz, code.logicals()[1]


@pytest.mark.parametrize("name", ["c422", "steane", "surface3"])
@pytest.mark.parametrize("basis", ["Z", "X"])
def test_both_estimators_match_exhaustive_search(name, basis):
    code = get_code(name)
    expected = _exhaustive_distance(code, basis)
    decoder_est = estimate_distance_decoder(code, basis, trials=150, seed=3)
    infoset_est = estimate_distance_infoset(*_matrices(code, basis), trials=150, seed=3)
    assert decoder_est.d_upper == expected
    assert infoset_est.d_upper == expected


@pytest.mark.parametrize("basis", ["Z", "X"])
def test_witnesses_are_logical_operators(basis):
    code = get_code("steane")
    h, pair = _matrices(code, basis)
    hd = h.to_dense().astype(np.int64)
    pd = pair.to_dense().astype(np.int64)
    for est in (
        estimate_distance_decoder(code, basis, trials=60, seed=9),
        estimate_distance_infoset(h, pair, trials=60, seed=9),
    ):
        assert est.witness is not None
        assert not (hd @ est.witness & 1).any()
        assert (pd @ est.witness & 1).any()
        assert est.d_upper == int(est.witness.sum())
        assert est.trials == 60
        assert est.seed == 9


def test_histogram_counts_every_successful_trial():
    code = get_code("steane")
    est = estimate_distance_decoder(code, "Z", trials=40, seed=1)
    assert sum(est.weight_histogram.values()) == 40
    assert min(est.weight_histogram) == est.d_upper


@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=10, deadline=None)
def test_estimates_never_worsen_with_more_trials(seed):
    code = get_code("c422")
    h, pair = _matrices(code, "Z")
    few = estimate_distance_infoset(h, pair, trials=5, seed=seed)
    many = estimate_distance_infoset(h, pair, trials=25, seed=seed)
    assert many.d_upper <= few.d_upper
    few_d = estimate_distance_decoder(code, "Z", trials=5, seed=seed)
    many_d = estimate_distance_decoder(code, "Z", trials=25, seed=seed)
    assert many_d.d_upper <= few_d.d_upper


def test_no_encoded_qubits_reports_absent_estimate():
    code = CssCode(
        name="full-rank",
        hx=BinaryMatrix.from_dense(np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8)),
        hz=BinaryMatrix.from_dense(np.array([[1, 1, 1]], dtype=np.uint8)),
    )
    assert code.k == 0
    est = estimate_distance_decoder(code, "Z", trials=5, seed=0)
    assert est.d_upper is None
    assert est.witness is None


def test_rows_without_logical_action_give_absent_estimate():
    # pairing every kernel vector against stabilizers is identically zero
    code = get_code("steane")
    est = estimate_distance_infoset(code.hx, code.hz, trials=5, seed=0)
    assert est.d_upper is None
    assert est.witness is None


def test_rejects_bad_arguments():
    code = get_code("steane")
    with pytest.raises(ValueError, match="basis"):
        estimate_distance_decoder(code, "Y", trials=5)
    with pytest.raises(ValueError, match="trial"):
        estimate_distance_decoder(code, "Z", trials=0)
    with pytest.raises(ValueError, match="trial"):
        estimate_distance_infoset(code.hx, code.hx, trials=0)
    with pytest.raises(ValueError, match="column count"):
        estimate_distance_infoset(code.hx, BinaryMatrix.zeros(1, 3))


def test_bb18_attains_its_published_bound_quickly():
    est = estimate_distance_decoder(get_code("bb18"), "Z", trials=300, seed=7)
    assert est.d_upper == 18


def test_lighten_representative_recovers_minimum_weight():
    code = get_code("steane")
    lx, lz = code.logicals()
    heavy = lx.to_dense()[0] ^ code.hx.to_dense()[0]
    assert heavy.sum() > 3
    light = lighten_representative(code.hx, heavy, trials=100, seed=2)
    assert int(light.sum()) == 3
    # same class: the move stays inside the row space, pairing is untouched
    diff = BinaryMatrix.from_dense((light ^ heavy)[None, :])
    stacked = BinaryMatrix.vstack([code.hx, diff])
    assert stacked.rank() == code.hx.rank()
    pairing = lz.to_dense().astype(np.int64)
    assert ((pairing @ light) & 1).tolist() == ((pairing @ heavy) & 1).tolist()


def test_lighten_representative_validates_length():
    code = get_code("steane")
    with pytest.raises(ValueError, match="length"):
        lighten_representative(code.hx, np.ones(3, dtype=np.uint8))
