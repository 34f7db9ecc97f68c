"""Decoder tests: BP, cluster post-processing, ensembles, and batch decoding.

Small DEMs here are chosen so every claim has an exhaustive oracle: the
satisfying assignments of a four-mechanism model can be enumerated, and a
six-mechanism model admits an exact maximum-likelihood table.
"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfab.circuits import NoiseModel, memory_experiment
from qfab.codes import build_steane
from qfab.decoder import (
    DecoderConfig,
    MaximumLikelihoodTable,
    bp_decode,
    bp_lsd_decode,
    decode_batch,
    ensemble_decode,
    ensemble_variants,
    lsd_postprocess,
    matrix_decode,
)
from qfab.gf2 import BinaryMatrix
from qfab.simulator import DetectorErrorModel, Mechanism, compile_dem, sample
from qfab.util import derive_seed


def _dem(mechs, detectors, observables=1):
    return DetectorErrorModel(
        tuple(Mechanism(p, tuple(d), tuple(o)) for p, d, o in mechs),
        detectors,
        observables,
    )


def _apply(dem, correction):
    s = np.zeros(dem.detector_count, dtype=np.uint8)
    for j in np.flatnonzero(correction):
        for c in dem.mechanisms[j].detectors:
            s[c] ^= 1
    return s


def _llr_cost(dem, correction):
    return sum(
        abs(math.log((1.0 - m.probability) / m.probability))
        for m, b in zip(dem.mechanisms, correction)
        if b
    )


# a path-shaped Tanner graph: no cycles, so BP is exact on it
TREE = _dem(
    [
        (0.05, (0,), (0,)),
        (0.05, (0, 1), ()),
        (0.05, (1, 2), ()),
        (0.05, (2, 3), ()),
    ],
    4,
)

# four mechanisms forming a single length-4 cycle of checks
CYCLE_SIGS = ((0, 1), (1, 2), (2, 3), (3, 0))


def _cycle_dem(priors):
    return _dem(
        [(p, s, (0,) if i == 0 else ()) for i, (p, s) in enumerate(zip(priors, CYCLE_SIGS))],
        4,
    )


# equal priors make the two-mechanism explanations of (1, 0, 1, 0) exactly
# degenerate, which is the classic trap for min-sum on a short cycle
TRAP = _cycle_dem((0.02, 0.02, 0.02, 0.02))
TRAP_SYNDROME = np.array([1, 0, 1, 0], dtype=np.uint8)

# here the weight-1 explanation of (1, 1, 0, 0) beats the weight-3 rival by
# a sliver of cost, close enough to the tie for min-sum to keep oscillating
NEAR_TIE = _cycle_dem((0.045, 0.195, 0.258, 0.358))
NEAR_TIE_SYNDROME = np.array([1, 1, 0, 0], dtype=np.uint8)


def _exhaustive_solutions(dem, syndrome):
    hits = []
    for bits in itertools.product((0, 1), repeat=dem.mechanism_count):
        vec = np.array(bits, dtype=np.uint8)
        if np.array_equal(_apply(dem, vec), syndrome):
            hits.append((vec, _llr_cost(dem, vec)))
    return hits


def test_config_defaults():
    cfg = DecoderConfig()
    assert cfg.bp_iterations == 100
    assert cfg.ms_scaling == 0.0
    assert cfg.lsd_order == 5
    assert cfg.schedule == "serial"
    assert cfg.prior_transform == "nominal"
    assert cfg.thermal_sigma == pytest.approx(0.04)


@pytest.mark.parametrize(
    "kwargs, message",
    [
        ({"bp_iterations": 0}, "bp_iterations"),
        ({"lsd_order": -1}, "lsd_order"),
        ({"ms_scaling": -0.5}, "ms_scaling"),
        ({"schedule": "flooding"}, "schedule"),
        ({"prior_transform": "scale(x)"}, "prior_transform"),
        ({"prior_transform": "squash"}, "prior_transform"),
        ({"thermal_sigma": 0.0}, "thermal_sigma"),
    ],
)
def test_config_rejects_bad_values(kwargs, message):
    with pytest.raises(ValueError, match=message):
        DecoderConfig(**kwargs)


@pytest.mark.parametrize(
    "transform", ["nominal", "scale(0.8)", "scale(1.2)", "scale(2)", "thermal"]
)
def test_config_accepts_documented_prior_transforms(transform):
    assert DecoderConfig(prior_transform=transform).prior_transform == transform


def test_zero_syndrome_gives_zero_correction():
    out = bp_decode(TREE, np.zeros(4, dtype=np.uint8))
    assert out.converged
    assert not out.correction.any()
    assert out.cost == 0.0
    assert not out.observable_flips.any()


def test_tree_single_faults_recovered_exactly():
    # exhaustive over single faults: on a cycle-free graph BP must nail each
    for j in range(TREE.mechanism_count):
        truth = np.zeros(TREE.mechanism_count, dtype=np.uint8)
        truth[j] = 1
        out = bp_decode(TREE, _apply(TREE, truth))
        assert out.converged
        np.testing.assert_array_equal(out.correction, truth)
        assert out.cost == pytest.approx(_llr_cost(TREE, truth), rel=1e-5)


def test_rotation_symmetry_rotates_the_answer():
    dem = _cycle_dem((0.05, 0.05, 0.05, 0.05))
    base = bp_decode(dem, np.array([1, 1, 0, 0], dtype=np.uint8))
    rotated = bp_decode(dem, np.array([0, 1, 1, 0], dtype=np.uint8))
    assert base.converged and rotated.converged
    np.testing.assert_array_equal(np.roll(base.correction, 1), rotated.correction)


def test_nonconvergence_is_a_state_not_an_error():
    out = bp_decode(TRAP, TRAP_SYNDROME)
    assert not out.converged
    assert out.correction.shape == (4,)
    assert math.isfinite(out.cost)


def test_bp_decode_is_deterministic():
    a = bp_decode(NEAR_TIE, NEAR_TIE_SYNDROME)
    b = bp_decode(NEAR_TIE, NEAR_TIE_SYNDROME)
    np.testing.assert_array_equal(a.correction, b.correction)
    assert a.converged == b.converged and a.cost == b.cost


def test_bp_oscillates_but_lsd_returns_the_single_mechanism():
    solutions = _exhaustive_solutions(NEAR_TIE, NEAR_TIE_SYNDROME)
    costs = sorted(c for _, c in solutions)
    single = np.array([1, 0, 0, 0], dtype=np.uint8)
    best = min(solutions, key=lambda t: t[1])
    np.testing.assert_array_equal(best[0], single)
    assert costs[1] - costs[0] > 1e-4  # strictly cheapest, not a tie

    assert not bp_decode(NEAR_TIE, NEAR_TIE_SYNDROME).converged
    out = bp_lsd_decode(NEAR_TIE, NEAR_TIE_SYNDROME)
    assert out.converged
    np.testing.assert_array_equal(out.correction, single)
    assert out.cost == pytest.approx(best[1], rel=1e-5)
    np.testing.assert_array_equal(out.observable_flips, [1])


def test_degenerate_trap_lsd_matches_exhaustive_minimum():
    solutions = _exhaustive_solutions(TRAP, TRAP_SYNDROME)
    best_cost = min(c for _, c in solutions)
    assert not bp_decode(TRAP, TRAP_SYNDROME).converged
    out = bp_lsd_decode(TRAP, TRAP_SYNDROME)
    assert out.converged
    assert int(out.correction.sum()) == 2
    np.testing.assert_array_equal(_apply(TRAP, out.correction), TRAP_SYNDROME)
    assert out.cost == pytest.approx(best_cost, rel=1e-5)


def test_insoluble_syndrome_reports_nonconverged():
    dem = _dem([(0.1, (0, 1), ())], 2, 0)
    out = bp_lsd_decode(dem, np.array([1, 0], dtype=np.uint8))
    assert not out.converged
    assert not out.correction.any()


@st.composite
def small_dems_with_syndromes(draw):
    n_det = draw(st.integers(min_value=2, max_value=5))
    n_mech = draw(st.integers(min_value=2, max_value=8))
    seen = set()
    mechs = []
    for _ in range(n_mech):
        dets = draw(
            st.sets(st.integers(min_value=0, max_value=n_det - 1), min_size=1, max_size=n_det)
        )
        obs = draw(st.sets(st.integers(min_value=0, max_value=0), max_size=1))
        key = (tuple(sorted(dets)), tuple(sorted(obs)))
        if key in seen:
            continue
        seen.add(key)
        p = draw(st.floats(min_value=0.02, max_value=0.4, allow_nan=False))
        mechs.append((p, key[0], key[1]))
    if not mechs:
        mechs.append((0.1, (0,), ()))
    dem = _dem(mechs, n_det)
    truth = np.array(
        draw(st.lists(st.integers(0, 1), min_size=len(mechs), max_size=len(mechs))),
        dtype=np.uint8,
    )
    return dem, _apply(dem, truth)


@given(small_dems_with_syndromes())
@settings(max_examples=60, deadline=None)
def test_wider_search_never_costs_more(case):
    dem, syndrome = case
    soft = np.zeros(dem.mechanism_count, dtype=np.float32)
    narrow = lsd_postprocess(dem, syndrome, soft, DecoderConfig(lsd_order=0))
    wide = lsd_postprocess(dem, syndrome, soft, DecoderConfig(lsd_order=5))
    # the syndrome came from an actual assignment, so growth must succeed
    assert narrow.converged and wide.converged
    assert wide.cost <= narrow.cost + 1e-9
    np.testing.assert_array_equal(_apply(dem, narrow.correction), syndrome)
    np.testing.assert_array_equal(_apply(dem, wide.correction), syndrome)


@given(small_dems_with_syndromes())
@settings(max_examples=60, deadline=None)
def test_converged_corrections_satisfy_the_syndrome(case):
    dem, syndrome = case
    out = bp_lsd_decode(dem, syndrome)
    assert out.converged
    np.testing.assert_array_equal(_apply(dem, out.correction), syndrome)
    assert out.cost == pytest.approx(_llr_cost(dem, out.correction), rel=1e-5, abs=1e-9)


def test_memory_experiment_single_faults_all_satisfied():
    dem = compile_dem(memory_experiment(build_steane(), 3, NoiseModel(1e-3)))
    for mech in dem.mechanisms:
        syndrome = np.zeros(dem.detector_count, dtype=np.uint8)
        for c in mech.detectors:
            syndrome[c] ^= 1
        out = bp_lsd_decode(dem, syndrome)
        assert out.converged
        np.testing.assert_array_equal(_apply(dem, out.correction), syndrome)


def test_variant_roster_covers_the_five_configurations():
    cfg = DecoderConfig(seed=17)
    variants = ensemble_variants(cfg)
    assert len(variants) == 5
    assert [v.prior_transform for v in variants] == [
        "nominal",
        "nominal",
        "scale(0.8)",
        "scale(1.2)",
        "thermal",
    ]
    assert [v.schedule for v in variants] == [
        "serial",
        "serial-randomized",
        "serial",
        "serial",
        "serial",
    ]
    assert variants[1].seed == derive_seed(17, "variant", 1)
    assert variants[4].seed == derive_seed(17, "variant", 4)


def test_ensemble_takes_the_cheapest_satisfying_candidate():
    cfg = DecoderConfig(seed=3)
    outcomes = [
        bp_lsd_decode(TRAP, TRAP_SYNDROME, v, decode_index=0)
        for v in ensemble_variants(cfg)
    ]
    satisfying = [o for o in outcomes if o.converged]
    assert satisfying
    best = min(o.cost for o in satisfying)
    out = ensemble_decode(TRAP, TRAP_SYNDROME, cfg)
    assert out.converged
    assert out.cost == pytest.approx(best, rel=1e-7)
    np.testing.assert_array_equal(_apply(TRAP, out.correction), TRAP_SYNDROME)


def test_ensemble_with_no_satisfying_candidate_is_a_failure():
    dem = _dem([(0.1, (0, 1), ())], 2, 0)
    out = ensemble_decode(dem, np.array([1, 0], dtype=np.uint8))
    assert not out.converged


def test_matrix_decode_solves_a_known_system():
    h = np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8)
    got = matrix_decode(h, np.array([1, 1], dtype=np.uint8))
    assert got is not None
    np.testing.assert_array_equal((h @ got) % 2, [1, 1])


def test_matrix_decode_accepts_packed_matrices():
    dense = np.array([[1, 0, 1], [1, 1, 0]], dtype=np.uint8)
    got = matrix_decode(BinaryMatrix.from_dense(dense), np.array([0, 1], dtype=np.uint8))
    assert got is not None
    np.testing.assert_array_equal((dense @ got) % 2, [0, 1])


def test_matrix_decode_order_refines_the_greedy_solution():
    # reliability ranking puts the two narrow columns first, so the order-0
    # solve pays weight 2; one kernel flip swaps in the cheaper weight-1 fix
    h = np.array([[1, 1, 0], [1, 0, 1]], dtype=np.uint8)
    syndrome = np.array([1, 1], dtype=np.uint8)
    soft = np.array([5.0, -1.0, -2.0], dtype=np.float32)
    greedy = matrix_decode(h, syndrome, order=0, soft_llrs=soft)
    refined = matrix_decode(h, syndrome, order=2, soft_llrs=soft)
    assert int(greedy.sum()) == 2
    assert int(refined.sum()) == 1
    np.testing.assert_array_equal((h @ refined) % 2, syndrome)


def test_matrix_decode_unsatisfiable_returns_none():
    h = np.array([[1, 1], [1, 1]], dtype=np.uint8)
    assert matrix_decode(h, np.array([1, 0], dtype=np.uint8)) is None


# three data flips with visible signatures plus three rarer look-alikes that
# differ only in the logical they toggle: an exactly solvable ambiguity
SHADOW = _dem(
    [
        (0.010, (0,), (0,)),
        (0.004, (0,), ()),
        (0.010, (0, 1), ()),
        (0.004, (0, 1), (0,)),
        (0.010, (1,), ()),
        (0.004, (1,), (0,)),
    ],
    2,
)


def test_ml_table_matches_direct_enumeration():
    table = MaximumLikelihoodTable(SHADOW)
    for syn_bits in range(4):
        syndrome = np.array([(syn_bits >> k) & 1 for k in range(2)], dtype=np.uint8)
        masses = {}
        for bits in itertools.product((0, 1), repeat=SHADOW.mechanism_count):
            vec = np.array(bits, dtype=np.uint8)
            if not np.array_equal(_apply(SHADOW, vec), syndrome):
                continue
            mass = 1.0
            for m, b in zip(SHADOW.mechanisms, bits):
                mass *= m.probability if b else 1.0 - m.probability
            obs = 0
            for j in np.flatnonzero(vec):
                for o in SHADOW.mechanisms[j].observables:
                    obs ^= 1 << o
            masses[obs] = masses.get(obs, 0.0) + mass
        expected = max(masses, key=masses.get)
        got = table.decode_words(np.array([syn_bits], dtype=np.uint64))
        assert got is not None
        assert int(got[0]) == expected


def test_ml_table_rejects_oversized_models():
    mechs = [(0.01, (i % 3, 3 + (i % 2)), ()) for i in range(21)]
    # make signatures distinct by spreading over five detectors
    mechs = [(0.01, (i % 5,), ()) for i in range(5)]
    mechs += [(0.01, (i % 5, (i + 1) % 5), ()) for i in range(5)]
    mechs += [(0.01, (i % 5, (i + 2) % 5), ()) for i in range(5)]
    mechs += [(0.02, (i % 5,), (0,)) for i in range(5)]
    mechs += [(0.02, (0, 1, 2), ())]
    dem = _dem(mechs, 5)
    assert dem.mechanism_count == 21
    with pytest.raises(ValueError, match="mechanisms"):
        MaximumLikelihoodTable(dem)


def test_ensemble_failures_sit_in_the_ml_optimality_band():
    # low noise, six mechanisms: the exact decoder is tractable and the
    # ensemble must land within half again as many failures
    table = MaximumLikelihoodTable(SHADOW)
    batch = sample(SHADOW, shots=100_000, seed=23)
    res = decode_batch(SHADOW, batch.detector_bits, config=DecoderConfig(seed=29))
    wrong = np.any(res.observable_bits ^ batch.observable_bits, axis=1)
    ens_failures = int((wrong | (res.satisfied == 0)).sum())
    ml_failures = table.failure_count(batch)
    assert ml_failures > 0
    assert ml_failures <= ens_failures <= math.ceil(1.5 * ml_failures)


def test_decode_batch_agrees_with_single_shot_calls():
    batch = sample(SHADOW, shots=64, seed=31)
    cfg = DecoderConfig(seed=37)
    res = decode_batch(SHADOW, batch.detector_bits, config=cfg, method="bp-lsd")
    from qfab.util import unpack_rows

    syndromes = unpack_rows(batch.detector_bits, SHADOW.detector_count)
    for i in range(64):
        single = bp_lsd_decode(SHADOW, syndromes[i], cfg, decode_index=i)
        assert bool(res.satisfied[i]) == single.converged
        got = unpack_rows(res.observable_bits[i : i + 1], 1)[0]
        np.testing.assert_array_equal(got, single.observable_flips)


def test_decode_batch_validates_inputs():
    batch = sample(SHADOW, shots=4, seed=1)
    with pytest.raises(ValueError, match="method"):
        decode_batch(SHADOW, batch.detector_bits, method="majority")
    with pytest.raises(ValueError, match="packed into"):
        decode_batch(SHADOW, np.zeros((4, 9), dtype=np.uint64))


def test_decode_batch_summary_and_bp_sidecar():
    batch = sample(SHADOW, shots=256, seed=41)
    res = decode_batch(SHADOW, batch.detector_bits, config=DecoderConfig(seed=43))
    assert res.method == "ensemble"
    assert res.bp_satisfied is not None and res.bp_observable_bits is not None
    summary = res.summary()
    assert summary["shots"] == 256
    assert 0.0 <= summary["satisfied_fraction"] <= 1.0
    assert summary["failures"] == int((res.satisfied == 0).sum())

    plain = decode_batch(SHADOW, batch.detector_bits, method="bp-lsd")
    assert plain.bp_satisfied is None and plain.bp_observable_bits is None


def test_decode_batch_is_deterministic():
    batch = sample(SHADOW, shots=128, seed=47)
    cfg = DecoderConfig(seed=53)
    a = decode_batch(SHADOW, batch.detector_bits, config=cfg)
    b = decode_batch(SHADOW, batch.detector_bits, config=cfg)
    np.testing.assert_array_equal(a.observable_bits, b.observable_bits)
    np.testing.assert_array_equal(a.satisfied, b.satisfied)
    np.testing.assert_array_equal(a.costs, b.costs)
