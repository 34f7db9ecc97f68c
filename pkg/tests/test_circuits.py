"""Tests for circuit generation, scheduling, and serialization.

Layer counts and gate counts for the catalog codes are pinned exactly;
the edge-coloring invariants are exercised on random bipartite graphs.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfab.circuits import (
    Instruction,
    NoiseModel,
    NoisyCircuit,
    color_schedule,
    memory_experiment,
    parse_circuit,
    serialize_circuit,
    syndrome_cycle,
)
from qfab.codes import build_steane, get_code
from qfab.gf2 import BinaryMatrix


def assert_proper_coloring(h: BinaryMatrix, layers) -> None:
    dense = h.to_dense().astype(bool)
    degree = max(int(dense.sum(axis=1).max()), int(dense.sum(axis=0).max()))
    assert len(layers) == degree
    seen = set()
    for layer in layers:
        checks = [edge[0] for edge in layer]
        qubits = [edge[1] for edge in layer]
        assert len(set(checks)) == len(checks)
        assert len(set(qubits)) == len(qubits)
        for check, qubit in layer:
            assert dense[check, qubit]
        seen.update(layer)
    assert len(seen) == int(dense.sum())


# ---------------------------------------------------------------------------
# scheduling
# ---------------------------------------------------------------------------


def test_single_check_star_schedule():
    h = BinaryMatrix.from_dense(np.ones((1, 7), dtype=np.uint8))
    layers = color_schedule(h)
    assert len(layers) == 7
    assert all(len(layer) == 1 for layer in layers)


def test_bb18_layer_counts():
    code = get_code("bb18")
    assert len(color_schedule(code.hx)) == 6
    assert len(color_schedule(code.hz)) == 6


@pytest.mark.parametrize("name", ["steane", "c422", "surface3", "bb18", "lp35"])
def test_catalog_schedules_are_proper(name):
    code = get_code(name)
    assert_proper_coloring(code.hx, color_schedule(code.hx))
    assert_proper_coloring(code.hz, color_schedule(code.hz))


@given(seed=st.integers(0, 2**32 - 1), rows=st.integers(1, 9), cols=st.integers(1, 9))
@settings(max_examples=80, deadline=None)
def test_random_bipartite_schedules_are_proper(seed, rows, cols):
    rng = np.random.default_rng(seed)
    dense = (rng.random((rows, cols)) < 0.4).astype(np.uint8)
    if not dense.any():
        dense[0, 0] = 1
    h = BinaryMatrix.from_dense(dense)
    assert_proper_coloring(h, color_schedule(h))


def test_schedule_is_deterministic():
    code = get_code("steane")
    assert color_schedule(code.hx) == color_schedule(code.hx)


# ---------------------------------------------------------------------------
# syndrome cycles
# ---------------------------------------------------------------------------


def test_bb18_cycle_gate_count():
    cycle = syndrome_cycle(get_code("bb18"), NoiseModel(0.006))
    assert cycle.cnot_count() == 1_488
    assert cycle.measurement_count == 124 + 124


def test_cycle_structure_orders_x_before_z():
    code = build_steane()
    cycle = syndrome_cycle(code, NoiseModel.noiseless())
    kinds = [inst.op for inst in cycle.instructions]
    # Z-ancilla preparation happens after every X-coupling layer
    first_z_prep = kinds.index("prepare", 1)
    assert all(op == "cnot" for op in kinds[2:first_z_prep])
    assert kinds[-2:] == ["measure", "measure"]
    assert cycle.instructions[-2].basis == "X"
    assert cycle.instructions[-1].basis == "Z"


def test_cycle_noise_placement():
    code = build_steane()
    cycle = syndrome_cycle(code, NoiseModel(0.01))
    two_qubit = [i for i in cycle.instructions if i.channel == "depolarize2"]
    cnots = [i for i in cycle.instructions if i.op == "cnot"]
    assert len(two_qubit) == len(cnots)
    for gate, channel in zip(cnots, two_qubit):
        assert channel.qubits == gate.qubits
    assert all(inst.rate == 0.01 for inst in two_qubit)


def test_noiseless_cycle_has_no_noise_ops():
    cycle = syndrome_cycle(build_steane(), NoiseModel.noiseless())
    assert all(inst.op != "noise" for inst in cycle.instructions)


# ---------------------------------------------------------------------------
# memory experiments
# ---------------------------------------------------------------------------


def test_bb18_memory_experiment_shape():
    circuit = memory_experiment(get_code("bb18"), 9, NoiseModel(0.006))
    assert circuit.detector_count == 1_240
    assert circuit.observable_count == 10
    assert circuit.measurement_count == 9 * 248 + 248


@pytest.mark.parametrize("cycles", [1, 2, 5])
def test_memory_detector_count_scales_with_cycles(cycles):
    code = build_steane()
    circuit = memory_experiment(code, cycles, NoiseModel(0.001))
    assert circuit.detector_count == code.mx * (cycles + 1)
    assert circuit.observable_count == code.k


def test_memory_experiment_rejects_zero_cycles():
    with pytest.raises(ValueError):
        memory_experiment(build_steane(), 0, NoiseModel(0.001))


def test_memory_detectors_reference_prior_measurements_only():
    circuit = memory_experiment(build_steane(), 3, NoiseModel(0.001))
    total = circuit.measurement_count
    for group in circuit.detectors + circuit.observables:
        assert all(0 <= m < total for m in group)


# ---------------------------------------------------------------------------
# circuit validation
# ---------------------------------------------------------------------------


def test_rejects_qubit_repeated_in_cnot_layer():
    with pytest.raises(ValueError, match="repeated"):
        NoisyCircuit(
            instructions=(Instruction("cnot", (0, 1, 1, 2)),),
            detectors=(),
            observables=(),
            qubit_count=3,
        )


def test_rejects_out_of_range_qubit():
    with pytest.raises(ValueError, match="register"):
        NoisyCircuit(
            instructions=(Instruction("hadamard", (5,)),),
            detectors=(),
            observables=(),
            qubit_count=3,
        )


def test_rejects_detector_beyond_record():
    with pytest.raises(ValueError, match="record"):
        NoisyCircuit(
            instructions=(Instruction("measure", (0,), basis="Z"),),
            detectors=((1,),),
            observables=(),
            qubit_count=1,
        )


def test_rejects_unsorted_detector():
    with pytest.raises(ValueError, match="sorted"):
        NoisyCircuit(
            instructions=(Instruction("measure", (0, 1), basis="Z"),),
            detectors=((1, 0),),
            observables=(),
            qubit_count=2,
        )


def test_rejects_unknown_channel_and_bad_rate():
    with pytest.raises(ValueError, match="channel"):
        NoisyCircuit(
            instructions=(Instruction("noise", (0,), channel="amplitude", rate=0.1),),
            detectors=(),
            observables=(),
            qubit_count=1,
        )
    with pytest.raises(ValueError, match="rate"):
        NoisyCircuit(
            instructions=(Instruction("noise", (0,), channel="depolarize1", rate=1.5),),
            detectors=(),
            observables=(),
            qubit_count=1,
        )


def test_noise_model_rejects_bad_rate():
    with pytest.raises(ValueError):
        NoiseModel(-0.1)
    with pytest.raises(ValueError):
        NoiseModel(1.0)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_small_circuit_text_exact():
    circuit = NoisyCircuit(
        instructions=(
            Instruction("prepare", (0, 1), basis="X"),
            Instruction("noise", (0, 1), channel="depolarize1", rate=0.006),
            Instruction("cnot", (0, 1)),
            Instruction("measure", (0, 1), basis="Z"),
        ),
        detectors=((0,),),
        observables=((0, 1),),
        qubit_count=2,
    )
    assert serialize_circuit(circuit) == (
        "QUBITS 2\n"
        "PREPARE X 0 1\n"
        "DEPOLARIZE1(0.006) 0 1\n"
        "CNOT 0 1\n"
        "MEASURE Z 0 1\n"
        "DETECTOR rec[-2]\n"
        "OBSERVABLE rec[-2] rec[-1]\n"
    )


@pytest.mark.parametrize("noise", [0.0, 0.006])
def test_memory_experiment_round_trips(noise):
    circuit = memory_experiment(build_steane(), 2, NoiseModel(noise))
    assert parse_circuit(serialize_circuit(circuit)) == circuit


def test_parse_rejects_malformed_input():
    with pytest.raises(ValueError, match="QUBITS"):
        parse_circuit("PREPARE X 0\n")
    with pytest.raises(ValueError, match="unrecognized"):
        parse_circuit("QUBITS 2\nTELEPORT 0 1\n")
    with pytest.raises(ValueError, match="record target"):
        parse_circuit("QUBITS 1\nMEASURE Z 0\nDETECTOR rec[1]\n")


def test_parse_ignores_comments_and_blank_lines():
    text = "# header\nQUBITS 1\n\nMEASURE Z 0\nDETECTOR rec[-1]\n"
    circuit = parse_circuit(text)
    assert circuit.measurement_count == 1
    assert circuit.detectors == ((0,),)
