"""Detector error models: compilation from noisy circuits, and sampling.

Every elementary fault of every noise channel is pushed forward through
the Clifford instructions as a Pauli frame; the measurements it flips
determine which detectors and observables it toggles. Faults sharing a
birth instruction propagate together as rows of a bit matrix, so the
compiler's cost is a few array operations per (noise site, instruction)
pair rather than per fault.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qfab.circuits import NoisyCircuit
from qfab.util import pack_rows, unpack_rows

_WILSON_Z = 1.959963984540054  # two-sided 95%

_PAULIS_1 = ("X", "Y", "Z")
_PAULIS_2 = tuple(
    (a, b) for a in ("I", "X", "Y", "Z") for b in ("I", "X", "Y", "Z") if (a, b) != ("I", "I")
)


@dataclass(frozen=True)
class Mechanism:
    """One independent error source with the signature it flips."""

    probability: float
    detectors: tuple[int, ...]
    observables: tuple[int, ...]


@dataclass(frozen=True)
class DetectorErrorModel:
    mechanisms: tuple[Mechanism, ...]
    detector_count: int
    observable_count: int

    def __post_init__(self):
        seen = set()
        for mech in self.mechanisms:
            if not 0.0 < mech.probability < 1.0:
                raise ValueError(f"mechanism probability {mech.probability} outside (0, 1)")
            for d in mech.detectors:
                if not 0 <= d < self.detector_count:
                    raise ValueError(f"detector index {d} out of range")
            for o in mech.observables:
                if not 0 <= o < self.observable_count:
                    raise ValueError(f"observable index {o} out of range")
            key = (mech.detectors, mech.observables)
            if key in seen:
                raise ValueError(f"duplicate mechanism signature {key}")
            seen.add(key)

    @property
    def mechanism_count(self) -> int:
        return len(self.mechanisms)


@dataclass(frozen=True)
class SampleBatch:
    """Monte Carlo draws from a DEM, bit-packed along the index axis."""

    shots: int
    detector_bits: np.ndarray  # uint64, shots x ceil(detector_count / 64)
    observable_bits: np.ndarray
    detector_count: int
    observable_count: int
    seed: int

    def __post_init__(self):
        for name, bits, count in (
            ("detector", self.detector_bits, self.detector_count),
            ("observable", self.observable_bits, self.observable_count),
        ):
            expect = (self.shots, (count + 63) // 64)
            if bits.shape != expect:
                raise ValueError(f"{name} bits shaped {bits.shape}, expected {expect}")

    def detectors_dense(self) -> np.ndarray:
        return unpack_rows(self.detector_bits, self.detector_count)

    def observables_dense(self) -> np.ndarray:
        return unpack_rows(self.observable_bits, self.observable_count)


# ---------------------------------------------------------------------------
# compilation
# ---------------------------------------------------------------------------


def _initial_frames(inst) -> tuple[list[tuple[int, str]], ...]:
    """Elementary faults of one noise instruction, as per-qubit Pauli lists."""
    if inst.channel == "depolarize1":
        return tuple([(q, p)] for q in inst.qubits for p in _PAULIS_1)
    faults = []
    pairs = list(zip(inst.qubits[::2], inst.qubits[1::2]))
    for a, b in pairs:
        for pa, pb in _PAULIS_2:
            fault = [(a, pa)] if pa != "I" else []
            if pb != "I":
                fault.append((b, pb))
            faults.append(fault)
    return tuple(faults)


def compile_dem(circuit: NoisyCircuit) -> DetectorErrorModel:
    """Propagate every elementary fault and merge identical signatures.

    Faults that flip nothing are dropped; mechanisms with the same
    (detector, observable) signature combine as the probability that an
    odd number of them fire. Nothing is pruned by magnitude.
    """
    for inst in circuit.instructions:
        if inst.op not in ("prepare", "hadamard", "cnot", "measure", "noise"):
            raise ValueError(f"non-Clifford instruction {inst.op!r} cannot be compiled")

    nq = circuit.qubit_count
    total_meas = circuit.measurement_count
    meas_base = []
    counter = 0
    for inst in circuit.instructions:
        meas_base.append(counter)
        if inst.op == "measure":
            counter += len(inst.qubits)

    # packed per-measurement signatures over detectors and observables
    det_words = max(1, (circuit.detector_count + 63) // 64)
    obs_words = max(1, (circuit.observable_count + 63) // 64)
    meas_det = np.zeros((total_meas, det_words), dtype=np.uint64)
    meas_obs = np.zeros((total_meas, obs_words), dtype=np.uint64)
    for d, group in enumerate(circuit.detectors):
        for m in group:
            meas_det[m, d >> 6] ^= np.uint64(1 << (d & 63))
    for o, group in enumerate(circuit.observables):
        for m in group:
            meas_obs[m, o >> 6] ^= np.uint64(1 << (o & 63))

    merged: dict[tuple[bytes, bytes], float] = {}
    instructions = circuit.instructions
    for born, inst in enumerate(instructions):
        if inst.op != "noise":
            continue
        faults = _initial_frames(inst)
        nf = len(faults)
        rate = inst.rate / len(_PAULIS_1 if inst.channel == "depolarize1" else _PAULIS_2)
        fx = np.zeros((nf, nq), dtype=np.uint8)
        fz = np.zeros((nf, nq), dtype=np.uint8)
        for row, fault in enumerate(faults):
            for q, pauli in fault:
                if pauli in ("X", "Y"):
                    fx[row, q] = 1
                if pauli in ("Z", "Y"):
                    fz[row, q] = 1
        flips = np.zeros((nf, total_meas), dtype=np.uint8)
        for pos in range(born + 1, len(instructions)):
            step = instructions[pos]
            qs = np.fromiter(step.qubits, dtype=np.int64)
            if step.op == "prepare":
                fx[:, qs] = 0
                fz[:, qs] = 0
            elif step.op == "hadamard":
                tmp = fx[:, qs].copy()
                fx[:, qs] = fz[:, qs]
                fz[:, qs] = tmp
            elif step.op == "cnot":
                controls, targets = qs[::2], qs[1::2]
                fx[:, targets] ^= fx[:, controls]
                fz[:, controls] ^= fz[:, targets]
            elif step.op == "measure":
                base = meas_base[pos]
                span = slice(base, base + len(qs))
                flips[:, span] ^= fz[:, qs] if step.basis == "X" else fx[:, qs]
                fx[:, qs] = 0
                fz[:, qs] = 0
        for row in range(nf):
            hit = np.flatnonzero(flips[row])
            if hit.size == 0:
                continue
            det_sig = np.bitwise_xor.reduce(meas_det[hit], axis=0)
            obs_sig = np.bitwise_xor.reduce(meas_obs[hit], axis=0)
            if not det_sig.any() and not obs_sig.any():
                continue
            key = (det_sig.tobytes(), obs_sig.tobytes())
            prior = merged.get(key)
            if prior is None:
                merged[key] = rate
            else:
                merged[key] = prior * (1.0 - rate) + rate * (1.0 - prior)

    mechanisms = []
    for (det_bytes, obs_bytes), p in merged.items():
        det_sig = np.frombuffer(det_bytes, dtype=np.uint64)
        obs_sig = np.frombuffer(obs_bytes, dtype=np.uint64)
        dets = tuple(int(i) for i in np.flatnonzero(unpack_rows(det_sig, circuit.detector_count)[0]))
        obs = tuple(int(i) for i in np.flatnonzero(unpack_rows(obs_sig, circuit.observable_count)[0]))
        mechanisms.append(Mechanism(probability=p, detectors=dets, observables=obs))
    mechanisms.sort(key=lambda m: (m.detectors, m.observables))
    return DetectorErrorModel(
        mechanisms=tuple(mechanisms),
        detector_count=circuit.detector_count,
        observable_count=circuit.observable_count,
    )


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample(dem: DetectorErrorModel, shots: int, seed: int) -> SampleBatch:
    """Draw independent shots; bit-identical for a given seed everywhere.

    Each mechanism owns a counter-based Philox stream keyed by
    (seed, mechanism index); position s of that stream decides whether
    the mechanism fires in shot s, so any (seed, shot, mechanism)
    triple maps to one fixed uniform variate.
    """
    if shots < 1:
        raise ValueError(f"need at least one shot, got {shots}")
    det_bits = np.zeros((shots, (dem.detector_count + 63) // 64), dtype=np.uint64)
    obs_bits = np.zeros((shots, (dem.observable_count + 63) // 64), dtype=np.uint64)
    for index, mech in enumerate(dem.mechanisms):
        rng = np.random.Generator(np.random.Philox(key=(int(seed) << 64) | index))
        active = np.flatnonzero(rng.random(shots) < mech.probability)
        if active.size == 0:
            continue
        for d in mech.detectors:
            det_bits[active, d >> 6] ^= np.uint64(1 << (d & 63))
        for o in mech.observables:
            obs_bits[active, o >> 6] ^= np.uint64(1 << (o & 63))
    return SampleBatch(
        shots=shots,
        detector_bits=det_bits,
        observable_bits=obs_bits,
        detector_count=dem.detector_count,
        observable_count=dem.observable_count,
        seed=seed,
    )


def detector_flip_probability(dem: DetectorErrorModel, detector: int) -> float:
    """Closed-form marginal flip rate: odd-parity chance over its mechanisms."""
    product = 1.0
    for mech in dem.mechanisms:
        if detector in mech.detectors:
            product *= 1.0 - 2.0 * mech.probability
    return 0.5 * (1.0 - product)


# ---------------------------------------------------------------------------
# logical failure accounting
# ---------------------------------------------------------------------------


def wilson_interval(failures: int, shots: int, z: float = _WILSON_Z) -> tuple[float, float]:
    """95% score interval for a binomial proportion."""
    if shots < 1:
        raise ValueError("empty sample")
    phat = failures / shots
    denom = 1.0 + z * z / shots
    center = (phat + z * z / (2 * shots)) / denom
    half = z * np.sqrt(phat * (1.0 - phat) / shots + z * z / (4.0 * shots * shots)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class BlockErrorReport:
    shots: int
    failures: int
    rate: float
    ci_low: float
    ci_high: float
    per_cycle_rate: float | None = None
    per_cycle_ci_low: float | None = None
    per_cycle_ci_high: float | None = None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def logical_block_error(
    batch: SampleBatch, corrections: np.ndarray, cycles: int | None = None
) -> BlockErrorReport:
    """Failure rate of corrections against the sampled observable flips.

    A shot fails when the predicted observable flips differ from the
    true ones anywhere. `corrections` uses the same packed layout as
    the batch's observable bits. With `cycles`, the block rate is also
    folded down to a per-cycle rate via 1 - (1 - p)^(1/cycles).
    """
    corrections = np.asarray(corrections, dtype=np.uint64)
    if corrections.shape != batch.observable_bits.shape:
        raise ValueError(
            f"corrections shaped {corrections.shape}, "
            f"expected {batch.observable_bits.shape}"
        )
    mismatch = (batch.observable_bits ^ corrections).any(axis=1)
    failures = int(mismatch.sum())
    rate = failures / batch.shots
    low, high = wilson_interval(failures, batch.shots)
    per_cycle = per_low = per_high = None
    if cycles is not None:
        fold = lambda p: 1.0 - (1.0 - p) ** (1.0 / cycles)
        per_cycle, per_low, per_high = fold(rate), fold(low), fold(high)
    return BlockErrorReport(
        shots=batch.shots,
        failures=failures,
        rate=rate,
        ci_low=low,
        ci_high=high,
        per_cycle_rate=per_cycle,
        per_cycle_ci_low=per_low,
        per_cycle_ci_high=per_high,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def dem_to_text(dem: DetectorErrorModel) -> str:
    """One mechanism per line: error(p) D<i>... L<j>...

    A leading comment records the detector and observable counts so
    models with trailing untouched indices survive the round trip.
    """
    lines = [f"# detectors {dem.detector_count} observables {dem.observable_count}"]
    for mech in dem.mechanisms:
        targets = [f"D{d}" for d in mech.detectors] + [f"L{o}" for o in mech.observables]
        lines.append(f"error({mech.probability!r}) " + " ".join(targets))
    return "\n".join(lines) + "\n"


_DEM_HEAD = re.compile(r"#\s*detectors\s+(\d+)\s+observables\s+(\d+)")
_DEM_LINE = re.compile(r"error\(([^)]+)\)((?:\s+[DL]\d+)*)\s*$")


def dem_from_text(text: str) -> DetectorErrorModel:
    """Inverse of dem_to_text; counts fall back to the largest index seen."""
    detector_count = observable_count = None
    mechanisms = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            head = _DEM_HEAD.match(line)
            if head:
                detector_count, observable_count = int(head.group(1)), int(head.group(2))
            continue
        match = _DEM_LINE.match(line)
        if match is None:
            raise ValueError(f"line {lineno}: not a mechanism line")
        dets = tuple(int(t[1:]) for t in match.group(2).split() if t.startswith("D"))
        obs = tuple(int(t[1:]) for t in match.group(2).split() if t.startswith("L"))
        mechanisms.append(
            Mechanism(probability=float(match.group(1)), detectors=dets, observables=obs)
        )
    if detector_count is None:
        detector_count = 1 + max((d for m in mechanisms for d in m.detectors), default=-1)
        observable_count = 1 + max((o for m in mechanisms for o in m.observables), default=-1)
    return DetectorErrorModel(
        mechanisms=tuple(mechanisms),
        detector_count=detector_count,
        observable_count=observable_count,
    )


def dem_hash(dem: DetectorErrorModel) -> str:
    """Stable content hash of the serialized model."""
    return hashlib.sha256(dem_to_text(dem).encode()).hexdigest()


def save_sample_batch(batch: SampleBatch, stem: str | Path, dem_digest: str | None = None) -> None:
    """Write packed detector/observable bit files plus a JSON sidecar.

    Produces <stem>.det.bits, <stem>.obs.bits, and <stem>.json. Rows are
    stored as little-endian 64-bit words, bit i of a row at word i // 64,
    position i % 64.
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    (stem.parent / (stem.name + ".det.bits")).write_bytes(batch.detector_bits.tobytes())
    (stem.parent / (stem.name + ".obs.bits")).write_bytes(batch.observable_bits.tobytes())
    sidecar = {
        "shots": batch.shots,
        "detector_count": batch.detector_count,
        "observable_count": batch.observable_count,
        "seed": batch.seed,
    }
    if dem_digest is not None:
        sidecar["dem_hash"] = dem_digest
    (stem.parent / (stem.name + ".json")).write_text(json.dumps(sidecar, indent=2) + "\n")


def load_sample_batch(stem: str | Path) -> SampleBatch:
    """Read a batch written by save_sample_batch."""
    stem = Path(stem)
    sidecar = json.loads((stem.parent / (stem.name + ".json")).read_text())
    shots = sidecar["shots"]
    det_words = (sidecar["detector_count"] + 63) // 64
    obs_words = (sidecar["observable_count"] + 63) // 64
    det = np.frombuffer(
        (stem.parent / (stem.name + ".det.bits")).read_bytes(), dtype=np.uint64
    ).reshape(shots, det_words)
    obs = np.frombuffer(
        (stem.parent / (stem.name + ".obs.bits")).read_bytes(), dtype=np.uint64
    ).reshape(shots, obs_words)
    return SampleBatch(
        shots=shots,
        detector_bits=det.copy(),
        observable_bits=obs.copy(),
        detector_count=sidecar["detector_count"],
        observable_count=sidecar["observable_count"],
        seed=sidecar["seed"],
    )
