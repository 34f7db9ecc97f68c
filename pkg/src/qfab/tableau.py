"""Dense stabilizer-tableau simulation, used as an independent oracle.

This is a straightforward binary-tableau simulator: destabilizer and
stabilizer rows with sign tracking, measurements by row reduction. It
shares no propagation machinery with the detector-error-model compiler,
which is the point: fault signatures can be cross-checked by inserting
a Pauli into an otherwise noiseless whole-circuit run.
"""

from __future__ import annotations

import numpy as np

from qfab.circuits import NoisyCircuit


class StabilizerSimulator:
    """Tableau over n qubits, initialized to the all-zeros state."""

    def __init__(self, num_qubits: int, rng: np.random.Generator | None = None):
        n = num_qubits
        self.n = n
        self.rng = rng if rng is not None else np.random.default_rng(0)
        # rows 0..n-1 destabilizers, rows n..2n-1 stabilizers
        self.x = np.zeros((2 * n, n), dtype=np.uint8)
        self.z = np.zeros((2 * n, n), dtype=np.uint8)
        self.r = np.zeros(2 * n, dtype=np.uint8)
        self.x[np.arange(n), np.arange(n)] = 1
        self.z[np.arange(n, 2 * n), np.arange(n)] = 1

    def hadamard(self, q: int) -> None:
        self.r ^= self.x[:, q] & self.z[:, q]
        self.x[:, q], self.z[:, q] = self.z[:, q].copy(), self.x[:, q].copy()

    def cnot(self, control: int, target: int) -> None:
        c, t = control, target
        self.r ^= self.x[:, c] & self.z[:, t] & (self.x[:, t] ^ self.z[:, c] ^ 1)
        self.x[:, t] ^= self.x[:, c]
        self.z[:, c] ^= self.z[:, t]

    def pauli(self, q: int, kind: str) -> None:
        """Conjugate the frame by a Pauli: flips signs of anticommuting rows."""
        if kind == "X":
            self.r ^= self.z[:, q]
        elif kind == "Z":
            self.r ^= self.x[:, q]
        elif kind == "Y":
            self.r ^= self.x[:, q] ^ self.z[:, q]
        else:
            raise ValueError(f"unknown Pauli {kind!r}")

    def _phase_exponents(self, xi, zi, xh, zh) -> int:
        # sum over columns of the i-exponent from multiplying row i into row h
        g = np.zeros(self.n, dtype=np.int64)
        y1 = (xi == 1) & (zi == 1)
        x1 = (xi == 1) & (zi == 0)
        z1 = (xi == 0) & (zi == 1)
        g[y1] = zh[y1].astype(np.int64) - xh[y1]
        g[x1] = zh[x1] * (2 * xh[x1].astype(np.int64) - 1)
        g[z1] = xh[z1] * (1 - 2 * zh[z1].astype(np.int64))
        return int(g.sum())

    def _rowsum_into(self, xh, zh, rh, i) -> tuple[np.ndarray, np.ndarray, int]:
        total = 2 * int(rh) + 2 * int(self.r[i]) + self._phase_exponents(
            self.x[i], self.z[i], xh, zh
        )
        assert total % 2 == 0
        return xh ^ self.x[i], zh ^ self.z[i], (total % 4) // 2

    def _rowsum(self, h: int, i: int) -> None:
        self.x[h], self.z[h], self.r[h] = self._rowsum_into(
            self.x[h], self.z[h], self.r[h], i
        )

    def measure_z(self, q: int) -> int:
        n = self.n
        anticommuting = np.flatnonzero(self.x[n:, q]) + n
        if anticommuting.size:
            p = int(anticommuting[0])
            for i in range(2 * n):
                if i != p and self.x[i, q]:
                    self._rowsum(i, p)
            self.x[p - n] = self.x[p]
            self.z[p - n] = self.z[p]
            self.r[p - n] = self.r[p]
            outcome = int(self.rng.integers(0, 2))
            self.x[p] = 0
            self.z[p] = 0
            self.z[p, q] = 1
            self.r[p] = outcome
            return outcome
        xh = np.zeros(n, dtype=np.uint8)
        zh = np.zeros(n, dtype=np.uint8)
        rh = 0
        for i in range(n):
            if self.x[i, q]:
                xh, zh, rh = self._rowsum_into(xh, zh, rh, i + n)
        return int(rh)

    def measure(self, q: int, basis: str) -> int:
        if basis == "Z":
            return self.measure_z(q)
        self.hadamard(q)
        outcome = self.measure_z(q)
        self.hadamard(q)
        return outcome

    def prepare(self, q: int, basis: str) -> None:
        if self.measure_z(q):
            self.pauli(q, "X")
        if basis == "X":
            self.hadamard(q)


def run_circuit(
    circuit: NoisyCircuit,
    seed: int = 0,
    faults: tuple[tuple[int, int, str], ...] = (),
) -> np.ndarray:
    """Execute a circuit, returning the measurement record as a bit vector.

    Noise instructions are skipped; `faults` is a list of
    (instruction index, qubit, pauli) triples inserted immediately
    after the named instruction executes. The seed fixes the coin
    sequence for non-deterministic measurements, and because Pauli
    insertions never change which measurements are deterministic, two
    runs with the same seed and different faults consume coins in the
    same order; their record difference isolates the fault signature.
    """
    by_position: dict[int, list[tuple[int, str]]] = {}
    for pos, qubit, kind in faults:
        by_position.setdefault(pos, []).append((qubit, kind))
    sim = StabilizerSimulator(circuit.qubit_count, rng=np.random.default_rng(seed))
    record: list[int] = []
    for pos, inst in enumerate(circuit.instructions):
        if inst.op == "prepare":
            for q in inst.qubits:
                sim.prepare(q, inst.basis)
        elif inst.op == "hadamard":
            for q in inst.qubits:
                sim.hadamard(q)
        elif inst.op == "cnot":
            pairs = inst.qubits
            for c, t in zip(pairs[::2], pairs[1::2]):
                sim.cnot(c, t)
        elif inst.op == "measure":
            for q in inst.qubits:
                record.append(sim.measure(q, inst.basis))
        for qubit, kind in by_position.get(pos, ()):
            sim.pauli(qubit, kind)
    return np.array(record, dtype=np.uint8)


def record_parities(circuit: NoisyCircuit, record: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Detector and observable parities of one measurement record."""
    det = np.array(
        [int(record[list(group)].sum() % 2) for group in circuit.detectors],
        dtype=np.uint8,
    )
    obs = np.array(
        [int(record[list(group)].sum() % 2) for group in circuit.observables],
        dtype=np.uint8,
    )
    return det, obs
