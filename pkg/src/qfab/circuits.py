"""Noisy stabilizer-measurement circuits for memory and surgery experiments.

Circuits are flat instruction lists over integer qubit indices, with
detectors and logical observables expressed as parity sets over the
measurement record. CNOT scheduling uses an exact bipartite edge
coloring, so a full cycle needs only max-degree many layers per basis.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from qfab.codes import CssCode
from qfab.gf2 import BinaryMatrix

# channel name -> qubits consumed per application
_CHANNELS = {"depolarize1": 1, "depolarize2": 2}
_OPS = {"prepare", "hadamard", "cnot", "measure", "noise"}


@dataclass(frozen=True)
class Instruction:
    """One circuit step: a gate layer, a preparation, a measurement, or noise."""

    op: str
    qubits: tuple[int, ...]
    basis: str = ""
    channel: str = ""
    rate: float = 0.0


@dataclass(frozen=True)
class NoiseModel:
    """Circuit-level depolarizing noise at a single physical rate.

    Two-qubit depolarizing noise follows every CNOT layer (each of the
    15 nontrivial Pauli pairs with probability p/15), single-qubit
    depolarizing noise follows every preparation and precedes every
    measurement. Hadamards and resets are noiseless.
    """

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"physical rate must lie in [0, 1), got {self.p}")

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(0.0)


@dataclass(frozen=True)
class NoisyCircuit:
    """An instruction sequence plus detector and observable definitions.

    Detectors and observables are tuples of measurement-record indices
    (0-based, in measurement order); each set's parity is deterministic
    under zero noise.
    """

    instructions: tuple[Instruction, ...]
    detectors: tuple[tuple[int, ...], ...]
    observables: tuple[tuple[int, ...], ...]
    qubit_count: int

    def __post_init__(self):
        measured = 0
        for inst in self.instructions:
            if inst.op not in _OPS:
                raise ValueError(f"unknown instruction {inst.op!r}")
            for q in inst.qubits:
                if not 0 <= q < self.qubit_count:
                    raise ValueError(f"qubit {q} outside register of {self.qubit_count}")
            if inst.op in ("prepare", "measure") and inst.basis not in ("X", "Z"):
                raise ValueError(f"basis must be X or Z, got {inst.basis!r}")
            if inst.op == "cnot":
                if len(inst.qubits) % 2:
                    raise ValueError("cnot layer needs an even qubit list")
                if len(set(inst.qubits)) != len(inst.qubits):
                    raise ValueError("qubit repeated within one cnot layer")
            if inst.op == "noise":
                if inst.channel not in _CHANNELS:
                    raise ValueError(f"unknown channel {inst.channel!r}")
                if len(inst.qubits) % _CHANNELS[inst.channel]:
                    raise ValueError(f"{inst.channel} needs whole qubit groups")
                if not 0.0 < inst.rate < 1.0:
                    raise ValueError(f"noise rate must lie in (0, 1), got {inst.rate}")
            if inst.op == "measure":
                measured += len(inst.qubits)
        for kind, groups in (("detector", self.detectors), ("observable", self.observables)):
            for group in groups:
                if any(not 0 <= m < measured for m in group):
                    raise ValueError(f"{kind} references a measurement outside the record")
                if tuple(sorted(set(group))) != group:
                    raise ValueError(f"{kind} indices must be sorted and distinct")

    @property
    def measurement_count(self) -> int:
        return sum(len(i.qubits) for i in self.instructions if i.op == "measure")

    @property
    def detector_count(self) -> int:
        return len(self.detectors)

    @property
    def observable_count(self) -> int:
        return len(self.observables)

    def cnot_count(self) -> int:
        return sum(len(i.qubits) // 2 for i in self.instructions if i.op == "cnot")


# ---------------------------------------------------------------------------
# CNOT scheduling
# ---------------------------------------------------------------------------


def color_schedule(h: BinaryMatrix) -> list[list[tuple[int, int]]]:
    """Partition the Tanner-graph edges of h into max-degree many layers.

    Returns a proper edge coloring of the bipartite check/qubit graph
    as a list of layers of (check, qubit) pairs: no check or qubit
    appears twice within a layer, every edge appears exactly once, and
    the layer count equals the maximum vertex degree. Deterministic in
    the row-major edge order.
    """
    dense = h.to_dense().astype(bool)
    nchecks, nqubits = dense.shape
    degree = max(int(dense.sum(axis=1).max(initial=0)), int(dense.sum(axis=0).max(initial=0)))
    check_colors: list[dict[int, int]] = [{} for _ in range(nchecks)]
    qubit_colors: list[dict[int, int]] = [{} for _ in range(nqubits)]

    for u in range(nchecks):
        for v in np.flatnonzero(dense[u]):
            v = int(v)
            free_u = [c for c in range(degree) if c not in check_colors[u]]
            free_v = set(range(degree)) - qubit_colors[v].keys()
            common = [c for c in free_u if c in free_v]
            if common:
                color = common[0]
            else:
                a, b = free_u[0], min(free_v)
                # swap colors along the alternating a/b path out of u; the
                # path cannot reach v (it would tie two same-side vertices
                # with an even walk), so b frees up at u and stays free at v
                path = []
                node, on_check, color = u, True, b
                while True:
                    table = check_colors[node] if on_check else qubit_colors[node]
                    partner = table.get(color)
                    if partner is None:
                        break
                    path.append((node, partner, color) if on_check else (partner, node, color))
                    node, on_check = partner, not on_check
                    color = a if color == b else b
                for cu, cv, col in path:
                    del check_colors[cu][col]
                    del qubit_colors[cv][col]
                for cu, cv, col in path:
                    swapped = a if col == b else b
                    check_colors[cu][swapped] = cv
                    qubit_colors[cv][swapped] = cu
                color = b
            check_colors[u][color] = v
            qubit_colors[v][color] = u

    layers = []
    for color in range(degree):
        layer = [(i, check_colors[i][color]) for i in range(nchecks) if color in check_colors[i]]
        if layer:
            layers.append(layer)
    assert sum(len(layer) for layer in layers) == int(dense.sum())
    return layers


# ---------------------------------------------------------------------------
# circuit assembly
# ---------------------------------------------------------------------------


@dataclass
class _Builder:
    """Accumulates instructions and hands out measurement indices."""

    instructions: list[Instruction] = field(default_factory=list)
    measured: int = 0

    def prepare(self, basis: str, qubits) -> None:
        if len(qubits):
            self.instructions.append(Instruction("prepare", tuple(qubits), basis=basis))

    def hadamard(self, qubits) -> None:
        if len(qubits):
            self.instructions.append(Instruction("hadamard", tuple(qubits)))

    def cnot(self, flat_pairs) -> None:
        if len(flat_pairs):
            self.instructions.append(Instruction("cnot", tuple(flat_pairs)))

    def noise(self, channel: str, rate: float, qubits) -> None:
        if rate > 0.0 and len(qubits):
            self.instructions.append(
                Instruction("noise", tuple(qubits), channel=channel, rate=rate)
            )

    def measure(self, basis: str, qubits) -> np.ndarray:
        idx = np.arange(self.measured, self.measured + len(qubits))
        self.measured += len(qubits)
        self.instructions.append(Instruction("measure", tuple(qubits), basis=basis))
        return idx


def _absolute_layers(layers, anc_base: int, qubit_of, ancilla_controls: bool):
    """Map relative (check, qubit) layers onto flat CNOT qubit tuples."""
    out = []
    for layer in layers:
        flat = []
        for check, qubit in layer:
            anc = anc_base + check
            data = qubit_of(qubit)
            flat.extend((anc, data) if ancilla_controls else (data, anc))
        out.append(tuple(flat))
    return out


def _emit_cycle(builder, noise, x_layers, z_layers, x_anc, z_anc):
    """One full measurement cycle; returns (X-outcome, Z-outcome) indices."""
    p = noise.p
    builder.prepare("Z", x_anc)
    builder.hadamard(x_anc)
    builder.noise("depolarize1", p, x_anc)
    for flat in x_layers:
        builder.cnot(flat)
        builder.noise("depolarize2", p, flat)
    builder.prepare("Z", z_anc)
    builder.noise("depolarize1", p, z_anc)
    for flat in z_layers:
        builder.cnot(flat)
        builder.noise("depolarize2", p, flat)
    builder.noise("depolarize1", p, tuple(x_anc) + tuple(z_anc))
    mx = builder.measure("X", x_anc)
    mz = builder.measure("Z", z_anc)
    return mx, mz


def _row_supports(h: BinaryMatrix) -> list[np.ndarray]:
    dense = h.to_dense()
    return [np.flatnonzero(dense[i]) for i in range(dense.shape[0])]


def syndrome_cycle(code: CssCode, noise: NoiseModel) -> NoisyCircuit:
    """One stabilizer measurement cycle of the code, as a standalone circuit.

    X-type ancillas are prepared in the plus state through a Hadamard,
    coupled to their data qubits with the ancilla as control, then
    Z-type ancillas are prepared and coupled with the data as control;
    all ancillas are measured at the end. Useful on its own for gate
    counting; experiments repeat this block with detectors attached.
    """
    n = code.n
    x_anc = np.arange(n, n + code.mx)
    z_anc = np.arange(n + code.mx, n + code.mx + code.mz)
    x_layers = _absolute_layers(color_schedule(code.hx), n, lambda q: q, True)
    z_layers = _absolute_layers(color_schedule(code.hz), n + code.mx, lambda q: q, False)
    builder = _Builder()
    _emit_cycle(builder, noise, x_layers, z_layers, x_anc, z_anc)
    return NoisyCircuit(
        instructions=tuple(builder.instructions),
        detectors=(),
        observables=(),
        qubit_count=n + code.mx + code.mz,
    )


def memory_experiment(code: CssCode, cycles: int, noise: NoiseModel) -> NoisyCircuit:
    """Idling experiment: plus-state preparation, repeated cycles, readout.

    All data qubits are prepared and finally measured in the X basis.
    Detectors are the first-cycle raw X syndromes, the cycle-to-cycle
    X-syndrome differences, and a final layer comparing X-stabilizer
    values reconstructed from the data readout against the last cycle.
    The observables are the code's logical X operators.
    """
    if cycles < 1:
        raise ValueError(f"need at least one cycle, got {cycles}")
    n = code.n
    data = np.arange(n)
    x_anc = np.arange(n, n + code.mx)
    z_anc = np.arange(n + code.mx, n + code.mx + code.mz)
    x_layers = _absolute_layers(color_schedule(code.hx), n, lambda q: q, True)
    z_layers = _absolute_layers(color_schedule(code.hz), n + code.mx, lambda q: q, False)
    x_supports = _row_supports(code.hx)

    builder = _Builder()
    builder.prepare("X", data)
    builder.noise("depolarize1", noise.p, data)
    cycle_x = []
    for _ in range(cycles):
        mx, _ = _emit_cycle(builder, noise, x_layers, z_layers, x_anc, z_anc)
        cycle_x.append(mx)
    builder.noise("depolarize1", noise.p, data)
    final = builder.measure("X", data)

    detectors = [(int(m),) for m in cycle_x[0]]
    for prev, cur in zip(cycle_x, cycle_x[1:]):
        detectors.extend((int(a), int(b)) for a, b in zip(prev, cur))
    for row, support in enumerate(x_supports):
        group = {int(cycle_x[-1][row])} | {int(final[q]) for q in support}
        detectors.append(tuple(sorted(group)))

    lx, _ = code.logicals()
    observables = [
        tuple(int(final[q]) for q in support) for support in _row_supports(lx)
    ]
    return NoisyCircuit(
        instructions=tuple(builder.instructions),
        detectors=tuple(detectors),
        observables=tuple(observables),
        qubit_count=n + code.mx + code.mz,
    )


def surgery_experiment(gadget, basis: str, cycles: int | None, noise: NoiseModel) -> NoisyCircuit:
    """Logical-measurement experiment on a merged data/ancilla system.

    The ancilla-system qubits are prepared and finally measured in the
    Z basis; the data qubits in `basis`. The merged code's checks are
    measured for `cycles` rounds (the gadget's own surgery duration
    when None). The X-basis run defines k+t observables: the data
    code's logical X operators from the final readout, then the target
    operator outcomes extracted from first-round merged-check parities.
    The Z-basis run defines the k-t logical Z operators that commute
    with every target. Detectors follow the idling convention, built
    from the basis-matched merged checks.
    """
    if basis not in ("X", "Z"):
        raise ValueError(f"basis must be X or Z, got {basis!r}")
    if getattr(gadget, "target_type", "X") != "X":
        raise ValueError("experiment bases assume X-type target operators")
    code = gadget.data_code
    if cycles is None:
        cycles = gadget.surgery_cycles
    if cycles < 1:
        raise ValueError(f"need at least one cycle, got {cycles}")
    n = code.n
    n_anc = gadget.ancilla_qubits
    width = n + n_anc
    merged_hx, merged_hz = gadget.merged_hx, gadget.merged_hz
    mx_all, mz_all = merged_hx.nrows, merged_hz.nrows
    data = np.arange(n)
    system = np.arange(width)
    x_anc = np.arange(width, width + mx_all)
    z_anc = np.arange(width + mx_all, width + mx_all + mz_all)
    x_layers = _absolute_layers(color_schedule(merged_hx), width, lambda q: q, True)
    z_layers = _absolute_layers(color_schedule(merged_hz), width + mx_all, lambda q: q, False)

    builder = _Builder()
    if basis == "X":
        builder.prepare("X", data)
        builder.prepare("Z", system[n:])
    else:
        builder.prepare("Z", system)
    builder.noise("depolarize1", noise.p, system)
    cycle_x, cycle_z = [], []
    for _ in range(cycles):
        mx, mz = _emit_cycle(builder, noise, x_layers, z_layers, x_anc, z_anc)
        cycle_x.append(mx)
        cycle_z.append(mz)
    builder.noise("depolarize1", noise.p, system)
    if basis == "X":
        final_data = builder.measure("X", data)
        final_anc = builder.measure("Z", system[n:])
    else:
        final_all = builder.measure("Z", system)
        final_data, final_anc = final_all[:n], final_all[n:]

    detectors = []
    observables = []
    if basis == "X":
        # only the data-supported X-checks start out deterministic
        x_supports = _row_supports(code.hx)
        detectors.extend((int(cycle_x[0][row]),) for row in range(code.mx))
        for prev, cur in zip(cycle_x, cycle_x[1:]):
            detectors.extend((int(a), int(b)) for a, b in zip(prev, cur))
        for row, support in enumerate(x_supports):
            group = {int(cycle_x[-1][row])} | {int(final_data[q]) for q in support}
            detectors.append(tuple(sorted(group)))
        lx, _ = code.logicals()
        observables.extend(
            tuple(int(final_data[q]) for q in support) for support in _row_supports(lx)
        )
        # target outcomes: first-round parities over the new X-check block
        for select in _row_supports(gadget.vertex_kernel):
            group = sorted(int(cycle_x[0][code.mx + j]) for j in select)
            observables.append(tuple(group))
    else:
        mz_supports = _row_supports(merged_hz)
        detectors.extend((int(m),) for m in cycle_z[0])
        for prev, cur in zip(cycle_z, cycle_z[1:]):
            detectors.extend((int(a), int(b)) for a, b in zip(prev, cur))
        full_final = np.concatenate([final_data, final_anc])
        for row, support in enumerate(mz_supports):
            group = {int(cycle_z[-1][row])} | {int(full_final[q]) for q in support}
            detectors.append(tuple(sorted(group)))
        # support-avoiding representatives stay fixed through every round
        spans = gadget.preserved_logicals
        observables.extend(
            tuple(int(full_final[q]) for q in support) for support in _row_supports(spans)
        )

    return NoisyCircuit(
        instructions=tuple(builder.instructions),
        detectors=tuple(detectors),
        observables=tuple(observables),
        qubit_count=width + mx_all + mz_all,
    )


# ---------------------------------------------------------------------------
# text serialization
# ---------------------------------------------------------------------------


def serialize_circuit(circuit: NoisyCircuit) -> str:
    """Render a circuit in the line-oriented text format.

    Grammar, one entry per line:

        QUBITS <count>
        PREPARE <X|Z> <q>...
        H <q>...
        CNOT <control> <target>...
        DEPOLARIZE1(<rate>) <q>...
        DEPOLARIZE2(<rate>) <q>...
        MEASURE <X|Z> <q>...
        DETECTOR rec[-<j>]...
        OBSERVABLE rec[-<j>]...

    Record targets are offsets from the end of the measurement record:
    rec[-1] is the last outcome. Parsing the output reproduces the
    circuit bit-exactly.
    """
    total = circuit.measurement_count
    lines = [f"QUBITS {circuit.qubit_count}"]
    for inst in circuit.instructions:
        qubits = " ".join(str(q) for q in inst.qubits)
        if inst.op == "prepare":
            lines.append(f"PREPARE {inst.basis} {qubits}")
        elif inst.op == "hadamard":
            lines.append(f"H {qubits}")
        elif inst.op == "cnot":
            lines.append(f"CNOT {qubits}")
        elif inst.op == "measure":
            lines.append(f"MEASURE {inst.basis} {qubits}")
        else:
            lines.append(f"{inst.channel.upper()}({inst.rate!r}) {qubits}")
    for label, groups in (("DETECTOR", circuit.detectors), ("OBSERVABLE", circuit.observables)):
        for group in groups:
            recs = " ".join(f"rec[-{total - m}]" for m in group)
            lines.append(f"{label} {recs}")
    return "\n".join(lines) + "\n"


_REC = re.compile(r"rec\[-(\d+)\]")
_NOISE_HEAD = re.compile(r"(DEPOLARIZE[12])\(([^)]+)\)")


def parse_circuit(text: str) -> NoisyCircuit:
    """Inverse of serialize_circuit; rejects malformed lines."""
    qubit_count = None
    instructions: list[Instruction] = []
    raw_groups: list[tuple[str, list[int]]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        head, *rest = line.split()
        if head == "QUBITS":
            qubit_count = int(rest[0])
        elif head == "PREPARE":
            instructions.append(Instruction("prepare", tuple(map(int, rest[1:])), basis=rest[0]))
        elif head == "H":
            instructions.append(Instruction("hadamard", tuple(map(int, rest))))
        elif head == "CNOT":
            instructions.append(Instruction("cnot", tuple(map(int, rest))))
        elif head == "MEASURE":
            instructions.append(Instruction("measure", tuple(map(int, rest[1:])), basis=rest[0]))
        elif head in ("DETECTOR", "OBSERVABLE"):
            offsets = _REC.findall(line)
            if len(offsets) != len(rest):
                raise ValueError(f"line {lineno}: malformed record target")
            raw_groups.append((head, [int(o) for o in offsets]))
        else:
            match = _NOISE_HEAD.fullmatch(head)
            if match is None:
                raise ValueError(f"line {lineno}: unrecognized instruction {head!r}")
            instructions.append(
                Instruction(
                    "noise",
                    tuple(map(int, rest)),
                    channel=match.group(1).lower(),
                    rate=float(match.group(2)),
                )
            )
    if qubit_count is None:
        raise ValueError("missing QUBITS header")
    total = sum(len(i.qubits) for i in instructions if i.op == "measure")
    detectors, observables = [], []
    for label, offsets in raw_groups:
        group = tuple(sorted(total - o for o in offsets))
        (detectors if label == "DETECTOR" else observables).append(group)
    return NoisyCircuit(
        instructions=tuple(instructions),
        detectors=tuple(detectors),
        observables=tuple(observables),
        qubit_count=qubit_count,
    )
