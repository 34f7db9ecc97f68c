"""Cost model for the layered architecture: fits, factories, and runtimes.

Space accounting sums the qubit footprints of the four hardware zones
(memory, processor, magic-state resource, surgery operation zone).  Time
accounting reduces a circuit to its Toffoli count and charges each Toffoli
the amortized surgery time of the subroutine mix it came from.  Surgery
time is kept as an exact :class:`fractions.Fraction` of code cycles and
only rounded when a final cycle count is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import tomli

from .codes import CssCode, build_surface, footprint, get_code

SECONDS_PER_DAY = 86_400.0

ADDER_VARIANTS = ("plain", "controlled", "in-processor")
LOOKUP_REGIMES = ("fits", "balanced", "space-efficient")


# ---------------------------------------------------------------------------
# Power-law fits


@dataclass(frozen=True)
class FitResult:
    """Power-law model ``rate = prefactor * p ** exponent``."""

    prefactor: float
    exponent: float
    form: str  # "free" or "constrained"
    covariance: np.ndarray | None
    points: tuple[tuple[float, float], ...]
    warning: str | None = None

    def evaluate(self, p: float) -> float:
        return self.prefactor * p ** self.exponent


def fit_power_law(points: Iterable[tuple[float, float]], distance: int) -> FitResult:
    """Fit ``rate = a * p**b`` to (physical rate, logical rate) samples.

    The free fit is a log-log least squares over the three smallest
    physical rates.  A fitted exponent above ``distance / 2`` is treated as
    over-steep and replaced by the conservative constrained form
    ``a * p**(distance/2)`` anchored at the smallest-rate point; the same
    anchored form (plus a warning) is used when fewer than three usable
    points are supplied.
    """
    ordered = sorted((float(p), float(y)) for p, y in points)
    usable = [
        (p, y)
        for p, y in ordered
        if p > 0 and y > 0 and math.isfinite(p) and math.isfinite(y)
    ]
    if not usable:
        raise ValueError("no usable points: need positive finite rates")

    cap = distance / 2.0

    def constrained(warning: str | None) -> FitResult:
        p0, y0 = usable[0]
        return FitResult(
            prefactor=y0 / p0**cap,
            exponent=cap,
            form="constrained",
            covariance=None,
            points=tuple(usable),
            warning=warning,
        )

    if len(usable) < 3:
        return constrained("fewer than three usable points; anchored at the smallest rate")

    window = usable[:3]
    log_p = np.log([p for p, _ in window])
    log_y = np.log([y for _, y in window])
    design = np.column_stack([np.ones_like(log_p), log_p])
    coeffs, residual, _, _ = np.linalg.lstsq(design, log_y, rcond=None)
    intercept, slope = coeffs
    if slope > cap:
        return constrained(None)

    dof = len(window) - 2
    if residual.size and dof > 0:
        scale = float(residual[0]) / dof
        covariance = scale * np.linalg.inv(design.T @ design)
    else:
        covariance = np.zeros((2, 2))
    return FitResult(
        prefactor=float(math.exp(intercept)),
        exponent=float(slope),
        form="free",
        covariance=covariance,
        points=tuple(window),
    )


def toffoli_budget(logical_rate_per_cycle: float, toffoli_cycles: float) -> int:
    """Largest Toffoli count keeping total success probability at 90 percent.

    ``toffoli_cycles`` is the duration of one Toffoli in code cycles;
    ``logical_rate_per_cycle`` is the failure probability per cycle.
    """
    if not 0.0 < logical_rate_per_cycle < 1.0:
        raise ValueError(f"rate must lie in (0, 1), got {logical_rate_per_cycle}")
    if toffoli_cycles <= 0:
        raise ValueError(f"toffoli_cycles must be positive, got {toffoli_cycles}")
    return math.floor(
        math.log(0.9) / (toffoli_cycles * math.log1p(-logical_rate_per_cycle))
    )


# ---------------------------------------------------------------------------
# Subroutine timings (units of the surgery time tau_s)


def adder_time(bits: int, processor_logicals: int, variant: str) -> int:
    """Duration of one ripple-carry addition, in units of the surgery time.

    The streamed variants split the adder into computation units of
    ``floor((k_p - 1)/3)`` Toffolis each, holding input, output, and carry
    qubits in the processor with an amortized I/O of 2.5 qubits per
    Toffoli; the unit structure cancels out of the totals.  The
    in-processor variant teleports both operand registers once and needs
    ``3 * bits`` processor logicals.
    """
    if bits < 1:
        raise ValueError(f"bits must be positive, got {bits}")
    if variant == "in-processor":
        if 3 * bits > processor_logicals:
            raise ValueError(
                f"in-processor addition needs 3*{bits} = {3 * bits} logicals, "
                f"processor holds {processor_logicals}"
            )
        return 13 * bits
    if variant not in ("plain", "controlled"):
        raise ValueError(f"unknown adder variant {variant!r}; expected one of {ADDER_VARIANTS}")
    # Streamed units need floor((k_p - 1)/3) >= 1 processor triples.
    if processor_logicals < 4:
        raise ValueError(
            f"streamed addition needs at least 4 processor logicals, got {processor_logicals}"
        )
    return (25 if variant == "plain" else 30) * bits


def adder_toffolis(bits: int, variant: str) -> int:
    """Toffoli count of one addition (the controlled form doubles it)."""
    if variant == "controlled":
        return 2 * bits
    if variant in ("plain", "in-processor"):
        return bits
    raise ValueError(f"unknown adder variant {variant!r}; expected one of {ADDER_VARIANTS}")


@dataclass(frozen=True)
class LookupCost:
    """Timing of one table lookup under a given processor-residency regime."""

    regime: str
    total: int  # units of tau_s, exact piecewise formula
    toffolis: int  # Toffoli count of the compiled circuit
    per_toffoli_approx: float  # large-table approximation per table row


def choose_lookup_regime(address_bits: int, word_bits: int, processor_logicals: int) -> str:
    """Most capable regime whose residency precondition holds."""
    if 2 * address_bits + word_bits <= processor_logicals:
        return "fits"
    if 2 * address_bits < processor_logicals:
        return "balanced"
    if processor_logicals >= 4:
        return "space-efficient"
    raise ValueError(
        f"no lookup regime admits {processor_logicals} processor logicals (need >= 4)"
    )


def lookup_time(
    address_bits: int, word_bits: int, processor_logicals: int, regime: str
) -> LookupCost:
    """Duration of one unary-iteration table lookup, in surgery-time units.

    A lookup touches ``2*address_bits + word_bits`` logicals, issuing one
    Toffoli and one mid-circuit measurement per table row.  When the full
    working set fits in the processor only the I/O term varies; otherwise
    the word register is streamed through whatever processor space the
    address qubits leave free, repeating the row iteration per slice.  The
    reported approximation drops I/O terms that vanish for large tables
    and is quoted per row of the original (unsliced) circuit.
    """
    qa, qw, kp = address_bits, word_bits, processor_logicals
    if qa < 1 or qw < 1:
        raise ValueError(f"address and word sizes must be positive, got {qa}, {qw}")
    rows = 1 << qa
    if regime == "fits":
        if 2 * qa + qw > kp:
            raise ValueError(
                f"lookup of {2 * qa + qw} logicals exceeds the {kp}-logical processor; "
                f"use the {choose_lookup_regime(qa, qw, kp)!r} regime"
            )
        # Four PPMs per resident qubit, four per Toffoli, one per measurement.
        total = 4 * (2 * qa + qw) + 4 * rows + rows
        return LookupCost("fits", total, rows, 4 * qw / rows + 5)
    if regime == "balanced":
        if 2 * qa >= kp:
            raise ValueError(
                f"balanced lookups need 2*{qa} = {2 * qa} < {kp} processor logicals; "
                f"use the {choose_lookup_regime(qa, qw, kp)!r} regime"
            )
        slot = kp - 2 * qa
        slices = -(-qw // slot)
        total = slices * (2 * slot + 4 * rows + rows)
        return LookupCost("balanced", total, slices * rows, 5 * qw / slot)
    if regime == "space-efficient":
        if kp < 4:
            raise ValueError(
                f"space-efficient lookups need at least 4 processor logicals, got {kp}"
            )
        # Three resident address qubits; half the row operations touch the
        # memory, at <= 2 I/O qubits per Toffoli or measurement and <= 1
        # per CNOT, alongside the streamed word slices.
        slices_time = -(-qw // (kp - 1))
        total = slices_time * (2 * (kp - 1) + 4 * (2 + 2 + 1) * rows // 2 + 4 * rows + rows)
        toffolis = -(-qw // (kp - 3)) * rows
        return LookupCost("space-efficient", total, toffolis, 15 * qw / (kp - 3))
    raise ValueError(f"unknown lookup regime {regime!r}; expected one of {LOOKUP_REGIMES}")


# ---------------------------------------------------------------------------
# Profiles and architectures


@dataclass(frozen=True)
class Subroutine:
    """One component of a circuit's Toffoli mix."""

    kind: str  # "adder" | "ctrl-adder" | "lookup"
    fraction: float
    bits: int = 0  # adder operand size
    address_bits: int = 0  # lookup address size
    word_bits: int = 0  # lookup word size

    def __post_init__(self):
        if self.kind not in ("adder", "ctrl-adder", "lookup"):
            raise ValueError(f"unknown subroutine kind {self.kind!r}")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"fraction must lie in (0, 1], got {self.fraction}")
        if self.kind == "lookup":
            if self.address_bits < 1 or self.word_bits < 1:
                raise ValueError("lookup subroutines need address_bits and word_bits")
        elif self.bits < 1:
            raise ValueError("adder subroutines need a positive bit width")


@dataclass(frozen=True)
class CircuitProfile:
    """Logical-level summary of an algorithm run: size and Toffoli mix."""

    name: str
    logical_qubits: int
    toffoli_count: float
    subroutines: tuple[Subroutine, ...]
    reference_tau_toff: Mapping[str, float] = field(default_factory=dict)
    parallelism: int | None = None
    injection_batches: int = 1
    source: str = ""
    toffoli_provenance: str = ""

    def __post_init__(self):
        total = sum(s.fraction for s in self.subroutines)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"subroutine fractions sum to {total}, expected 1")

    def adder_bits(self) -> int:
        """Largest adder operand in the mix (used by the parallel model)."""
        sizes = [s.bits for s in self.subroutines if s.kind in ("adder", "ctrl-adder")]
        if not sizes:
            raise ValueError(f"profile {self.name!r} contains no adders")
        return max(sizes)


@dataclass(frozen=True)
class FactoryModel:
    """Distillation factory turning cultivated T states into CCZ states."""

    t_error_rate: float
    cultivation_cycles: int
    surface_distance: int
    ccz_per_round: int
    injection_batches: int = 1
    code_name: str = "bb18"

    def __post_init__(self):
        if not 0.0 < self.t_error_rate < 0.5:
            raise ValueError(
                f"t_error_rate must lie in (0, 0.5), got {self.t_error_rate}"
            )


@dataclass(frozen=True)
class FactoryReport:
    ccz_error_rate: float
    cycles_total: int
    cycles_per_state: float
    qubits: int

    def as_dict(self) -> dict:
        return {
            "ccz_error_rate": self.ccz_error_rate,
            "cycles_total": self.cycles_total,
            "cycles_per_state": self.cycles_per_state,
            "qubits": self.qubits,
        }


def factory_report(f: FactoryModel) -> FactoryReport:
    """Error rate, duration, and size of one distillation round."""
    ccz_error = 28.0 * (2.0 * f.t_error_rate) ** 2
    # Each of the eight rounds waits for cultivation plus two surgery
    # steps on the surface patches; the surgery step is rounded before use.
    cultivation_surgery = round(Fraction(2 * f.surface_distance, 3))
    cycles = 8 * (f.cultivation_cycles + 2 * cultivation_surgery) * f.injection_batches
    block = footprint(get_code(f.code_name)).total
    surface = footprint(build_surface(f.surface_distance)).total
    qubits = 5 * block + f.ccz_per_round * surface
    return FactoryReport(
        ccz_error_rate=ccz_error,
        cycles_total=cycles,
        cycles_per_state=cycles / f.ccz_per_round,
        qubits=qubits,
    )


@dataclass(frozen=True)
class ArchitectureSpec:
    """One storage/processing layout with its factory and surgery ancillas."""

    name: str
    memory_name: str
    processor_name: str
    factory: FactoryModel
    cycle_time_s: float
    # (data qubits, X-checks) of the reference surgery system per zone.
    operation_gadgets: tuple[tuple[int, int], ...]
    memory_options: tuple[str, ...] = ()

    @property
    def memory(self) -> CssCode:
        return get_code(self.memory_name)

    @property
    def processor(self) -> CssCode:
        return get_code(self.processor_name)

    @property
    def processor_distance(self) -> int:
        return int(self.processor.metadata["distance_upper"])

    @property
    def surgery_cycles(self) -> Fraction:
        """Duration of one surgery operation, exact in code cycles."""
        return Fraction(2 * self.processor_distance, 3)


@dataclass(frozen=True)
class SpaceReport:
    memory: int
    processor: int
    resource: int
    operation: int

    @property
    def total(self) -> int:
        return self.memory + self.processor + self.resource + self.operation

    def as_dict(self) -> dict:
        return {
            "memory": self.memory,
            "processor": self.processor,
            "resource": self.resource,
            "operation": self.operation,
            "total": self.total,
        }


def space_report(arch: ArchitectureSpec) -> SpaceReport:
    """Physical qubits per zone; ancillas counted in one basis only."""
    return SpaceReport(
        memory=footprint(arch.memory).total,
        processor=footprint(arch.processor).total,
        resource=factory_report(arch.factory).qubits,
        operation=sum(qubits + x_checks for qubits, x_checks in arch.operation_gadgets),
    )


@dataclass(frozen=True)
class ToffoliTime:
    """Amortized per-Toffoli duration in units of the surgery time."""

    tau_s_units: float
    components: tuple[tuple[str, float, float], ...]  # (label, fraction, per-Toffoli)

    @property
    def rounded(self) -> int:
        return round(self.tau_s_units)


def amortized_toffoli_time(profile: CircuitProfile, arch: ArchitectureSpec) -> ToffoliTime:
    """Fraction-weighted per-Toffoli time of the profile's subroutine mix.

    Adders run in-processor when all three registers fit, otherwise as
    streamed computation units; lookups pick the most capable residency
    regime the processor admits.
    """
    kp = arch.processor.k
    parts: list[tuple[str, float, float]] = []
    for sub in profile.subroutines:
        if sub.kind == "adder":
            if 3 * sub.bits <= kp:
                variant = "in-processor"
            else:
                variant = "plain"
            per = adder_time(sub.bits, kp, variant) / adder_toffolis(sub.bits, variant)
            label = f"adder[{sub.bits}b,{variant}]"
        elif sub.kind == "ctrl-adder":
            per = adder_time(sub.bits, kp, "controlled") / adder_toffolis(sub.bits, "controlled")
            label = f"ctrl-adder[{sub.bits}b]"
        elif sub.kind == "lookup":
            regime = choose_lookup_regime(sub.address_bits, sub.word_bits, kp)
            per = lookup_time(sub.address_bits, sub.word_bits, kp, regime).per_toffoli_approx
            label = f"lookup[{sub.address_bits}a/{sub.word_bits}w,{regime}]"
        else:  # pragma: no cover - Subroutine validates kinds
            raise ValueError(f"unknown subroutine kind {sub.kind!r}")
        parts.append((label, sub.fraction, per))
    value = sum(fraction * per for _, fraction, per in parts)
    return ToffoliTime(tau_s_units=value, components=tuple(parts))


def tau_toff_report(profile: CircuitProfile, arch: ArchitectureSpec) -> dict:
    """Per-Toffoli timing with a discrepancy flag against published values."""
    timing = amortized_toffoli_time(profile, arch)
    report = {
        "tau_s_units": timing.tau_s_units,
        "rounded": timing.rounded,
        "components": [
            {"label": label, "fraction": fraction, "per_toffoli": per}
            for label, fraction, per in timing.components
        ],
    }
    reference = profile.reference_tau_toff.get(arch.name)
    report["reference"] = reference
    report["discrepancy"] = None
    if reference is not None and timing.rounded != reference:
        report["discrepancy"] = (
            f"component sum gives {timing.rounded} tau_s but the published "
            f"headline is {reference} tau_s; the components themselves match "
            "the published per-subroutine values"
        )
    return report


def runtime_days(profile: CircuitProfile, arch: ArchitectureSpec) -> float:
    """Wall-clock days to run the profile's Toffoli count serially."""
    timing = amortized_toffoli_time(profile, arch)
    cycles_per_toffoli = timing.rounded * arch.surgery_cycles
    seconds = profile.toffoli_count * float(cycles_per_toffoli) * arch.cycle_time_s
    return seconds / SECONDS_PER_DAY


def check_memory_capacity(profile: CircuitProfile, arch: ArchitectureSpec) -> str | None:
    """None when the profile fits; otherwise a message naming a fix."""
    capacity = arch.memory.k
    if profile.logical_qubits <= capacity:
        return None
    for option in arch.memory_options:
        if get_code(option).k >= profile.logical_qubits:
            return (
                f"profile needs {profile.logical_qubits} logicals but memory "
                f"{arch.memory_name!r} stores {capacity}; smallest sufficient "
                f"memory code: {option!r}"
            )
    return (
        f"profile needs {profile.logical_qubits} logicals but no configured "
        f"memory code suffices (largest option stores "
        f"{max((get_code(o).k for o in arch.memory_options), default=capacity)})"
    )


# ---------------------------------------------------------------------------
# Time-efficient (parallel-consumption) model


def carry_lookahead_layers(bits: int, controlled: bool = False) -> list[int]:
    """Toffoli-layer sizes of a log-depth adder on ``bits``-bit operands.

    Models the standard lookahead schedule: a forward pass over ``bits``
    positions and a reverse pass over ``bits - 1``, each opening with one
    layer of parallel AND gates followed by the down-sweep and up-sweep of
    its prefix tree.  The controlled form prepends one extra AND layer
    conditioning the whole addition.  Layer count is about
    ``4 * log2(bits)`` and total Toffolis about ``10 * bits``.
    """
    if bits < 2:
        raise ValueError(f"need at least 2 bits, got {bits}")
    layers: list[int] = []
    if controlled:
        layers.append(bits)
    for span in (bits, bits - 1):
        layers.append(span)
        depth = span.bit_length() - 1
        for t in range(1, depth + 1):
            layers.append(2 * (span >> t) - 1)
        for t in range(1, depth + 1):
            layers.append(((span - (1 << (t - 1))) >> t) + (span >> t) - 1)
    return [size for size in layers if size > 0]


def simulate_parallel_consumption(
    layers: Sequence[int],
    parallelism: int,
    batch_cycles: int,
    surgery_cycles: Fraction,
) -> Fraction:
    """Cycles to drain Toffoli layers against batched magic-state production.

    Each step implements ``min(parallelism, remaining in the layer)``
    Toffolis; when the stock cannot cover a step, one batch of
    ``parallelism`` states is distilled first (production is blocking).
    A step costs one surgery step for the teleportations plus two more
    for fix-ups, except that steps below five Toffolis defer their
    fix-ups into a later step and pay only the teleportation.
    """
    if parallelism < 1:
        raise ValueError(f"parallelism must be positive, got {parallelism}")
    elapsed = Fraction(0)
    stock = 0
    for size in layers:
        remaining = size
        while remaining:
            step = min(parallelism, remaining)
            if stock < step:
                elapsed += batch_cycles
                stock += parallelism
            stock -= step
            remaining -= step
            elapsed += (3 if step >= 5 else 1) * surgery_cycles
    return elapsed


@dataclass(frozen=True)
class TimeEfficientReport:
    days: float
    qubits: int
    speedup: float
    parallelism: int
    gamma: float
    processor_qubits: int
    factory_qubits: int
    surface_qubits: int
    operation_qubits: int

    def as_dict(self) -> dict:
        return {
            "days": self.days,
            "qubits": self.qubits,
            "speedup": self.speedup,
            "parallelism": self.parallelism,
            "gamma": self.gamma,
            "zones": {
                "processor": self.processor_qubits,
                "factory": self.factory_qubits,
                "surface": self.surface_qubits,
                "operation": self.operation_qubits,
            },
        }


def time_efficient_report(
    profile: CircuitProfile,
    parallelism: int,
    *,
    gamma: float = 2.0,
    encoding_rate: float | None = None,
    injection_batches: int | None = None,
    adder_bits: int | None = None,
    distance: int = 20,
    baseline: ArchitectureSpec | None = None,
) -> TimeEfficientReport:
    """Space and runtime of the parallel-consumption architecture.

    The speedup is the ripple-carry/lookahead cycle ratio averaged over
    the plain and controlled adders, applied to the profile's serial
    runtime on the ``baseline`` architecture (the balanced layout unless
    given).  Qubit accounting follows the high-rate storage model: the
    processor holds the compilation's logicals plus the lookahead carry
    ancillas at the encoding rate for the chosen parallelism, five factory
    blocks distill in parallel, and the surgery ancilla demand
    ``gamma * 6 * parallelism / rate`` is offset by qubits freed once
    distillation completes (all cultivation patches plus two factory
    blocks).
    """
    if parallelism < 1:
        raise ValueError(f"parallelism must be positive, got {parallelism}")
    if baseline is None:
        baseline = load_architecture("balanced")
    rate = encoding_rate if encoding_rate is not None else (0.2 if parallelism < 600 else 0.3)
    batches = injection_batches if injection_batches is not None else profile.injection_batches
    bits = adder_bits if adder_bits is not None else profile.adder_bits()

    surgery = Fraction(2 * distance, 3)
    f = baseline.factory
    cultivation_surgery = round(Fraction(2 * f.surface_distance, 3))
    batch_cycles = 8 * (f.cultivation_cycles + 2 * cultivation_surgery) * batches

    speedups = []
    for controlled, per_bit in ((False, 25), (True, 30)):
        ripple = per_bit * bits * surgery
        drained = simulate_parallel_consumption(
            carry_lookahead_layers(bits, controlled), parallelism, batch_cycles, surgery
        )
        speedups.append(ripple / drained)
    speedup = float(sum(speedups) / 2)
    days = runtime_days(profile, baseline) / speedup

    logical_total = profile.logical_qubits + (bits - 2 * round(math.log2(bits)))
    data = logical_total / rate
    processor = data + (data - logical_total) / 2
    factory_rate = 0.04 if parallelism < 100 else rate
    block_data = parallelism / factory_rate
    factory_block = block_data + (block_data - parallelism) / 2
    factory = 5 * factory_block
    surface = (parallelism / batches) * footprint(build_surface(f.surface_distance)).total
    freed = surface + 2 * factory_block
    operation = max(0.0, gamma * (6 * parallelism / rate) - freed)
    total = processor + factory + surface + operation
    return TimeEfficientReport(
        days=days,
        qubits=round(total),
        speedup=speedup,
        parallelism=parallelism,
        gamma=gamma,
        processor_qubits=round(processor),
        factory_qubits=round(factory),
        surface_qubits=round(surface),
        operation_qubits=round(operation),
    )


# ---------------------------------------------------------------------------
# Config loading


def _data_dir(kind: str) -> Path:
    return Path(__file__).resolve().parent / "data" / kind


def _read_toml(path: Path) -> dict:
    with open(path, "rb") as handle:
        return tomli.load(handle)


def available_profiles() -> list[str]:
    return sorted(p.stem for p in _data_dir("profiles").glob("*.toml"))


def load_profile(name: str | Path) -> CircuitProfile:
    """Load a circuit profile by catalog name or explicit file path."""
    path = Path(name)
    if not path.is_file():
        stem = str(name).replace("-", "_")
        path = _data_dir("profiles") / f"{stem}.toml"
        if not path.is_file():
            raise KeyError(f"unknown profile {name!r}; available: {available_profiles()}")
    doc = _read_toml(path)
    subroutines = tuple(
        Subroutine(
            kind=entry["kind"],
            fraction=float(entry["fraction"]),
            bits=int(entry.get("bits", 0)),
            address_bits=int(entry.get("address_bits", 0)),
            word_bits=int(entry.get("word_bits", 0)),
        )
        for entry in doc["subroutines"]
    )
    parallel = doc.get("time_efficient", {})
    return CircuitProfile(
        name=doc["name"],
        logical_qubits=int(doc["logical_qubits"]),
        toffoli_count=float(doc["toffoli_count"]),
        subroutines=subroutines,
        reference_tau_toff=doc.get("reference_tau_toff", {}),
        parallelism=parallel.get("parallelism"),
        injection_batches=int(parallel.get("injection_batches", 1)),
        source=doc.get("source", ""),
        toffoli_provenance=doc.get("toffoli_provenance", ""),
    )


def available_architectures() -> list[str]:
    return sorted(p.stem for p in _data_dir("arch").glob("*.toml"))


@lru_cache(maxsize=None)
def _arch_doc(stem: str) -> dict:
    path = _data_dir("arch") / f"{stem}.toml"
    if not path.is_file():
        raise KeyError(
            f"unknown architecture {stem!r}; available: {available_architectures()}"
        )
    return _read_toml(path)


def load_architecture(name: str, memory: str | None = None) -> ArchitectureSpec:
    """Build an architecture by name, optionally overriding the memory code."""
    doc = _arch_doc(name.replace("-", "_"))
    options = tuple(doc["memory_options"])
    memory_name = memory if memory is not None else doc["default_memory"]
    if memory_name not in options:
        raise ValueError(f"memory {memory_name!r} not offered; options: {list(options)}")
    fdoc = doc["factory"]
    factory = FactoryModel(
        t_error_rate=float(fdoc["t_error_rate"]),
        cultivation_cycles=int(fdoc["cultivation_cycles"]),
        surface_distance=int(fdoc["surface_distance"]),
        ccz_per_round=int(fdoc["ccz_per_round"]),
        injection_batches=int(fdoc.get("injection_batches", 1)),
        code_name=fdoc.get("code", "bb18"),
    )
    zone = doc["operation_zone"]
    gadgets = (
        tuple(zone["memory_gadget"][memory_name]),
        tuple(zone["processor_gadget"]),
        tuple(zone["resource_gadget"]),
    )
    return ArchitectureSpec(
        name=doc["name"],
        memory_name=memory_name,
        processor_name=doc["processor"],
        factory=factory,
        cycle_time_s=float(doc["cycle_time_s"]),
        operation_gadgets=gadgets,
        memory_options=options,
    )
