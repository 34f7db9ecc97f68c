"""Graph-based ancilla systems for logical measurements.

Reading out a logical operator means growing the code for a few cycles:
a connected graph is laid over the operator's physical support, whose
vertices become new checks coupled one-to-one to the support qubits,
whose edges become ancilla qubits, and whose fundamental cycle basis
becomes new checks of the opposite basis. Existing opposite-basis
checks are extended along graph paths so the merged system stays CSS.
Construction is heuristic and cheap; `validate_gadget` certifies the
result (kernel structure, sparsity, a randomized distance estimate) and
is the final arbiter for any graph policy.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import networkx as nx
import numpy as np
import tomli

from .codes import CssCode, build_explicit, direct_sum, explicit_doc, render_toml
from .distance import estimate_distance_infoset, lighten_representative
from .gf2 import BinaryMatrix, logical_basis

__all__ = [
    "AncillaSystem",
    "GadgetReport",
    "GadgetStats",
    "GraphPolicy",
    "SurgeryGadget",
    "bridge",
    "build_graph_gadget",
    "load_gadget",
    "save_gadget",
    "single_qubit_x_target",
    "validate_gadget",
]


# ---------------------------------------------------------------------------
# policies and carriers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphPolicy:
    """How to wire the ancilla graph over a target's support.

    The `path` kind stops at the index-ordered spanning path. The
    `expander` kind keeps adding chords between the extremes of the
    Fiedler vector until a Cheeger-constant lower bound reaches
    `expansion_target` or the edge budget runs out. Graphs with at most
    `exact_cutoff` vertices get the exact Cheeger constant; larger ones
    use the spectral bound, which is loose, so the budget usually binds.
    """

    kind: str = "expander"
    edge_budget_factor: float = 2.0
    expansion_target: float = 1.0
    degree_cap: int = 6
    exact_cutoff: int = 10


@dataclass(frozen=True)
class AncillaSystem:
    """Ancilla qubits and couplings of one measurement gadget.

    `incidence` is the vertex-edge incidence matrix of the graph (new
    same-basis checks by ancilla qubits), `cycles` holds a cycle basis
    (new opposite-basis checks), `vertex_coupling` ties each vertex to
    its data qubit, and `check_extension` extends the data code's
    opposite-basis checks onto the edges. Vertices without a data qubit
    (bridge waypoints) carry -1 in `vertex_qubits`.
    """

    qubit_count: int
    incidence: BinaryMatrix
    cycles: BinaryMatrix
    vertex_coupling: BinaryMatrix
    check_extension: BinaryMatrix
    edges: tuple[tuple[int, int], ...]
    vertex_qubits: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.incidence.shape != (len(self.vertex_qubits), self.qubit_count):
            raise ValueError("incidence shape disagrees with vertex and qubit counts")
        if len(self.edges) != self.qubit_count:
            raise ValueError("one ancilla qubit per edge")
        for mat, label in ((self.cycles, "cycles"), (self.check_extension, "check_extension")):
            if mat.ncols != self.qubit_count:
                raise ValueError(f"{label} must have one column per ancilla qubit")
        if self.vertex_coupling.nrows != self.incidence.nrows:
            raise ValueError("vertex_coupling must have one row per vertex")


@dataclass(frozen=True)
class GadgetStats:
    """Size and sparsity of a gadget's ancilla system and merged code."""

    qubits: int
    x_checks: int
    z_checks: int
    max_degree: int
    distance_upper: int | None = None


@dataclass(frozen=True)
class GadgetReport:
    """Outcome of the gadget checks; `failures` names what broke."""

    passed: bool
    failures: tuple[str, ...]
    css_orthogonal: bool
    kernel_dimension: int
    kernel_matches_targets: bool
    max_degree: int
    distance_estimate: int | None
    trials: int
    seed: int


@dataclass
class SurgeryGadget:
    """A data code, its measurement ancilla system, and the merged code.

    `targets` holds the measured operators' supports, `target_matrix`
    their pairing with the logical basis of the opposite type,
    `vertex_kernel` the combinations of new checks whose first-round
    parities read the targets out, and `preserved_logicals`
    representatives of the surviving opposite-basis logicals over the
    merged qubits (data columns, then ancilla edges) chosen so that
    every surgery round leaves them fixed; single-operator gadgets keep
    them on data qubits alone, bridges may route them over the chain.
    """

    data_code: CssCode
    ancilla: AncillaSystem
    targets: BinaryMatrix
    target_matrix: BinaryMatrix
    target_type: str
    merged: CssCode
    vertex_kernel: BinaryMatrix
    preserved_logicals: BinaryMatrix
    surgery_cycles: int
    stats: GadgetStats

    @property
    def ancilla_qubits(self) -> int:
        return self.ancilla.qubit_count

    @property
    def merged_hx(self) -> BinaryMatrix:
        return self.merged.hx

    @property
    def merged_hz(self) -> BinaryMatrix:
        return self.merged.hz


# ---------------------------------------------------------------------------
# graph construction
# ---------------------------------------------------------------------------


def _laplacian(edges: list[tuple[int, int]], n_vertices: int) -> np.ndarray:
    lap = np.zeros((n_vertices, n_vertices))
    for u, v in edges:
        lap[u, u] += 1.0
        lap[v, v] += 1.0
        lap[u, v] -= 1.0
        lap[v, u] -= 1.0
    return lap


def _cheeger_lower_bound(edges: list[tuple[int, int]], n_vertices: int, policy: GraphPolicy) -> float:
    if n_vertices <= 2:
        return float("inf")
    if n_vertices <= policy.exact_cutoff:
        best = float("inf")
        for mask in range(1, 1 << n_vertices):
            size = mask.bit_count()
            if size > n_vertices // 2:
                continue
            cut = sum(1 for u, v in edges if ((mask >> u) ^ (mask >> v)) & 1)
            best = min(best, cut / size)
        return best
    return float(np.linalg.eigvalsh(_laplacian(edges, n_vertices))[1]) / 2.0


def _grow_edges(n_vertices: int, policy: GraphPolicy) -> list[tuple[int, int]]:
    edges = [(i, i + 1) for i in range(n_vertices - 1)]
    if policy.kind == "path" or n_vertices <= 2:
        return edges
    if policy.kind != "expander":
        raise ValueError(f"unknown graph policy kind {policy.kind!r}")
    budget = max(len(edges), int(round(policy.edge_budget_factor * n_vertices)))
    present = {frozenset(e) for e in edges}
    degree = np.zeros(n_vertices, dtype=np.int64)
    for u, v in edges:
        degree[u] += 1
        degree[v] += 1
    while len(edges) < budget:
        if _cheeger_lower_bound(edges, n_vertices, policy) >= policy.expansion_target:
            break
        _, vecs = np.linalg.eigh(_laplacian(edges, n_vertices))
        fiedler = vecs[:, 1]
        best, best_gap = None, -float("inf")
        for u in range(n_vertices):
            for v in range(u + 1, n_vertices):
                if frozenset((u, v)) in present:
                    continue
                gap = abs(fiedler[u] - fiedler[v])
                # capped endpoints only as a last resort
                if degree[u] >= policy.degree_cap or degree[v] >= policy.degree_cap:
                    gap -= 1e6
                if gap > best_gap:
                    best_gap, best = gap, (u, v)
        if best is None:
            break
        edges.append(best)
        present.add(frozenset(best))
        degree[best[0]] += 1
        degree[best[1]] += 1
    return edges


def _incidence(edges: list[tuple[int, int]], n_vertices: int) -> BinaryMatrix:
    if not edges:
        return BinaryMatrix.zeros(n_vertices, 0)
    rows = np.array([v for edge in edges for v in edge], dtype=np.int64)
    cols = np.repeat(np.arange(len(edges), dtype=np.int64), 2)
    return BinaryMatrix.from_coords(n_vertices, len(edges), rows, cols)


def _rows_matrix(rows: list[list[int]], ncols: int) -> BinaryMatrix:
    lengths = [len(r) for r in rows]
    if sum(lengths) == 0:
        return BinaryMatrix.zeros(len(rows), ncols)
    rr = np.repeat(np.arange(len(rows), dtype=np.int64), lengths)
    cc = np.concatenate([np.asarray(r, dtype=np.int64) for r in rows if r])
    return BinaryMatrix.from_coords(len(rows), ncols, rr, cc)


def _load_weight(load: np.ndarray):
    def weight(u: int, v: int, attrs: dict) -> float:
        return 1.0 + 0.5 * load[attrs["index"]]

    return weight


def _cycle_rows(
    edges: list[tuple[int, int]], n_vertices: int, load: np.ndarray
) -> list[list[int]]:
    """Fundamental cycle basis, steered away from heavily used edges.

    Each non-tree edge closes one cycle through a lightly loaded path.
    The path for the i-th non-tree edge may use earlier non-tree edges
    but never later ones, which keeps the cycles independent.
    """
    graph = nx.Graph()
    graph.add_nodes_from(range(n_vertices))
    graph.add_edges_from(edges)
    tree = {frozenset(e) for e in nx.bfs_tree(graph, 0).edges()}
    if len(tree) != n_vertices - 1:
        raise ValueError("ancilla graph must be connected")
    allowed = nx.Graph()
    allowed.add_nodes_from(range(n_vertices))
    index = {frozenset(e): i for i, e in enumerate(edges)}
    for key in tree:
        u, v = tuple(key)
        allowed.add_edge(u, v, index=index[key])
    rows = []
    for i, (u, v) in enumerate(edges):
        if frozenset((u, v)) in tree:
            continue
        _, path = nx.single_source_dijkstra(allowed, u, target=v, weight=_load_weight(load))
        cols = {i}
        for a, b in zip(path, path[1:]):
            cols.add(allowed.edges[a, b]["index"])
        for e in cols:
            load[e] += 1.0
        rows.append(sorted(cols))
        allowed.add_edge(u, v, index=i)
    if len(rows) != len(edges) - n_vertices + 1:
        raise ValueError("cycle basis size mismatch: the graph must be simple")
    return rows


def _extension_rows(
    opp_dense: np.ndarray,
    support: np.ndarray,
    edges: list[tuple[int, int]],
    n_vertices: int,
    load: np.ndarray,
) -> list[list[int]]:
    """Edge sets whose boundaries match each check's coupled vertices.

    Coupled vertices are paired greedily along lightly loaded shortest
    paths; the shared load term spreads cycle checks and extensions so
    no single ancilla qubit collects too many check columns.
    """
    graph = nx.Graph()
    graph.add_nodes_from(range(n_vertices))
    for i, (u, v) in enumerate(edges):
        graph.add_edge(u, v, index=i)
    weight = _load_weight(load)
    rows = []
    for row in opp_dense[:, support]:
        remaining = np.flatnonzero(row).tolist()
        if len(remaining) % 2:
            raise ValueError("target anticommutes with a stabilizer check")
        cols: set[int] = set()
        while remaining:
            start = remaining[0]
            dist, paths = nx.single_source_dijkstra(graph, start, weight=weight)
            partner = min(remaining[1:], key=lambda t: dist[t])
            for u, v in zip(paths[partner], paths[partner][1:]):
                e = graph.edges[u, v]["index"]
                cols ^= {e}
                load[e] += 1.0
            remaining = [t for t in remaining if t not in (start, partner)]
        rows.append(sorted(cols))
    return rows


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def _merged_blocks(code: CssCode, ancilla: AncillaSystem, target_type: str) -> tuple[BinaryMatrix, BinaryMatrix]:
    """Block form of the merged check matrices, (X rows, Z rows)."""
    h_same, h_opp = (code.hx, code.hz) if target_type == "X" else (code.hz, code.hx)
    same_block = BinaryMatrix.vstack([
        BinaryMatrix.hstack([h_same, BinaryMatrix.zeros(h_same.nrows, ancilla.qubit_count)]),
        BinaryMatrix.hstack([ancilla.vertex_coupling, ancilla.incidence]),
    ])
    opp_block = BinaryMatrix.vstack([
        BinaryMatrix.hstack([h_opp, ancilla.check_extension]),
        BinaryMatrix.hstack([BinaryMatrix.zeros(ancilla.cycles.nrows, code.n), ancilla.cycles]),
    ])
    if target_type == "X":
        return same_block, opp_block
    return opp_block, same_block


def _max_degree(*matrices: BinaryMatrix) -> int:
    best = 0
    for mat in matrices:
        if mat.nrows == 0 or mat.ncols == 0:
            continue
        best = max(best, int(mat.row_weights().max()), int(mat.col_weights().max()))
    return best


def _preserved_rows(
    rows_dense: np.ndarray,
    h_opp: BinaryMatrix,
    support: np.ndarray,
    ancilla: AncillaSystem,
) -> np.ndarray:
    """Representatives of the surviving logicals over the merged qubits.

    Each row is first pushed off the measured supports by adding
    opposite-basis checks, which keeps it fixed by every new check.
    A row that pairs oddly with individual targets (a cross product
    surviving a joint measurement) cannot leave the supports; it is
    instead threaded over ancilla edges so each overlapped vertex sees
    matching parity on its edges.
    """
    n_edges = ancilla.qubit_count
    out = np.zeros((rows_dense.shape[0], rows_dense.shape[1] + n_edges), dtype=np.uint8)
    if rows_dense.shape[0] == 0:
        return out
    out[:, : rows_dense.shape[1]] = rows_dense
    if support.size == 0:
        return out
    opp_dense = h_opp.to_dense()
    restricted = BinaryMatrix.from_dense(opp_dense[:, support]).transpose()
    graph = nx.Graph()
    graph.add_nodes_from(range(len(ancilla.vertex_qubits)))
    for i, (u, v) in enumerate(ancilla.edges):
        graph.add_edge(u, v, index=i)
    qubit_vertex = {q: v for v, q in enumerate(ancilla.vertex_qubits) if q >= 0}
    for i, row in enumerate(rows_dense):
        piece = row[support]
        if not piece.any():
            continue
        combo = restricted.solve(piece)
        if combo is not None:
            out[i, : row.size] ^= (
                (combo.astype(np.int64) @ opp_dense.astype(np.int64)) & 1
            ).astype(np.uint8)
            continue
        touched = sorted(qubit_vertex[q] for q in np.flatnonzero(out[i, : row.size]) if q in qubit_vertex)
        if len(touched) % 2:
            raise ValueError("a surviving logical cannot be matched to the ancilla graph")
        while touched:
            start = touched.pop(0)
            lengths, paths = nx.single_source_dijkstra(graph, start)
            partner = min(touched, key=lambda t: lengths[t])
            for u, v in zip(paths[partner], paths[partner][1:]):
                out[i, row.size + graph.edges[u, v]["index"]] ^= 1
            touched.remove(partner)
    return out


def _assemble(
    code: CssCode,
    ancilla: AncillaSystem,
    targets: BinaryMatrix,
    target_type: str,
    cycles: int | None,
) -> SurgeryGadget:
    n, t = code.n, targets.nrows
    h_opp = code.hz if target_type == "X" else code.hx
    lx, lz = code.logicals()
    l_opp = lz if target_type == "X" else lx

    kernel = ancilla.incidence.transpose().kernel_basis()
    if kernel.nrows == 0:
        raise ValueError("ancilla system measures nothing")
    if kernel.nrows != t:
        raise ValueError(
            f"ancilla graph measures {kernel.nrows} operators, expected {t}; "
            "each target needs exactly one connected component"
        )
    image = kernel @ ancilla.vertex_coupling
    spanned = BinaryMatrix.vstack([image, targets])
    if not (image.rank() == t and targets.rank() == t and spanned.rank() == t):
        raise ValueError("ancilla system does not measure the declared targets")

    targets_dense = targets.to_dense().astype(np.int64)
    pair_dense = (targets_dense @ l_opp.to_dense().astype(np.int64).T) & 1
    if not pair_dense.any(axis=1).all():
        raise ValueError("every target must act on the logical space")
    target_matrix = BinaryMatrix.from_dense(pair_dense.astype(np.uint8))

    commuting = target_matrix.kernel_basis()
    raw_rows = (
        commuting.to_dense().astype(np.int64) @ l_opp.to_dense().astype(np.int64)
    ).astype(np.uint8) & 1
    support_cols = np.flatnonzero(targets.to_dense().any(axis=0))
    preserved_dense = _preserved_rows(raw_rows, h_opp, support_cols, ancilla)
    preserved = (
        BinaryMatrix.from_dense(preserved_dense)
        if preserved_dense.shape[0]
        else BinaryMatrix.zeros(0, n + ancilla.qubit_count)
    )

    merged_hx, merged_hz = _merged_blocks(code, ancilla, target_type)
    merged = CssCode(
        name=f"{code.name}+gadget",
        hx=merged_hx,
        hz=merged_hz,
        metadata={"construction": "surgery_merge", "parts": [code.name]},
    )

    if cycles is None:
        d_p = code.metadata.get("distance_upper")
        if d_p is None:
            raise ValueError("data code declares no distance; pass an explicit cycle count")
        cycles = max(1, round(2 * int(d_p) / 3))

    n_vertices = ancilla.incidence.nrows
    n_cycles = ancilla.cycles.nrows
    stats = GadgetStats(
        qubits=ancilla.qubit_count,
        x_checks=n_vertices if target_type == "X" else n_cycles,
        z_checks=n_cycles if target_type == "X" else n_vertices,
        max_degree=_max_degree(merged_hx, merged_hz),
    )
    return SurgeryGadget(
        data_code=code,
        ancilla=ancilla,
        targets=targets,
        target_matrix=target_matrix,
        target_type=target_type,
        merged=merged,
        vertex_kernel=kernel,
        preserved_logicals=preserved,
        surgery_cycles=int(cycles),
        stats=stats,
    )


# ---------------------------------------------------------------------------
# public construction
# ---------------------------------------------------------------------------


def single_qubit_x_target(code: CssCode, index: int, trials: int = 2000, seed: int = 0) -> np.ndarray:
    """Low-weight X-type representative for one logical qubit."""
    lx, _ = code.logicals()
    if not 0 <= index < lx.nrows:
        raise ValueError(f"logical index {index} out of range for k={lx.nrows}")
    return lighten_representative(code.hx, lx.to_dense()[index], trials=trials, seed=seed)


def build_graph_gadget(
    code: CssCode,
    target: np.ndarray,
    policy: GraphPolicy | None = None,
    target_type: str = "X",
    cycles: int | None = None,
) -> SurgeryGadget:
    """Wire a measurement gadget for one logical operator.

    The target is a support vector of a single-type logical
    representative; mixed-type operators are not supported. Its support
    qubits become the vertices of a connected graph chosen by `policy`,
    and the merged code follows. `cycles` overrides the default surgery
    duration of two thirds of the data code's distance.
    """
    policy = policy or GraphPolicy()
    if target_type not in ("X", "Z"):
        raise ValueError(f"target type must be X or Z, got {target_type!r}")
    target = (np.asarray(target, dtype=np.uint8) & 1).reshape(-1)
    if target.shape != (code.n,):
        raise ValueError(f"target length {target.size} does not match n={code.n}")
    support = np.flatnonzero(target)
    if support.size == 0:
        raise ValueError("target has empty support and would measure nothing")
    h_opp = code.hz if target_type == "X" else code.hx
    opp_dense = h_opp.to_dense()
    if ((opp_dense.astype(np.int64) @ target.astype(np.int64)) & 1).any():
        raise ValueError("target anticommutes with a stabilizer check")

    n_vertices = support.size
    edges = _grow_edges(n_vertices, policy)
    load = np.zeros(len(edges))
    cycle_rows = _cycle_rows(edges, n_vertices, load)
    extension = _extension_rows(opp_dense, support, edges, n_vertices, load)
    ancilla = AncillaSystem(
        qubit_count=len(edges),
        incidence=_incidence(edges, n_vertices),
        cycles=_rows_matrix(cycle_rows, len(edges)),
        vertex_coupling=BinaryMatrix.from_coords(
            n_vertices, code.n, np.arange(n_vertices, dtype=np.int64), support.astype(np.int64)
        ),
        check_extension=_rows_matrix(extension, len(edges)),
        edges=tuple((int(u), int(v)) for u, v in edges),
        vertex_qubits=tuple(int(q) for q in support),
    )
    return _assemble(code, ancilla, BinaryMatrix.from_dense(target[None, :]), target_type, cycles)


def bridge(gadget_a: SurgeryGadget, gadget_b: SurgeryGadget) -> SurgeryGadget:
    """Join two single-operator gadgets so they measure the product.

    A chain of d ancilla qubits and d-1 checks (d the smaller declared
    code distance) connects the lowest-index vertices of both graphs,
    turning the two kernels into one and the two readouts into a joint
    one. The result is validated structurally before it is returned.
    """
    if gadget_a is gadget_b:
        raise ValueError("cannot bridge a gadget with itself: the blocks must differ")
    if gadget_a.target_type != gadget_b.target_type:
        raise ValueError(
            f"cannot bridge a {gadget_a.target_type}-type gadget with a "
            f"{gadget_b.target_type}-type gadget"
        )
    if gadget_a.targets.nrows != 1 or gadget_b.targets.nrows != 1:
        raise ValueError("bridging is defined for single-operator gadgets")
    d_a = gadget_a.data_code.metadata.get("distance_upper")
    d_b = gadget_b.data_code.metadata.get("distance_upper")
    if d_a is None or d_b is None:
        raise ValueError("both data codes must declare a distance to size the chain")
    chain = min(int(d_a), int(d_b))

    combined = direct_sum(gadget_a.data_code, gadget_b.data_code)
    anc_a, anc_b = gadget_a.ancilla, gadget_b.ancilla
    n_a = gadget_a.data_code.n
    v_a, v_b = anc_a.incidence.nrows, anc_b.incidence.nrows
    e_a, e_b = anc_a.qubit_count, anc_b.qubit_count
    n_vertices = v_a + v_b + chain - 1

    waypoints = [v_a + v_b + i for i in range(chain - 1)]
    stations = [0, *waypoints, v_a]
    chain_edges = list(zip(stations, stations[1:]))
    edges = list(anc_a.edges) + [(u + v_a, v + v_a) for u, v in anc_b.edges] + chain_edges

    def pad(left: BinaryMatrix, right: BinaryMatrix) -> BinaryMatrix:
        # block diagonal with zero columns for the chain edges
        top = BinaryMatrix.hstack(
            [left, BinaryMatrix.zeros(left.nrows, right.ncols + chain)]
        )
        bottom = BinaryMatrix.hstack(
            [BinaryMatrix.zeros(right.nrows, left.ncols), right, BinaryMatrix.zeros(right.nrows, chain)]
        )
        return BinaryMatrix.vstack([top, bottom])

    coupling = BinaryMatrix.vstack([
        BinaryMatrix.hstack([anc_a.vertex_coupling, BinaryMatrix.zeros(v_a, combined.n - n_a)]),
        BinaryMatrix.hstack([BinaryMatrix.zeros(v_b, n_a), anc_b.vertex_coupling]),
        BinaryMatrix.zeros(chain - 1, combined.n),
    ])
    ancilla = AncillaSystem(
        qubit_count=e_a + e_b + chain,
        incidence=_incidence(edges, n_vertices),
        cycles=pad(anc_a.cycles, anc_b.cycles),
        vertex_coupling=coupling,
        check_extension=pad(anc_a.check_extension, anc_b.check_extension),
        edges=tuple((int(u), int(v)) for u, v in edges),
        vertex_qubits=anc_a.vertex_qubits
        + tuple(q + n_a for q in anc_b.vertex_qubits)
        + (-1,) * (chain - 1),
    )
    joint = BinaryMatrix.hstack([gadget_a.targets, gadget_b.targets])
    gadget = _assemble(
        combined, ancilla, joint, gadget_a.target_type, cycles=max(1, round(2 * chain / 3))
    )
    report = validate_gadget(gadget, trials=0)
    if not report.passed:
        raise ValueError(f"bridged system failed validation: {', '.join(report.failures)}")
    return gadget


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def validate_gadget(gadget: SurgeryGadget, trials: int = 100_000, seed: int = 0) -> GadgetReport:
    """Certify a gadget: CSS structure, kernel, sparsity, distance.

    The merged matrices are rebuilt from the data code and the ancilla
    system, so a tampered gadget cannot pass on stale blocks. The
    kernel check demands that the new checks' dependency space maps
    exactly onto the declared targets modulo stabilizers. Degree and
    the randomized distance estimate are reported; `trials` = 0 skips
    the estimate, and positive budgets are split over both bases.
    """
    failures = []
    code, ancilla = gadget.data_code, gadget.ancilla
    merged_hx, merged_hz = _merged_blocks(code, ancilla, gadget.target_type)
    ortho = (merged_hx @ merged_hz.transpose()).is_zero()
    if not ortho:
        failures.append("css_orthogonality")

    t = gadget.targets.nrows
    kernel = ancilla.incidence.transpose().kernel_basis()
    image = kernel @ ancilla.vertex_coupling
    h_same = code.hx if gadget.target_type == "X" else code.hz
    r0 = h_same.rank()
    with_image = BinaryMatrix.vstack([h_same, image]).rank()
    with_targets = BinaryMatrix.vstack([h_same, gadget.targets]).rank()
    with_both = BinaryMatrix.vstack([h_same, image, gadget.targets]).rank()
    kernel_ok = (
        kernel.nrows == t
        and with_image == r0 + t
        and with_targets == r0 + t
        and with_both == r0 + t
    )
    if not kernel_ok:
        failures.append("kernel_image")

    estimate = None
    if trials > 0 and ortho and kernel_ok:
        merged_lx, merged_lz = logical_basis(merged_hx, merged_hz)
        if merged_lx.nrows:
            half = max(1, trials // 2)
            z_side = estimate_distance_infoset(merged_hx, merged_lx, trials=half, seed=seed)
            x_side = estimate_distance_infoset(
                merged_hz, merged_lz, trials=max(1, trials - half), seed=seed + 1
            )
            found = [e.d_upper for e in (z_side, x_side) if e.d_upper is not None]
            estimate = min(found) if found else None

    return GadgetReport(
        passed=not failures,
        failures=tuple(failures),
        css_orthogonal=ortho,
        kernel_dimension=kernel.nrows,
        kernel_matches_targets=kernel_ok,
        max_degree=_max_degree(merged_hx, merged_hz),
        distance_estimate=estimate,
        trials=trials,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def save_gadget(gadget: SurgeryGadget, path: str | Path) -> None:
    """Write a gadget definition to a TOML file."""
    code_doc = explicit_doc(gadget.data_code)
    if "distance_upper" in gadget.data_code.metadata:
        code_doc["distance_upper"] = int(gadget.data_code.metadata["distance_upper"])
    doc = {
        "target_type": gadget.target_type,
        "surgery_cycles": gadget.surgery_cycles,
        "vertex_qubits": list(gadget.ancilla.vertex_qubits),
        "edges": [list(e) for e in gadget.ancilla.edges],
        "cycle_checks": [
            sorted(np.flatnonzero(row).tolist()) for row in gadget.ancilla.cycles.to_dense()
        ],
        "check_extension": [
            sorted(np.flatnonzero(row).tolist())
            for row in gadget.ancilla.check_extension.to_dense()
        ],
        "targets": [
            sorted(np.flatnonzero(row).tolist()) for row in gadget.targets.to_dense()
        ],
        "code": code_doc,
    }
    Path(path).write_text(render_toml(doc))


def load_gadget(path: str | Path) -> SurgeryGadget:
    """Rebuild a gadget from a TOML definition; derived parts are recomputed."""
    with open(path, "rb") as f:
        doc = tomli.load(f)
    code_doc = doc["code"]
    code = build_explicit(
        int(code_doc["n"]), code_doc["hx"], code_doc["hz"], name=code_doc.get("name", "explicit")
    )
    if "distance_upper" in code_doc:
        code.metadata["distance_upper"] = int(code_doc["distance_upper"])
    vertex_qubits = [int(q) for q in doc["vertex_qubits"]]
    edges = [(int(u), int(v)) for u, v in doc["edges"]]
    coupled = [(v, q) for v, q in enumerate(vertex_qubits) if q >= 0]
    if coupled:
        coupling = BinaryMatrix.from_coords(
            len(vertex_qubits),
            code.n,
            np.array([v for v, _ in coupled], dtype=np.int64),
            np.array([q for _, q in coupled], dtype=np.int64),
        )
    else:
        coupling = BinaryMatrix.zeros(len(vertex_qubits), code.n)
    ancilla = AncillaSystem(
        qubit_count=len(edges),
        incidence=_incidence(edges, len(vertex_qubits)),
        cycles=_rows_matrix(doc["cycle_checks"], len(edges)),
        vertex_coupling=coupling,
        check_extension=_rows_matrix(doc["check_extension"], len(edges)),
        edges=tuple(edges),
        vertex_qubits=tuple(vertex_qubits),
    )
    targets = _rows_matrix(doc["targets"], code.n)
    return _assemble(code, ancilla, targets, doc["target_type"], cycles=int(doc["surgery_cycles"]))
