"""Ensemble decoding of detector error models.

The workhorse is min-sum belief propagation with a serial message
schedule over mechanisms.  Shots that BP leaves unsatisfied fall through
to a localized-statistics stage: clusters grown around nonzero syndrome
bits in order of BP reliability, each solved locally over GF(2) with a
small exhaustive search.  Five configured variants run per syndrome and
the lowest log-likelihood-ratio cost among the satisfying candidates
wins.
"""

from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from numba import njit

from .simulator import DetectorErrorModel, SampleBatch
from .util import derive_seed, pack_rows, resolve_workers

__all__ = [
    "BatchDecodeResult",
    "DecodeOutcome",
    "DecoderConfig",
    "MaximumLikelihoodTable",
    "bp_decode",
    "bp_lsd_decode",
    "bp_posteriors",
    "decode_batch",
    "ensemble_decode",
    "ensemble_variants",
    "lsd_postprocess",
    "matrix_decode",
]

_SCHEDULES = ("serial", "serial-randomized")
_SCALE_RE = re.compile(r"^scale\((\d+(?:\.\d+)?)\)$")

# priors leaving the open interval after a transform are clamped here
_PRIOR_FLOOR = 1e-12
_PRIOR_CEIL = 0.4999

_BIG = np.float32(1e6)


@dataclass(frozen=True)
class DecoderConfig:
    """Knobs for one decoder instance.

    ``ms_scaling`` of 0.0 selects the annealed min-sum scaling factor
    1 - 2**(-t) at sweep t; any positive value is used as a constant.
    ``prior_transform`` is one of ``nominal``, ``scale(<factor>)`` or
    ``thermal`` (multiplicative Normal(0, thermal_sigma**2) noise).
    """

    bp_iterations: int = 100
    ms_scaling: float = 0.0
    lsd_order: int = 5
    schedule: str = "serial"
    prior_transform: str = "nominal"
    thermal_sigma: float = 0.04
    seed: int = 0

    def __post_init__(self):
        if self.bp_iterations < 1:
            raise ValueError("bp_iterations must be at least 1")
        if self.lsd_order < 0:
            raise ValueError("lsd_order must be nonnegative")
        if self.ms_scaling < 0.0:
            raise ValueError("ms_scaling must be nonnegative")
        if self.schedule not in _SCHEDULES:
            raise ValueError(f"schedule must be one of {_SCHEDULES}")
        if self.prior_transform != "nominal" and self.prior_transform != "thermal":
            if not _SCALE_RE.match(self.prior_transform):
                raise ValueError(
                    "prior_transform must be 'nominal', 'scale(<factor>)' or 'thermal'"
                )
        if not 0.0 < self.thermal_sigma < 1.0:
            raise ValueError("thermal_sigma must lie in (0, 1)")


@dataclass(frozen=True)
class DecodeOutcome:
    """Result of one decode.

    ``correction`` is a 0/1 vector over mechanisms; when ``converged``
    it satisfies the detector check system exactly.  ``cost`` is the
    nominal-prior LLR-weighted weight of the correction.
    """

    correction: np.ndarray
    converged: bool
    cost: float
    observable_flips: np.ndarray
    soft_llrs: np.ndarray | None = field(default=None, repr=False)


# ---------------------------------------------------------------------------
# Tanner graph construction
# ---------------------------------------------------------------------------


class _TannerGraph:
    """Flattened adjacency of a DEM plus per-mechanism signatures."""

    def __init__(self, dem: DetectorErrorModel):
        m = dem.mechanism_count
        d = dem.detector_count
        weights = np.array([len(mm.detectors) for mm in dem.mechanisms], dtype=np.int64)
        self.mech_ptr = np.zeros(m + 1, dtype=np.int32)
        np.cumsum(weights, out=self.mech_ptr[1:])
        self.mech_dets = np.concatenate(
            [np.asarray(mm.detectors, dtype=np.int32) for mm in dem.mechanisms]
        ) if m else np.zeros(0, dtype=np.int32)
        self.edge_mech = np.repeat(np.arange(m, dtype=np.int32), weights)

        order = np.argsort(self.mech_dets, kind="stable")
        self.det_edges = order.astype(np.int32)
        self.det_mechs = self.edge_mech[self.det_edges]
        counts = np.bincount(self.mech_dets, minlength=d)
        self.det_ptr = np.zeros(d + 1, dtype=np.int32)
        np.cumsum(counts, out=self.det_ptr[1:])

        self.priors = np.array([mm.probability for mm in dem.mechanisms])
        self.nominal_llr = np.log((1.0 - self.priors) / self.priors).astype(np.float32)
        self.abs_nominal_llr = np.abs(self.nominal_llr).astype(np.float64)

        self.det_words = np.zeros((m, (d + 63) // 64), dtype=np.uint64)
        for i, mm in enumerate(dem.mechanisms):
            for c in mm.detectors:
                self.det_words[i, c >> 6] ^= np.uint64(1) << np.uint64(c & 63)

        self.obs_dense = np.zeros((m, dem.observable_count), dtype=np.uint8)
        for i, mm in enumerate(dem.mechanisms):
            for o in mm.observables:
                self.obs_dense[i, o] = 1

        self.detector_count = d
        self.mechanism_count = m


@lru_cache(maxsize=4)
def _graph(dem: DetectorErrorModel) -> _TannerGraph:
    return _TannerGraph(dem)


# ---------------------------------------------------------------------------
# min-sum BP kernel
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _bp_batch(
    mech_ptr,
    mech_dets,
    det_ptr,
    det_edges,
    llr2d,
    order2d,
    syndromes,
    iters,
    ms_scaling,
    hard_out,
    soft_out,
    conv_out,
):
    shots, n_det = syndromes.shape
    n_mech = mech_ptr.shape[0] - 1
    n_edge = mech_dets.shape[0]

    q = np.empty(n_edge, dtype=np.float32)
    r = np.empty(n_edge, dtype=np.float32)
    post = np.empty(n_mech, dtype=np.float32)
    min1 = np.empty(n_det, dtype=np.float32)
    min2 = np.empty(n_det, dtype=np.float32)
    arg1 = np.empty(n_det, dtype=np.int32)
    arg2 = np.empty(n_det, dtype=np.int32)
    signpar = np.empty(n_det, dtype=np.uint8)
    mismatch = np.empty(n_det, dtype=np.uint8)
    hard = np.empty(n_mech, dtype=np.uint8)

    for s in range(shots):
        llr = llr2d[s if llr2d.shape[0] > 1 else 0]
        order = order2d[s if order2d.shape[0] > 1 else 0]
        syndrome = syndromes[s]

        for j in range(n_mech):
            post[j] = llr[j]
            hard[j] = 0
            for e in range(mech_ptr[j], mech_ptr[j + 1]):
                q[e] = llr[j]
                r[e] = np.float32(0.0)
        nmis = 0
        for c in range(n_det):
            lo = np.float32(1e30)
            lo2 = np.float32(1e30)
            b1 = np.int32(-1)
            b2 = np.int32(-1)
            for k in range(det_ptr[c], det_ptr[c + 1]):
                e = det_edges[k]
                aq = abs(q[e])
                if aq < lo:
                    lo2 = lo
                    b2 = b1
                    lo = aq
                    b1 = e
                elif aq < lo2:
                    lo2 = aq
                    b2 = e
            min1[c] = lo
            min2[c] = lo2
            arg1[c] = b1
            arg2[c] = b2
            signpar[c] = syndrome[c]
            mismatch[c] = syndrome[c]
            nmis += syndrome[c]

        conv = np.int32(-1)
        if nmis == 0:
            conv = np.int32(0)
        else:
            for t in range(1, iters + 1):
                if ms_scaling > 0.0:
                    alpha = np.float32(ms_scaling)
                else:
                    alpha = np.float32(1.0 - 2.0 ** (-float(t)))
                for jj in range(n_mech):
                    j = order[jj]
                    a = mech_ptr[j]
                    b = mech_ptr[j + 1]
                    # a mechanism's edges land on distinct checks, so the
                    # reply for an edge never depends on its siblings and
                    # send/receive can share one pass
                    acc = post[j]
                    for e in range(a, b):
                        c = mech_dets[e]
                        qn = acc - r[e]
                        qo = q[e]
                        if (qn < 0.0) != (qo < 0.0):
                            signpar[c] ^= np.uint8(1)
                        q[e] = qn
                        aq = abs(qn)
                        # exact two-smallest maintenance: a tracked edge that
                        # grew past its slot forces a rescan of the check
                        rescan = False
                        if arg1[c] == e:
                            if aq <= min2[c]:
                                min1[c] = aq
                            else:
                                rescan = True
                        elif arg2[c] == e:
                            if aq > min2[c]:
                                rescan = True
                            elif aq < min1[c]:
                                min2[c] = min1[c]
                                arg2[c] = arg1[c]
                                min1[c] = aq
                                arg1[c] = e
                            else:
                                min2[c] = aq
                        else:
                            if aq < min1[c]:
                                min2[c] = min1[c]
                                arg2[c] = arg1[c]
                                min1[c] = aq
                                arg1[c] = e
                            elif aq < min2[c]:
                                min2[c] = aq
                                arg2[c] = e
                        if rescan:
                            lo = np.float32(1e30)
                            lo2 = np.float32(1e30)
                            b1 = np.int32(-1)
                            b2 = np.int32(-1)
                            for k in range(det_ptr[c], det_ptr[c + 1]):
                                e2 = det_edges[k]
                                a2 = abs(q[e2])
                                if a2 < lo:
                                    lo2 = lo
                                    b2 = b1
                                    lo = a2
                                    b1 = e2
                                elif a2 < lo2:
                                    lo2 = a2
                                    b2 = e2
                            min1[c] = lo
                            min2[c] = lo2
                            arg1[c] = b1
                            arg2[c] = b2
                        mag = min2[c] if arg1[c] == e else min1[c]
                        if mag > _BIG:
                            mag = _BIG
                        neg = signpar[c]
                        if qn < 0.0:
                            neg ^= np.uint8(1)
                        rn = alpha * mag
                        if neg:
                            rn = -rn
                        acc += rn - r[e]
                        r[e] = rn
                    post[j] = acc
                    h = np.uint8(1) if acc < 0.0 else np.uint8(0)
                    if h != hard[j]:
                        hard[j] = h
                        for e in range(a, b):
                            c = mech_dets[e]
                            if mismatch[c]:
                                mismatch[c] = np.uint8(0)
                                nmis -= 1
                            else:
                                mismatch[c] = np.uint8(1)
                                nmis += 1
                if nmis == 0:
                    conv = np.int32(t)
                    break

        conv_out[s] = conv
        for j in range(n_mech):
            hard_out[s, j] = hard[j]
            soft_out[s, j] = post[j]


# ---------------------------------------------------------------------------
# GF(2) elimination helpers for the localized stage
# ---------------------------------------------------------------------------


@njit(cache=True)
def _reduce_vec(pivots, pivot_of_col, vec, nwords):
    """Reduce vec against the pivot rows in place; return its leading column
    or -1 when it vanishes.  Words past ``nwords`` ride along in the XOR so
    augmented tags stay consistent."""
    w = 0
    while w < nwords:
        x = vec[w]
        if x == np.uint64(0):
            w += 1
            continue
        b = 0
        while not (x >> np.uint64(b)) & np.uint64(1):
            b += 1
        col = (w << 6) + b
        pr = pivot_of_col[col]
        if pr < 0:
            return col
        for i in range(vec.shape[0]):
            vec[i] ^= pivots[pr, i]
    return -1


@njit(cache=True)
def _insert_vec(pivots, pivot_of_col, npiv, vec, nwords):
    """Reduce and, if independent, install vec as a pivot row.  Returns the
    new pivot count (unchanged when vec was dependent)."""
    col = _reduce_vec(pivots, pivot_of_col, vec, nwords)
    if col < 0:
        return npiv
    for i in range(vec.shape[0]):
        pivots[npiv, i] = vec[i]
    pivot_of_col[col] = npiv
    return npiv + 1


@njit(cache=True)
def _local_osd(cols, n_rows, row_words, s_words, llr_abs, order):
    """Minimum-cost solve of a dense column system.

    ``cols`` holds one column per candidate mechanism, detector bits in
    the first ``row_words`` words and a one-hot column tag after them.
    Columns arrive most-error-likely first, so pivots land on likely
    mechanisms and the searched kernel vectors are the likeliest flips.
    Returns (solved, picked column mask words, cost).
    """
    n_cols, width = cols.shape
    pivots = np.zeros((n_cols, width), dtype=np.uint64)
    pivot_of_col = np.full(n_rows, -1, dtype=np.int32)
    kernel = np.zeros((n_cols, width), dtype=np.uint64)
    npiv = 0
    nker = 0
    work = np.empty(width, dtype=np.uint64)
    for j in range(n_cols):
        for i in range(width):
            work[i] = cols[j, i]
        col = _reduce_vec(pivots, pivot_of_col, work, row_words)
        if col >= 0:
            for i in range(width):
                pivots[npiv, i] = work[i]
            pivot_of_col[col] = npiv
            npiv += 1
        else:
            for i in range(width):
                kernel[nker, i] = work[i]
            nker += 1

    sol = np.zeros(width, dtype=np.uint64)
    for i in range(row_words):
        sol[i] = s_words[i]
    lead = _reduce_vec(pivots, pivot_of_col, sol, row_words)
    if lead >= 0:
        return False, sol, np.inf

    tail_words = width - row_words
    best = np.empty(tail_words, dtype=np.uint64)
    cur = np.empty(tail_words, dtype=np.uint64)
    for i in range(tail_words):
        best[i] = sol[row_words + i]
        cur[i] = best[i]

    def_cost = np.float64(0.0)
    for i in range(tail_words):
        x = best[i]
        while x:
            b = 0
            while not (x >> np.uint64(b)) & np.uint64(1):
                b += 1
            def_cost += llr_abs[(i << 6) + b]
            x &= x - np.uint64(1)
    best_cost = def_cost

    n_search = order if order < nker else nker
    if n_search > 0:
        # Gray-code walk: one kernel flip per step
        prev = 0
        for g in range(1, 1 << n_search):
            gray = g ^ (g >> 1)
            bit = prev ^ gray
            k = 0
            while not (bit >> k) & 1:
                k += 1
            prev = gray
            for i in range(tail_words):
                cur[i] ^= kernel[k, row_words + i]
            cost = np.float64(0.0)
            for i in range(tail_words):
                x = cur[i]
                while x:
                    b = 0
                    while not (x >> np.uint64(b)) & np.uint64(1):
                        b += 1
                    cost += llr_abs[(i << 6) + b]
                    x &= x - np.uint64(1)
            if cost < best_cost:
                best_cost = cost
                for i in range(tail_words):
                    best[i] = cur[i]
    return True, best, best_cost


# ---------------------------------------------------------------------------
# prior transforms and schedules
# ---------------------------------------------------------------------------


def _transformed_priors(
    priors: np.ndarray, config: DecoderConfig, decode_index: int = 0
) -> np.ndarray:
    if config.prior_transform == "nominal":
        out = priors.copy()
    elif config.prior_transform == "thermal":
        rng = np.random.default_rng(derive_seed(config.seed, "thermal", decode_index))
        out = priors * (1.0 + rng.normal(0.0, config.thermal_sigma, priors.shape[0]))
    else:
        factor = float(_SCALE_RE.match(config.prior_transform).group(1))
        out = priors * factor
    return np.clip(out, _PRIOR_FLOOR, _PRIOR_CEIL)


def _llr_of(priors: np.ndarray) -> np.ndarray:
    return np.log((1.0 - priors) / priors).astype(np.float32)


def _schedule_order(
    n_mech: int, config: DecoderConfig, decode_index: int = 0
) -> np.ndarray:
    if config.schedule == "serial":
        return np.arange(n_mech, dtype=np.int32)
    rng = np.random.default_rng(derive_seed(config.seed, "schedule", decode_index))
    return rng.permutation(n_mech).astype(np.int32)


# ---------------------------------------------------------------------------
# single-shot decoding
# ---------------------------------------------------------------------------


def _check_syndrome(dem: DetectorErrorModel, syndrome: np.ndarray) -> np.ndarray:
    syndrome = np.ascontiguousarray(syndrome, dtype=np.uint8)
    if syndrome.shape != (dem.detector_count,):
        raise ValueError(
            f"syndrome must have length {dem.detector_count}, got {syndrome.shape}"
        )
    return syndrome


def _outcome_from(
    graph: _TannerGraph, correction: np.ndarray, converged: bool, soft
) -> DecodeOutcome:
    cost = float(correction.astype(np.float64) @ graph.abs_nominal_llr)
    flips = (correction @ graph.obs_dense) & 1
    return DecodeOutcome(
        correction=correction,
        converged=converged,
        cost=cost,
        observable_flips=flips.astype(np.uint8),
        soft_llrs=soft,
    )


def bp_decode(
    dem: DetectorErrorModel,
    syndrome: np.ndarray,
    config: DecoderConfig | None = None,
    decode_index: int = 0,
) -> DecodeOutcome:
    """Min-sum BP with a serial mechanism schedule.

    Non-convergence is reported through the ``converged`` flag; the hard
    decision and soft posteriors are returned either way so callers can
    post-process.
    """
    config = config or DecoderConfig()
    graph = _graph(dem)
    syndrome = _check_syndrome(dem, syndrome)
    llr = _llr_of(_transformed_priors(graph.priors, config, decode_index))
    order = _schedule_order(graph.mechanism_count, config, decode_index)

    hard = np.empty((1, graph.mechanism_count), dtype=np.uint8)
    soft = np.empty((1, graph.mechanism_count), dtype=np.float32)
    conv = np.empty(1, dtype=np.int32)
    _bp_batch(
        graph.mech_ptr,
        graph.mech_dets,
        graph.det_ptr,
        graph.det_edges,
        llr[None, :],
        order[None, :],
        syndrome[None, :],
        config.bp_iterations,
        float(config.ms_scaling),
        hard,
        soft,
        conv,
    )
    return _outcome_from(graph, hard[0], bool(conv[0] >= 0), soft[0])


def lsd_postprocess(
    dem: DetectorErrorModel,
    syndrome: np.ndarray,
    soft_llrs: np.ndarray,
    config: DecoderConfig | None = None,
) -> DecodeOutcome:
    """Localized-statistics solve seeded from BP soft output.

    Clusters grow around nonzero syndrome bits, pulling in mechanisms in
    order of BP reliability until each cluster's local system becomes
    solvable, then every cluster is solved at minimum LLR cost with an
    exhaustive search of ``lsd_order`` kernel flips.
    """
    config = config or DecoderConfig()
    graph = _graph(dem)
    syndrome = _check_syndrome(dem, syndrome)
    correction = _lsd_correction(graph, syndrome, np.asarray(soft_llrs), config)
    if correction is None:
        zero = np.zeros(graph.mechanism_count, dtype=np.uint8)
        return _outcome_from(graph, zero, False, np.asarray(soft_llrs))
    return _outcome_from(graph, correction, True, np.asarray(soft_llrs))


class _Cluster:
    __slots__ = ("checks", "mask", "mechs", "hot", "valid")

    def __init__(self, dwords: int):
        self.checks: list[int] = []
        self.mask = np.zeros(dwords, dtype=np.uint64)
        self.mechs: list[int] = []
        self.hot = False
        self.valid = False


def _lsd_correction(
    graph: _TannerGraph,
    syndrome: np.ndarray,
    soft_llrs: np.ndarray,
    config: DecoderConfig,
) -> np.ndarray | None:
    n_mech = graph.mechanism_count
    n_det = graph.detector_count
    dwords = graph.det_words.shape[1]

    hot_checks = np.flatnonzero(syndrome)
    if hot_checks.size == 0:
        return np.zeros(n_mech, dtype=np.uint8)

    s_words = pack_rows(syndrome[None, :])[0]

    rank = np.empty(n_mech, dtype=np.int64)
    rank[np.argsort(soft_llrs, kind="stable")] = np.arange(n_mech)

    # union-find over cluster ids; clusters carry their checks and mechanisms
    parent: dict[int, int] = {}
    clusters: dict[int, _Cluster] = {}
    # per-cluster lazy min-heaps of (rank, mechanism): a check's neighbors
    # are pushed once when the check is absorbed, stale entries skipped on pop
    heaps: dict[int, list[tuple[int, int]]] = {}
    check_owner = np.full(n_det, -1, dtype=np.int64)
    det_mechs = graph.det_mechs
    det_ptr = graph.det_ptr
    added = np.zeros(n_mech, dtype=bool)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def absorb_check(root: int, c: int) -> None:
        cl = clusters[root]
        cl.checks.append(int(c))
        cl.mask[c >> 6] |= np.uint64(1) << np.uint64(c & 63)
        check_owner[c] = root
        heap = heaps[root]
        seg = det_mechs[det_ptr[c] : det_ptr[c + 1]]
        seg = seg[~added[seg]]
        for entry in zip(rank[seg].tolist(), seg.tolist()):
            heapq.heappush(heap, entry)

    next_id = 0
    for c in hot_checks:
        parent[next_id] = next_id
        clusters[next_id] = _Cluster(dwords)
        clusters[next_id].hot = True
        heaps[next_id] = []
        absorb_check(next_id, int(c))
        next_id += 1

    pivots = np.zeros((max(16, n_mech), dwords), dtype=np.uint64)
    pivot_of_col = np.full(n_det, -1, dtype=np.int32)
    npiv = 0

    work = np.empty(dwords, dtype=np.uint64)

    def revalidate(root: int) -> None:
        cl = clusters[root]
        np.bitwise_and(s_words, cl.mask, out=work)
        cl.valid = _reduce_vec(pivots, pivot_of_col, work, dwords) < 0

    while True:
        pending = [r for r in clusters if parent[r] == r and clusters[r].hot and not clusters[r].valid]
        if not pending:
            break
        chosen: list[tuple[int, int, int]] = []
        for root in pending:
            heap = heaps[root]
            while heap and added[heap[0][1]]:
                heapq.heappop(heap)
            if not heap:
                # the cluster's neighborhood is exhausted and still insoluble
                return None
            rk, best = heapq.heappop(heap)
            chosen.append((rk, best, root))
        touched: set[int] = set()
        for rk, j, origin in sorted(chosen):
            if added[j]:
                continue
            root = find(origin)
            if clusters[root].valid:
                # a merge already satisfied this cluster; keep the candidate
                heapq.heappush(heaps[root], (rk, j))
                continue
            added[j] = True
            cols = graph.mech_dets[graph.mech_ptr[j] : graph.mech_ptr[j + 1]]
            roots = {find(int(check_owner[c])) for c in cols if check_owner[c] >= 0}
            target = min(roots)
            for other in roots:
                if other == target:
                    continue
                parent[other] = target
                tc, oc = clusters[target], clusters[other]
                tc.checks.extend(oc.checks)
                tc.mask |= oc.mask
                tc.mechs.extend(oc.mechs)
                tc.hot = tc.hot or oc.hot
                for c in oc.checks:
                    check_owner[c] = target
                big, small = heaps[target], heaps[other]
                if len(small) > len(big):
                    big, small = small, big
                for entry in small:
                    if not added[entry[1]]:
                        heapq.heappush(big, entry)
                heaps[target] = big
                del heaps[other]
                del clusters[other]
            touched.discard(target)
            for other in roots:
                touched.discard(other)
            for c in cols:
                if check_owner[c] < 0:
                    absorb_check(target, int(c))
            clusters[target].mechs.append(int(j))
            np.copyto(work, graph.det_words[j])
            npiv = _insert_vec(pivots, pivot_of_col, npiv, work, dwords)
            touched.add(target)
        for root in touched:
            if parent[root] == root:
                revalidate(root)

    correction = np.zeros(n_mech, dtype=np.uint8)
    for root, cl in clusters.items():
        if parent[root] != root or not cl.hot or not cl.mechs:
            continue
        cols_idx = sorted(cl.mechs, key=lambda j: rank[j])
        rows = sorted(cl.checks)
        row_of = {c: i for i, c in enumerate(rows)}
        n_rows = len(rows)
        row_words = (n_rows + 63) // 64
        tail_words = (len(cols_idx) + 63) // 64
        cols = np.zeros((len(cols_idx), row_words + tail_words), dtype=np.uint64)
        for local_j, j in enumerate(cols_idx):
            for c in graph.mech_dets[graph.mech_ptr[j] : graph.mech_ptr[j + 1]]:
                i = row_of[int(c)]
                cols[local_j, i >> 6] ^= np.uint64(1) << np.uint64(i & 63)
            cols[local_j, row_words + (local_j >> 6)] ^= np.uint64(1) << np.uint64(
                local_j & 63
            )
        s_local = np.zeros(row_words, dtype=np.uint64)
        for c in rows:
            if syndrome[c]:
                i = row_of[c]
                s_local[i >> 6] ^= np.uint64(1) << np.uint64(i & 63)
        llr_local = graph.abs_nominal_llr[cols_idx]
        solved, picked, _ = _local_osd(
            cols, n_rows, row_words, s_local, llr_local, config.lsd_order
        )
        if not solved:
            return None
        for i in range(len(cols_idx)):
            if (picked[i >> 6] >> np.uint64(i & 63)) & np.uint64(1):
                correction[cols_idx[i]] = 1
    return correction


def bp_lsd_decode(
    dem: DetectorErrorModel,
    syndrome: np.ndarray,
    config: DecoderConfig | None = None,
    decode_index: int = 0,
) -> DecodeOutcome:
    """BP followed by the localized stage when BP leaves the syndrome open."""
    config = config or DecoderConfig()
    outcome = bp_decode(dem, syndrome, config, decode_index)
    if outcome.converged:
        return outcome
    return lsd_postprocess(dem, syndrome, outcome.soft_llrs, config)


# ---------------------------------------------------------------------------
# ensemble
# ---------------------------------------------------------------------------


def ensemble_variants(config: DecoderConfig | None = None) -> tuple[DecoderConfig, ...]:
    """The five configurations run per syndrome."""
    config = config or DecoderConfig()
    return (
        replace(config, schedule="serial", prior_transform="nominal"),
        replace(
            config,
            schedule="serial-randomized",
            prior_transform="nominal",
            seed=derive_seed(config.seed, "variant", 1),
        ),
        replace(config, schedule="serial", prior_transform="scale(0.8)"),
        replace(config, schedule="serial", prior_transform="scale(1.2)"),
        replace(
            config,
            schedule="serial",
            prior_transform="thermal",
            seed=derive_seed(config.seed, "variant", 4),
        ),
    )


def ensemble_decode(
    dem: DetectorErrorModel,
    syndrome: np.ndarray,
    config: DecoderConfig | None = None,
    decode_index: int = 0,
) -> DecodeOutcome:
    """Run the five-variant ensemble and keep the cheapest valid candidate.

    When no variant satisfies the syndrome the nominal variant's output
    is returned with ``converged`` False, recording a logical failure.
    """
    best: DecodeOutcome | None = None
    fallback: DecodeOutcome | None = None
    for variant in ensemble_variants(config):
        outcome = bp_lsd_decode(dem, syndrome, variant, decode_index)
        if fallback is None:
            fallback = outcome
        if outcome.converged and (best is None or outcome.cost < best.cost):
            best = outcome
    if best is not None:
        return best
    return replace(fallback, converged=False)


# ---------------------------------------------------------------------------
# batch decoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BatchDecodeResult:
    """Per-shot decode products plus ensemble bookkeeping."""

    method: str
    shots: int
    observable_bits: np.ndarray
    satisfied: np.ndarray
    costs: np.ndarray
    bp_observable_bits: np.ndarray | None = None
    bp_satisfied: np.ndarray | None = None

    @property
    def failures(self) -> int:
        return int(self.shots - self.satisfied.sum())

    @property
    def satisfied_fraction(self) -> float:
        return float(self.satisfied.mean()) if self.shots else 0.0

    def summary(self) -> dict:
        good = self.satisfied.astype(bool)
        return {
            "method": self.method,
            "shots": self.shots,
            "satisfied_fraction": self.satisfied_fraction,
            "failures": self.failures,
            "mean_cost": float(self.costs[good].mean()) if good.any() else None,
        }


_CHUNK = 256


def decode_batch(
    dem: DetectorErrorModel,
    detector_bits: np.ndarray,
    config: DecoderConfig | None = None,
    method: str = "ensemble",
    workers: int | None = None,
) -> BatchDecodeResult:
    """Decode packed detector bits shot by shot.

    ``method`` selects plain BP (``bp``), a single BP+LSD pipeline
    (``bp-lsd``) or the five-variant ensemble (``ensemble``).  For the
    ensemble the nominal variant's pre-LSD BP verdicts are kept alongside
    for paired comparisons.
    """
    if method not in ("bp", "bp-lsd", "ensemble"):
        raise ValueError(f"unknown decode method {method!r}")
    config = config or DecoderConfig()
    resolve_workers(workers)
    graph = _graph(dem)
    dwords = (dem.detector_count + 63) // 64
    detector_bits = np.ascontiguousarray(detector_bits, dtype=np.uint64)
    if detector_bits.ndim != 2 or detector_bits.shape[1] != dwords:
        raise ValueError(f"detector bits must be packed into {dwords} words per shot")
    shots = detector_bits.shape[0]
    n_obs = dem.observable_count
    owords = (n_obs + 63) // 64

    variants = ensemble_variants(config) if method == "ensemble" else (
        replace(config, schedule="serial", prior_transform="nominal"),
    )

    obs_words = np.zeros((shots, owords), dtype=np.uint64)
    satisfied = np.zeros(shots, dtype=np.uint8)
    costs = np.zeros(shots, dtype=np.float64)
    bp_obs = np.zeros((shots, owords), dtype=np.uint64) if method == "ensemble" else None
    bp_sat = np.zeros(shots, dtype=np.uint8) if method == "ensemble" else None

    nominal_order = np.arange(graph.mechanism_count, dtype=np.int32)[None, :]
    static_llr = {}
    for variant in variants:
        if variant.prior_transform != "thermal":
            static_llr[variant.prior_transform] = _llr_of(
                _transformed_priors(graph.priors, variant)
            )[None, :]

    for start in range(0, shots, _CHUNK):
        stop = min(start + _CHUNK, shots)
        count = stop - start
        dense = _unpack_bits(detector_bits[start:stop], dem.detector_count)
        best_cost = np.full(count, np.inf)
        chunk_obs = np.zeros((count, n_obs), dtype=np.uint8)
        chunk_sat = np.zeros(count, dtype=np.uint8)

        hard = np.empty((count, graph.mechanism_count), dtype=np.uint8)
        soft = np.empty((count, graph.mechanism_count), dtype=np.float32)
        conv = np.empty(count, dtype=np.int32)

        for v_idx, variant in enumerate(variants):
            if variant.prior_transform == "thermal":
                llr2d = np.stack(
                    [
                        _llr_of(_transformed_priors(graph.priors, variant, start + i))
                        for i in range(count)
                    ]
                )
            else:
                llr2d = static_llr[variant.prior_transform]
            if variant.schedule == "serial-randomized":
                order2d = np.stack(
                    [
                        _schedule_order(graph.mechanism_count, variant, start + i)
                        for i in range(count)
                    ]
                )
            else:
                order2d = nominal_order
            _bp_batch(
                graph.mech_ptr,
                graph.mech_dets,
                graph.det_ptr,
                graph.det_edges,
                llr2d,
                order2d,
                dense,
                variant.bp_iterations,
                float(variant.ms_scaling),
                hard,
                soft,
                conv,
            )
            for i in range(count):
                bp_ok = conv[i] >= 0
                if v_idx == 0 and method == "ensemble":
                    bp_sat[start + i] = np.uint8(bp_ok)
                    if bp_ok:
                        flips = ((hard[i] @ graph.obs_dense) & 1).astype(np.uint8)
                        bp_obs[start + i] = pack_rows(flips[None, :])[0]
                if bp_ok or method == "bp":
                    correction = hard[i]
                else:
                    correction = _lsd_correction(graph, dense[i], soft[i], variant)
                    if correction is None:
                        continue
                cost = float(correction.astype(np.float64) @ graph.abs_nominal_llr)
                if bp_ok or method != "bp":
                    if cost < best_cost[i]:
                        best_cost[i] = cost
                        chunk_sat[i] = 1
                        chunk_obs[i] = (correction @ graph.obs_dense) & 1
                else:
                    # plain BP reports its best-effort prediction, unsatisfied
                    best_cost[i] = cost
                    chunk_obs[i] = (correction @ graph.obs_dense) & 1

        satisfied[start:stop] = chunk_sat
        good = np.isfinite(best_cost)
        costs[start:stop][good] = best_cost[good]
        obs_words[start:stop] = pack_rows(chunk_obs) if n_obs else np.zeros(
            (count, owords), dtype=np.uint64
        )

    return BatchDecodeResult(
        method=method,
        shots=shots,
        observable_bits=obs_words,
        satisfied=satisfied,
        costs=costs,
        bp_observable_bits=bp_obs,
        bp_satisfied=bp_sat,
    )


def _unpack_bits(words: np.ndarray, ncols: int) -> np.ndarray:
    bits = np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")
    return np.ascontiguousarray(bits[:, :ncols])


# ---------------------------------------------------------------------------
# reference decoders
# ---------------------------------------------------------------------------


def bp_posteriors(
    h,
    syndrome: np.ndarray,
    prior: float = 0.05,
    config: DecoderConfig | None = None,
    decode_index: int = 0,
) -> DecodeOutcome:
    """Min-sum BP on a plain check system H x = s with a uniform prior.

    Unlike the error-model entry points, columns here are positions in a
    code word, so equal columns stay distinct variables. The returned
    outcome carries no observable information (``observable_flips`` is
    empty); its soft posteriors are the useful part for search callers.
    """
    dense = np.ascontiguousarray(_as_dense(h), dtype=np.uint8)
    n_rows, n_cols = dense.shape
    syndrome = np.ascontiguousarray(syndrome, dtype=np.uint8)
    if syndrome.shape != (n_rows,):
        raise ValueError(f"syndrome must have length {n_rows}")
    if not 0.0 < prior < 0.5:
        raise ValueError("prior must lie in (0, 0.5)")
    config = config or DecoderConfig()
    rows, cols = np.nonzero(dense.T)
    mech_ptr = np.zeros(n_cols + 1, dtype=np.int32)
    np.cumsum(np.bincount(rows, minlength=n_cols), out=mech_ptr[1:])
    mech_dets = cols.astype(np.int32)
    edge_order = np.lexsort((rows, cols))
    det_edges = edge_order.astype(np.int32)
    det_ptr = np.zeros(n_rows + 1, dtype=np.int32)
    np.cumsum(np.bincount(cols, minlength=n_rows), out=det_ptr[1:])
    llr = np.full(n_cols, math.log((1.0 - prior) / prior), dtype=np.float32)
    order = _schedule_order(n_cols, config, decode_index)

    hard = np.empty((1, n_cols), dtype=np.uint8)
    soft = np.empty((1, n_cols), dtype=np.float32)
    conv = np.empty(1, dtype=np.int32)
    _bp_batch(
        mech_ptr,
        mech_dets,
        det_ptr,
        det_edges,
        llr[None, :],
        order[None, :],
        syndrome[None, :],
        config.bp_iterations,
        float(config.ms_scaling),
        hard,
        soft,
        conv,
    )
    cost = float(np.abs(llr[hard[0] == 1]).sum())
    return DecodeOutcome(
        correction=hard[0],
        converged=bool(conv[0] >= 0),
        cost=cost,
        observable_flips=np.zeros(0, dtype=np.uint8),
        soft_llrs=soft[0],
    )


def matrix_decode(
    h,
    syndrome: np.ndarray,
    prior: float = 0.05,
    order: int = 0,
    soft_llrs: np.ndarray | None = None,
) -> np.ndarray | None:
    """Ordered-statistics solve of H x = s over GF(2).

    Columns are ranked most-error-likely first (by ``soft_llrs`` when
    given, else by index), eliminated greedily, and the order-``order``
    kernel neighborhood of the pivot solution is searched exhaustively.
    Returns the minimum-cost solution found, or None when insoluble.
    """
    dense = np.ascontiguousarray(_as_dense(h), dtype=np.uint8)
    n_rows, n_cols = dense.shape
    syndrome = np.ascontiguousarray(syndrome, dtype=np.uint8)
    if syndrome.shape != (n_rows,):
        raise ValueError(f"syndrome must have length {n_rows}")
    if not 0.0 < prior < 0.5:
        raise ValueError("prior must lie in (0, 0.5)")
    if soft_llrs is None:
        col_order = np.arange(n_cols)
    else:
        soft_llrs = np.asarray(soft_llrs)
        rank = np.empty(n_cols, dtype=np.int64)
        rank[np.argsort(soft_llrs, kind="stable")] = np.arange(n_cols)
        col_order = np.argsort(rank, kind="stable")
    row_words = (n_rows + 63) // 64
    tail_words = (n_cols + 63) // 64
    cols = np.zeros((n_cols, row_words + tail_words), dtype=np.uint64)
    packed_cols = pack_rows(dense.T[col_order])
    cols[:, :row_words] = packed_cols
    for local_j in range(n_cols):
        cols[local_j, row_words + (local_j >> 6)] ^= np.uint64(1) << np.uint64(
            local_j & 63
        )
    s_words = pack_rows(syndrome[None, :])[0]
    llr = abs(math.log((1.0 - prior) / prior))
    llr_local = np.full(n_cols, llr, dtype=np.float64)
    solved, picked, _ = _local_osd(cols, n_rows, row_words, s_words, llr_local, order)
    if not solved:
        return None
    out = np.zeros(n_cols, dtype=np.uint8)
    for i in range(n_cols):
        if (picked[i >> 6] >> np.uint64(i & 63)) & np.uint64(1):
            out[col_order[i]] = 1
    return out


def _as_dense(h) -> np.ndarray:
    if hasattr(h, "to_dense"):
        return h.to_dense()
    return np.atleast_2d(np.asarray(h))


class MaximumLikelihoodTable:
    """Exhaustive degenerate maximum-likelihood decoder for tiny models.

    Enumerates all error subsets, folds probabilities per (syndrome,
    observable) coset, and answers each syndrome with the heaviest
    coset's observable flips.
    """

    _LIMIT = 20

    def __init__(self, dem: DetectorErrorModel):
        m = dem.mechanism_count
        if m > self._LIMIT:
            raise ValueError(
                f"exhaustive table limited to {self._LIMIT} mechanisms, got {m}"
            )
        graph = _graph(dem)
        dwords = graph.det_words.shape[1]
        n_obs = dem.observable_count
        owords = (n_obs + 63) // 64
        obs_words = pack_rows(graph.obs_dense)

        size = 1 << m
        syn = np.zeros((size, dwords), dtype=np.uint64)
        obs = np.zeros((size, owords), dtype=np.uint64)
        logp = np.full(size, np.log1p(-graph.priors).sum())
        for b in range(m):
            half = 1 << b
            syn[half : 2 * half] = syn[:half] ^ graph.det_words[b]
            obs[half : 2 * half] = obs[:half] ^ obs_words[b]
            delta = math.log(graph.priors[b]) - math.log1p(-graph.priors[b])
            logp[half : 2 * half] = logp[:half] + delta

        joined = np.concatenate([syn, obs], axis=1)
        group = np.lexsort(joined.T[::-1]) if joined.shape[1] else np.arange(size)
        ordered = joined[group]
        fresh = np.ones(size, dtype=bool)
        if size > 1 and joined.shape[1]:
            fresh[1:] = (ordered[1:] != ordered[:-1]).any(axis=1)
        starts = np.flatnonzero(fresh)
        masses = np.add.reduceat(np.exp(logp)[group], starts)

        self._table: dict[bytes, tuple[float, bytes]] = {}
        for pos, mass in zip(starts, masses):
            s_key = ordered[pos, :dwords].tobytes()
            o_key = ordered[pos, dwords:].tobytes()
            prev = self._table.get(s_key)
            if prev is None or mass > prev[0]:
                self._table[s_key] = (float(mass), o_key)
        self._dwords = dwords
        self._owords = owords

    def decode_words(self, syndrome_words: np.ndarray) -> np.ndarray | None:
        entry = self._table.get(
            np.ascontiguousarray(syndrome_words, dtype=np.uint64).tobytes()
        )
        if entry is None:
            return None
        return np.frombuffer(entry[1], dtype=np.uint64).copy()

    def failure_count(self, batch: SampleBatch) -> int:
        """Shots where the ML answer misses the true observable flips."""
        failures = 0
        for i in range(batch.shots):
            predicted = self.decode_words(batch.detector_bits[i])
            if predicted is None or not np.array_equal(
                predicted, batch.observable_bits[i]
            ):
                failures += 1
        return failures
