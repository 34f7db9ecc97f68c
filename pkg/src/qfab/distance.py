"""Randomized upper bounds on CSS code distance.

Two searches produce distance witnesses. The decoder-assisted search draws
a random logical operator, pins an anticommutation constraint onto the
check system, and asks the BP stack plus an ordered-statistics sweep for
the lightest vector satisfying it. The information-set search reads the
kernel basis induced by a random column permutation, whose elimination
localizes basis vectors on few columns so that light codewords surface
after enough draws.

Every witness is a genuine logical operator (it satisfies the checks and
acts on at least one encoded qubit), so the reported bound can only ever
overestimate the true distance, never undercut it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codes import CssCode
from .decoder import DecoderConfig, bp_posteriors
from .gf2 import BinaryMatrix

__all__ = [
    "DistanceEstimate",
    "estimate_distance_decoder",
    "estimate_distance_infoset",
    "lighten_representative",
]

DEFAULT_TRIALS = 25_000

# uniform prior fed to BP on the extended system; only the induced
# reliability ranking matters, not the value itself
_SEARCH_PRIOR = 0.05

# free columns eligible for pairwise sweeps in the ordered-statistics stage
_PAIR_WINDOW = 15


@dataclass(frozen=True)
class DistanceEstimate:
    """Best distance upper bound found by a randomized search.

    `d_upper` is the Hamming weight of `witness`, the lightest vector seen
    across all trials; both are None when no trial produced one.
    `weight_histogram` counts, for each weight, the trials whose best find
    had that weight.
    """

    d_upper: int | None
    witness: np.ndarray | None
    trials: int
    seed: int
    weight_histogram: dict[int, int] = field(default_factory=dict, repr=False)


def _improves(current: np.ndarray | None, candidate: np.ndarray) -> bool:
    # deterministic reduction: weight first, then lexicographic bits
    if current is None:
        return True
    w_cur, w_new = int(current.sum()), int(candidate.sum())
    if w_new != w_cur:
        return w_new < w_cur
    return candidate.tolist() < current.tolist()


def _osd_sweep(
    hd: np.ndarray, e: np.ndarray, soft: np.ndarray, window: int = _PAIR_WINDOW
) -> np.ndarray | None:
    """Ordered-statistics candidates for [h; e] v = (0, ..., 0, 1).

    Columns are eliminated most-error-likely first per the BP soft output;
    the pivot solution is then swept against every single kernel vector
    and against pairs drawn from the `window` least-reliable free columns.
    Returns the lightest solution, or None when the system is insoluble.
    """
    m, n = hd.shape
    order = np.argsort(soft, kind="stable")
    aug = np.empty((m + 1, n + 1), dtype=np.uint8)
    aug[:m, :n] = hd[:, order]
    aug[m, :n] = e[order]
    aug[:, n] = 0
    aug[m, n] = 1
    reduced, pivots = BinaryMatrix.from_dense(aug).rref()
    piv = np.asarray(pivots, dtype=np.int64)
    if piv.size and piv[-1] == n:
        return None
    rd = reduced.to_dense()[: piv.size]
    x0 = np.zeros(n, dtype=np.uint8)
    x0[piv] = rd[:, n]
    free = np.setdiff1d(np.arange(n), piv)
    if free.size == 0:
        best = x0
    else:
        kernel = np.zeros((free.size, n), dtype=np.uint8)
        kernel[np.arange(free.size), free] = 1
        kernel[:, piv] = rd[:, free].T
        blocks = [x0[None, :], x0[None, :] ^ kernel]
        w = min(window, free.size)
        if w >= 2:
            head = kernel[:w]
            iu, ju = np.triu_indices(w, k=1)
            blocks.append(x0[None, :] ^ head[iu] ^ head[ju])
        cands = np.concatenate(blocks, axis=0)
        weights = cands.sum(axis=1)
        light = cands[weights == weights.min()]
        best = min((row for row in light), key=lambda r: r.tolist())
    out = np.zeros(n, dtype=np.uint8)
    out[order] = best
    return out


def estimate_distance_decoder(
    code: CssCode,
    basis: str,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    config: DecoderConfig | None = None,
) -> DistanceEstimate:
    """Decoder-assisted search for light logical operators of one type.

    Per trial a nonzero logical combination of the opposite type is drawn
    and the extended check system that forces anticommutation with it is
    decoded: BP supplies the reliability ranking and a converged hard
    decision; the ordered-statistics sweep supplies more candidates. The
    Z basis bounds the Z distance (vectors in ker hx), the X basis the X
    distance. Absent estimate (all-None) when no trial yields a witness.
    """
    if basis not in ("X", "Z"):
        raise ValueError(f"basis must be X or Z, got {basis!r}")
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    lx, lz = code.logicals()
    h, pair = (code.hx, lx) if basis == "Z" else (code.hz, lz)
    if code.k == 0:
        return DistanceEstimate(None, None, trials, seed)
    hd = h.to_dense()
    pd = pair.to_dense().astype(np.int64)
    m, n = hd.shape
    extended = np.empty((m + 1, n), dtype=np.uint8)
    extended[:m] = hd
    syndrome = np.zeros(m + 1, dtype=np.uint8)
    syndrome[m] = 1
    config = config or DecoderConfig()
    rng = np.random.default_rng(seed)
    best: np.ndarray | None = None
    histogram: dict[int, int] = {}
    for _ in range(trials):
        c = rng.integers(0, 2, size=code.k, dtype=np.int64)
        while not c.any():
            c = rng.integers(0, 2, size=code.k, dtype=np.int64)
        e = ((c @ pd) & 1).astype(np.uint8)
        extended[m] = e
        outcome = bp_posteriors(extended, syndrome, _SEARCH_PRIOR, config)
        trial_best: np.ndarray | None = None
        if outcome.converged:
            trial_best = outcome.correction.astype(np.uint8)
        swept = _osd_sweep(hd, e, np.asarray(outcome.soft_llrs))
        if swept is not None and _improves(trial_best, swept):
            trial_best = swept
        if trial_best is None:
            continue
        weight = int(trial_best.sum())
        histogram[weight] = histogram.get(weight, 0) + 1
        if _improves(best, trial_best):
            best = trial_best
    if best is None:
        return DistanceEstimate(None, None, trials, seed, histogram)
    if ((hd.astype(np.int64) @ best) & 1).any() or not ((pd @ best) & 1).any():
        raise AssertionError("witness fails the check or logical-action test")
    return DistanceEstimate(int(best.sum()), best, trials, seed, histogram)


def estimate_distance_infoset(
    h: BinaryMatrix,
    l: BinaryMatrix,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
) -> DistanceEstimate:
    """Information-set search over ker(h) for rows acting on `l`.

    Each trial permutes the columns, eliminates, and scans the localized
    kernel basis for vectors with nonzero pairing against the rows of
    `l`; the lightest such vector across trials is the witness. Pass the
    X-check matrix with the logical X basis to bound the Z distance, and
    vice versa.
    """
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    if h.ncols != l.ncols:
        raise ValueError("check and logical matrices must share a column count")
    n = h.ncols
    hd = h.to_dense()
    ld = l.to_dense()
    rng = np.random.default_rng(seed)
    best: np.ndarray | None = None
    histogram: dict[int, int] = {}
    for _ in range(trials):
        perm = rng.permutation(n)
        kernel = BinaryMatrix.from_dense(hd[:, perm]).kernel_basis()
        if kernel.nrows == 0:
            break
        pairing = kernel @ BinaryMatrix.from_dense(ld[:, perm]).transpose()
        acting = pairing.row_weights() > 0
        if not acting.any():
            break
        rows = kernel.to_dense()[acting]
        weights = rows.sum(axis=1)
        lightest = int(weights.min())
        histogram[lightest] = histogram.get(lightest, 0) + 1
        for row in rows[weights == lightest]:
            candidate = np.zeros(n, dtype=np.uint8)
            candidate[perm] = row
            if _improves(best, candidate):
                best = candidate
    if best is None:
        return DistanceEstimate(None, None, trials, seed, histogram)
    return DistanceEstimate(int(best.sum()), best, trials, seed, histogram)


def lighten_representative(
    h: BinaryMatrix,
    vector: np.ndarray,
    trials: int = 2_000,
    seed: int = 0,
) -> np.ndarray:
    """Reduce a vector modulo the row space of `h` toward minimum weight.

    Randomized information-set descent: per trial the rows are eliminated
    under a fresh column permutation and the vector is cleared on every
    pivot column, concentrating its support on the complement; single-row
    offsets of that reduction are swept too. The class of the vector is
    preserved exactly. Returns the lightest equivalent found, which is
    the input itself when nothing lighter shows up.
    """
    v = (np.asarray(vector).ravel() & 1).astype(np.uint8)
    n = h.ncols
    if v.shape != (n,):
        raise ValueError(f"vector must have length {n}")
    hd = h.to_dense()
    rng = np.random.default_rng(seed)
    best = v.copy()
    for _ in range(trials):
        perm = rng.permutation(n)
        reduced, pivots = BinaryMatrix.from_dense(hd[:, perm]).rref()
        piv = np.asarray(pivots, dtype=np.int64)
        if piv.size == 0:
            break
        rd = reduced.to_dense()[: piv.size]
        cand = v[perm]
        mask = cand[piv].astype(bool)
        if mask.any():
            cand = cand ^ (rd[mask].sum(axis=0, dtype=np.int64) & 1).astype(np.uint8)
        offsets = cand[None, :] ^ rd
        lightest = offsets[offsets.sum(axis=1).argmin()]
        if lightest.sum() < cand.sum():
            cand = lightest
        unperm = np.zeros(n, dtype=np.uint8)
        unperm[perm] = cand
        if _improves(best, unperm):
            best = unperm
    return best
