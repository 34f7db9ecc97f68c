"""Unit tests for the packed GF(2) core.

Rank, kernel, and solve are checked against an independent big-integer
elimination oracle, so the packed kernel and the oracle would have to be
wrong in the same way for a defect to slip through.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfab.gf2 import BinaryMatrix, RingElement, dagger_matrix, lift_matrix, logical_basis
from qfab.util import pack_rows, unpack_rows


def _int_rows(dense: np.ndarray) -> list[int]:
    return [
        int.from_bytes(np.packbits(row, bitorder="little").tobytes(), "little")
        for row in np.atleast_2d(dense)
    ]


def _rank_oracle(dense: np.ndarray) -> int:
    """Gaussian elimination on python ints, reducing by highest set bit."""
    basis: dict[int, int] = {}
    rank = 0
    for v in _int_rows(dense):
        while v:
            msb = v.bit_length() - 1
            if msb in basis:
                v ^= basis[msb]
            else:
                basis[msb] = v
                rank += 1
                break
    return rank


def _random_dense(rng: np.random.Generator, nrows: int, ncols: int, density: float = 0.5):
    return (rng.random((nrows, ncols)) < density).astype(np.uint8)


# ---------------------------------------------------------------------------
# packing
# ---------------------------------------------------------------------------


@given(
    nrows=st.integers(1, 7),
    ncols=st.integers(1, 200),
    seed=st.integers(0, 2**32 - 1),
)
@settings(max_examples=60, deadline=None)
def test_pack_roundtrip(nrows, ncols, seed):
    rng = np.random.default_rng(seed)
    dense = _random_dense(rng, nrows, ncols)
    assert np.array_equal(unpack_rows(pack_rows(dense), ncols), dense)


def test_pack_bit_positions():
    # bit c of a row lands in word c // 64 at position c % 64, little-endian
    dense = np.zeros((1, 130), dtype=np.uint8)
    dense[0, 0] = 1
    dense[0, 65] = 1
    dense[0, 129] = 1
    words = pack_rows(dense)
    assert words.shape == (1, 3)
    assert words[0, 0] == 1
    assert words[0, 1] == 2
    assert words[0, 2] == 2


# ---------------------------------------------------------------------------
# elimination
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("shape", [(1, 1), (5, 9), (9, 5), (40, 40), (30, 200), (200, 30)])
def test_rank_matches_int_oracle(shape):
    rng = np.random.default_rng(7)
    for density in (0.1, 0.5):
        dense = _random_dense(rng, *shape, density=density)
        assert BinaryMatrix.from_dense(dense).rank() == _rank_oracle(dense)


def test_rref_known_example():
    m = BinaryMatrix.from_dense(
        [
            [1, 1, 0, 1],
            [0, 1, 1, 1],
            [1, 0, 1, 0],
        ]
    )
    R, pivots = m.rref()
    assert pivots == (0, 1)
    assert np.array_equal(
        R.to_dense(),
        [
            [1, 0, 1, 0],
            [0, 1, 1, 1],
            [0, 0, 0, 0],
        ],
    )


def test_rref_idempotent_and_rank_preserving():
    rng = np.random.default_rng(11)
    dense = _random_dense(rng, 25, 70)
    m = BinaryMatrix.from_dense(dense)
    R, pivots = m.rref()
    R2, pivots2 = R.rref()
    assert R == R2 and pivots == pivots2
    assert len(pivots) == _rank_oracle(dense)


def test_kernel_basis_properties():
    rng = np.random.default_rng(3)
    for nrows, ncols in [(6, 6), (10, 25), (25, 10), (40, 90)]:
        m = BinaryMatrix.from_dense(_random_dense(rng, nrows, ncols))
        ker = m.kernel_basis()
        assert ker.nrows == ncols - m.rank()
        if ker.nrows:
            assert (m @ ker.transpose()).is_zero()
            assert ker.rank() == ker.nrows


def test_solve_consistent_and_inconsistent():
    rng = np.random.default_rng(5)
    m = BinaryMatrix.from_dense(_random_dense(rng, 12, 20))
    x_true = (rng.random(20) < 0.5).astype(np.uint8)
    rhs = m.mul_vec(x_true)
    x = m.solve(rhs)
    assert x is not None
    assert np.array_equal(m.mul_vec(x), rhs)

    # a target outside the column space must be rejected
    tall = BinaryMatrix.from_dense(np.eye(4, 2, dtype=np.uint8))
    assert tall.solve(np.array([0, 0, 1, 1], dtype=np.uint8)) is None


def test_inverse_roundtrip():
    rng = np.random.default_rng(13)
    n = 30
    while True:
        m = BinaryMatrix.from_dense(_random_dense(rng, n, n))
        if m.rank() == n:
            break
    inv = m.inverse()
    assert m @ inv == BinaryMatrix.identity(n)
    assert inv @ m == BinaryMatrix.identity(n)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_rank_invariant_under_row_shuffle(seed):
    rng = np.random.default_rng(seed)
    dense = _random_dense(rng, 12, 18)
    m = BinaryMatrix.from_dense(dense)
    shuffled = BinaryMatrix.from_dense(rng.permutation(dense, axis=0))
    assert m.rank() == shuffled.rank()


# ---------------------------------------------------------------------------
# products and stacking
# ---------------------------------------------------------------------------


def test_matmul_matches_dense():
    rng = np.random.default_rng(17)
    a = _random_dense(rng, 9, 40)
    b = _random_dense(rng, 40, 70)
    got = (BinaryMatrix.from_dense(a) @ BinaryMatrix.from_dense(b)).to_dense()
    assert np.array_equal(got, (a.astype(int) @ b.astype(int)) % 2)


def test_mul_vec_matches_dense():
    rng = np.random.default_rng(19)
    a = _random_dense(rng, 15, 130)
    v = (rng.random(130) < 0.5).astype(np.uint8)
    got = BinaryMatrix.from_dense(a).mul_vec(v)
    assert np.array_equal(got, (a.astype(int) @ v) % 2)


def test_transpose_and_stacking():
    rng = np.random.default_rng(23)
    a = _random_dense(rng, 7, 100)
    b = _random_dense(rng, 7, 29)
    ma, mb = BinaryMatrix.from_dense(a), BinaryMatrix.from_dense(b)
    assert np.array_equal(ma.transpose().to_dense(), a.T)
    assert np.array_equal(
        BinaryMatrix.hstack([ma, mb]).to_dense(), np.concatenate([a, b], axis=1)
    )
    c = _random_dense(rng, 4, 100)
    assert np.array_equal(
        BinaryMatrix.vstack([ma, BinaryMatrix.from_dense(c)]).to_dense(),
        np.concatenate([a, c], axis=0),
    )
    # unaligned hstack goes through the dense path
    assert np.array_equal(
        BinaryMatrix.hstack([mb, ma]).to_dense(), np.concatenate([b, a], axis=1)
    )


def test_row_and_col_weights():
    m = BinaryMatrix.from_dense([[1, 0, 1, 1], [0, 0, 1, 0]])
    assert m.row_weights().tolist() == [3, 1]
    assert m.col_weights().tolist() == [1, 0, 2, 1]


# ---------------------------------------------------------------------------
# ring elements and lifts
# ---------------------------------------------------------------------------


def test_lift_worked_example():
    # multiplication by x^2 on F2[x]/(x^4 + 1) is the double cyclic shift
    m = RingElement.monomial((4,), 2).lift().to_dense()
    expect = np.zeros((4, 4), dtype=np.uint8)
    for i in range(4):
        expect[i, (i + 2) % 4] = 1
    assert np.array_equal(m, expect)


@given(
    l=st.integers(2, 9),
    seed=st.integers(0, 2**32 - 1),
)
@settings(max_examples=60, deadline=None)
def test_lift_is_ring_homomorphism_univariate(l, seed):
    rng = np.random.default_rng(seed)

    def rand_elem():
        exps = rng.choice(l, size=rng.integers(0, min(l, 3) + 1), replace=False)
        return RingElement((l,), frozenset((int(e),) for e in exps))

    a, b = rand_elem(), rand_elem()
    assert (a * b).lift() == a.lift() @ b.lift()
    assert (a + b).lift() == a.lift() + b.lift()
    assert a.dagger().lift() == a.lift().transpose()


def test_lift_bivariate_kronecker_structure():
    # x^a y^b lifts to kron(shift_l^a, shift_m^b)
    l, m = 5, 3
    a, b = 2, 1
    lifted = RingElement.monomial((l, m), a, b).lift().to_dense()
    sx = np.zeros((l, l), dtype=np.uint8)
    for i in range(l):
        sx[i, (i + a) % l] = 1
    sy = np.zeros((m, m), dtype=np.uint8)
    for j in range(m):
        sy[j, (j + b) % m] = 1
    assert np.array_equal(lifted, np.kron(sx, sy))


def test_lift_bivariate_homomorphism():
    rng = np.random.default_rng(29)
    l, m = 6, 4

    def rand_elem():
        n_terms = rng.integers(1, 4)
        terms = {(int(rng.integers(l)), int(rng.integers(m))) for _ in range(n_terms)}
        return RingElement((l, m), frozenset(terms))

    for _ in range(20):
        a, b = rand_elem(), rand_elem()
        assert (a * b).lift() == a.lift() @ b.lift()
        assert a.dagger().lift() == a.lift().transpose()


def test_ring_addition_cancels():
    x = RingElement.monomial((5,), 2)
    assert (x + x).weight == 0
    assert (x + x) == RingElement.zero((5,))


def test_lift_matrix_and_dagger():
    l = 7
    rng = np.random.default_rng(31)
    entries = [
        [
            RingElement((l,), frozenset((int(e),) for e in rng.choice(l, size=2, replace=False)))
            for _ in range(3)
        ]
        for _ in range(2)
    ]
    lifted = lift_matrix(entries)
    assert lifted.shape == (2 * l, 3 * l)
    # block (i, j) is the lift of entry (i, j)
    dense = lifted.to_dense()
    for i in range(2):
        for j in range(3):
            block = dense[i * l : (i + 1) * l, j * l : (j + 1) * l]
            assert np.array_equal(block, entries[i][j].lift().to_dense())
    # the dagger lifts to the transpose
    assert lift_matrix(dagger_matrix(entries)) == lifted.transpose()


# ---------------------------------------------------------------------------
# logical bases
# ---------------------------------------------------------------------------

_HAMMING = np.array(
    [
        [0, 0, 0, 1, 1, 1, 1],
        [0, 1, 1, 0, 0, 1, 1],
        [1, 0, 1, 0, 1, 0, 1],
    ],
    dtype=np.uint8,
)


def test_logical_basis_self_dual_css():
    hx = BinaryMatrix.from_dense(_HAMMING)
    hz = BinaryMatrix.from_dense(_HAMMING)
    lx, lz = logical_basis(hx, hz)
    assert lx.shape == (1, 7) and lz.shape == (1, 7)
    assert (hz @ lx.transpose()).is_zero()
    assert (hx @ lz.transpose()).is_zero()
    assert lx @ lz.transpose() == BinaryMatrix.identity(1)
    # representatives sit outside the stabilizer row space
    stacked = BinaryMatrix.vstack([hx, lx])
    assert stacked.rank() == hx.rank() + 1


def test_logical_basis_two_logicals():
    h = BinaryMatrix.from_dense([[1, 1, 1, 1]])
    lx, lz = logical_basis(h, h)
    assert lx.nrows == 2 and lz.nrows == 2
    assert lx @ lz.transpose() == BinaryMatrix.identity(2)
    assert (h @ lx.transpose()).is_zero()
    assert (h @ lz.transpose()).is_zero()


def test_logical_basis_random_css_pairing():
    # random CSS pair: hz rows drawn from the kernel of hx
    rng = np.random.default_rng(41)
    n = 16
    hx = BinaryMatrix.from_dense((rng.random((5, n)) < 0.4).astype(np.uint8))
    ker = hx.kernel_basis()
    pick = rng.choice(ker.nrows, size=4, replace=False)
    hz = ker.select_rows(pick)
    lx, lz = logical_basis(hx, hz)
    k = n - hx.rank() - hz.rank()
    assert lx.nrows == k == lz.nrows
    assert lx @ lz.transpose() == BinaryMatrix.identity(k)
    assert (hz @ lx.transpose()).is_zero()
    assert (hx @ lz.transpose()).is_zero()
