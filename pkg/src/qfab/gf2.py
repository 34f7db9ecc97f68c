"""Dense GF(2) linear algebra on bit-packed matrices, plus group-algebra lifts.

`BinaryMatrix` stores rows as little-endian uint64 words and provides the
elimination-based operations the rest of the package leans on: rank, reduced
row echelon form, kernel bases, linear solves, and products. Elimination runs
in a compiled kernel so that matrices with a few thousand rows and columns
reduce in well under a second.

`RingElement` models elements of F2[x]/(x^l + 1) and of the bivariate
quotient F2[x, y]/(x^l + 1, y^m + 1). Its `lift` maps a ring element to the
corresponding (block of a) permutation-sum matrix; `lift` is a ring
homomorphism and sends the antipode (exponent negation) to the transpose,
which is what makes the two-sided check-matrix constructions commute.

Matrices are treated as immutable once constructed; no method mutates its
receiver.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
from numba import njit

from .util import pack_rows, popcount_words, unpack_rows

__all__ = [
    "BinaryMatrix",
    "RingElement",
    "lift_matrix",
    "dagger_matrix",
    "logical_basis",
]


# ---------------------------------------------------------------------------
# elimination kernel
# ---------------------------------------------------------------------------


@njit(cache=True)
def _rref_inplace(words: np.ndarray, ncols: int) -> np.ndarray:
    """Reduce `words` to reduced row echelon form in place; return pivot cols."""
    nrows, nwords = words.shape
    pivots = np.empty(min(nrows, ncols), dtype=np.int64)
    npiv = 0
    r = 0
    one = np.uint64(1)
    for c in range(ncols):
        if r >= nrows:
            break
        w = c >> 6
        b = np.uint64(c & 63)
        p = -1
        for i in range(r, nrows):
            if (words[i, w] >> b) & one:
                p = i
                break
        if p < 0:
            continue
        if p != r:
            for j in range(nwords):
                t = words[r, j]
                words[r, j] = words[p, j]
                words[p, j] = t
        for i in range(nrows):
            if i != r and ((words[i, w] >> b) & one):
                for j in range(nwords):
                    words[i, j] ^= words[r, j]
        pivots[npiv] = c
        npiv += 1
        r += 1
    return pivots[:npiv]


class BinaryMatrix:
    """A dense matrix over GF(2), rows packed into uint64 words.

    Attributes:
        words: uint64 array of shape (nrows, nwords); bit c of row i sits in
            words[i, c // 64] at bit position c % 64.
        ncols: logical column count (the padding bits are always zero).
    """

    __slots__ = ("words", "ncols")

    def __init__(self, words: np.ndarray, ncols: int):
        words = np.atleast_2d(np.ascontiguousarray(words, dtype=np.uint64))
        expected = (ncols + 63) // 64
        if words.shape[1] != expected:
            raise ValueError(f"need {expected} words for {ncols} columns, got {words.shape[1]}")
        self.words = words
        self.ncols = int(ncols)

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "BinaryMatrix":
        dense = np.atleast_2d(np.asarray(dense))
        return cls(pack_rows(dense), dense.shape[1])

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "BinaryMatrix":
        return cls(np.zeros((nrows, (ncols + 63) // 64), dtype=np.uint64), ncols)

    @classmethod
    def identity(cls, n: int) -> "BinaryMatrix":
        m = cls.zeros(n, n)
        idx = np.arange(n)
        m.words[idx, idx >> 6] = np.uint64(1) << (idx % 64).astype(np.uint64)
        return m

    @classmethod
    def from_coords(cls, nrows: int, ncols: int, rows: np.ndarray, cols: np.ndarray) -> "BinaryMatrix":
        """Build from coordinate lists; repeated coordinates cancel mod 2."""
        m = cls.zeros(nrows, ncols)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        bits = np.uint64(1) << (cols % 64).astype(np.uint64)
        np.bitwise_xor.at(m.words, (rows, cols >> 6), bits)
        return m

    # -- basic queries ------------------------------------------------------

    @property
    def nrows(self) -> int:
        return self.words.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    def to_dense(self) -> np.ndarray:
        return unpack_rows(self.words, self.ncols)

    def get(self, i: int, j: int) -> int:
        return int((self.words[i, j >> 6] >> np.uint64(j % 64)) & np.uint64(1))

    def copy(self) -> "BinaryMatrix":
        return BinaryMatrix(self.words.copy(), self.ncols)

    def is_zero(self) -> bool:
        return not self.words.any()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMatrix):
            return NotImplemented
        return self.ncols == other.ncols and np.array_equal(self.words, other.words)

    def __repr__(self) -> str:
        return f"BinaryMatrix({self.nrows}x{self.ncols})"

    def row_weights(self) -> np.ndarray:
        return popcount_words(self.words)

    def col_weights(self) -> np.ndarray:
        return self.to_dense().sum(axis=0, dtype=np.int64)

    # -- structural ops -----------------------------------------------------

    def transpose(self) -> "BinaryMatrix":
        return BinaryMatrix.from_dense(self.to_dense().T)

    @staticmethod
    def vstack(blocks: list["BinaryMatrix"]) -> "BinaryMatrix":
        ncols = blocks[0].ncols
        if any(b.ncols != ncols for b in blocks):
            raise ValueError("vstack needs equal column counts")
        return BinaryMatrix(np.concatenate([b.words for b in blocks], axis=0), ncols)

    @staticmethod
    def hstack(blocks: list["BinaryMatrix"]) -> "BinaryMatrix":
        nrows = blocks[0].nrows
        if any(b.nrows != nrows for b in blocks):
            raise ValueError("hstack needs equal row counts")
        # word-aligned fast path; otherwise go through dense form
        if all(b.ncols % 64 == 0 for b in blocks[:-1]):
            words = np.concatenate([b.words for b in blocks], axis=1)
            return BinaryMatrix(words, sum(b.ncols for b in blocks))
        dense = np.concatenate([b.to_dense() for b in blocks], axis=1)
        return BinaryMatrix.from_dense(dense)

    def select_rows(self, idx) -> "BinaryMatrix":
        return BinaryMatrix(self.words[np.asarray(idx, dtype=np.int64)], self.ncols)

    def select_columns(self, idx) -> "BinaryMatrix":
        return BinaryMatrix.from_dense(self.to_dense()[:, np.asarray(idx, dtype=np.int64)])

    # -- algebra ------------------------------------------------------------

    def __add__(self, other: "BinaryMatrix") -> "BinaryMatrix":
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return BinaryMatrix(self.words ^ other.words, self.ncols)

    def __matmul__(self, other: "BinaryMatrix") -> "BinaryMatrix":
        if self.ncols != other.nrows:
            raise ValueError("inner dimension mismatch")
        out = np.zeros((self.nrows, other.words.shape[1]), dtype=np.uint64)
        dense = self.to_dense()
        for i in range(self.nrows):
            (cols,) = np.nonzero(dense[i])
            if cols.size:
                out[i] = np.bitwise_xor.reduce(other.words[cols], axis=0)
        return BinaryMatrix(out, other.ncols)

    def mul_vec(self, vec: np.ndarray) -> np.ndarray:
        """Matrix-vector product over GF(2); `vec` is a 0/1 array of length ncols."""
        packed = pack_rows(np.asarray(vec, dtype=np.uint8)[None, :])[0]
        return (np.bitwise_count(self.words & packed[None, :]).sum(axis=1) & 1).astype(np.uint8)

    # -- elimination --------------------------------------------------------

    def rref(self) -> tuple["BinaryMatrix", tuple[int, ...]]:
        """Reduced row echelon form and the pivot column indices."""
        words = self.words.copy()
        if words.shape[1] == 0:
            return BinaryMatrix(words, self.ncols), ()
        pivots = _rref_inplace(words, self.ncols)
        return BinaryMatrix(words, self.ncols), tuple(int(p) for p in pivots)

    def rank(self) -> int:
        if self.words.shape[1] == 0 or self.nrows == 0:
            return 0
        words = self.words.copy()
        return len(_rref_inplace(words, self.ncols))

    def kernel_basis(self) -> "BinaryMatrix":
        """Rows form a basis of the right kernel {v : self @ v^T = 0}."""
        R, pivots = self.rref()
        pivot_set = set(pivots)
        free = [c for c in range(self.ncols) if c not in pivot_set]
        dense_R = R.to_dense()
        basis = np.zeros((len(free), self.ncols), dtype=np.uint8)
        for idx, f in enumerate(free):
            basis[idx, f] = 1
            for r, p in enumerate(pivots):
                basis[idx, p] = dense_R[r, f]
        return BinaryMatrix.from_dense(basis) if free else BinaryMatrix.zeros(0, self.ncols)

    def solve(self, rhs: np.ndarray) -> np.ndarray | None:
        """One solution x of self @ x = rhs (column semantics), or None."""
        rhs = np.asarray(rhs, dtype=np.uint8).reshape(-1)
        if rhs.shape[0] != self.nrows:
            raise ValueError("rhs length mismatch")
        aug = BinaryMatrix.hstack([self, BinaryMatrix.from_dense(rhs[:, None])])
        R, pivots = aug.rref()
        if pivots and pivots[-1] == self.ncols:
            return None
        x = np.zeros(self.ncols, dtype=np.uint8)
        dense_R = R.to_dense()
        for r, p in enumerate(pivots):
            x[p] = dense_R[r, self.ncols]
        return x

    def inverse(self) -> "BinaryMatrix":
        """Inverse of a square invertible matrix."""
        n = self.nrows
        if self.ncols != n:
            raise ValueError("inverse needs a square matrix")
        aug = BinaryMatrix.hstack([self, BinaryMatrix.identity(n)])
        R, pivots = aug.rref()
        if list(pivots[:n]) != list(range(n)):
            raise ValueError("matrix is singular")
        return R.select_columns(range(n, 2 * n))


class _Eliminator:
    """Incremental row-space tracker: feed rows, learn which extend the span."""

    def __init__(self, ncols: int):
        self.ncols = ncols
        self.nwords = (ncols + 63) // 64
        self.pivot_cols: list[int] = []
        self.rows: list[np.ndarray] = []

    def reduce(self, row_words: np.ndarray) -> np.ndarray:
        row = row_words.copy()
        for col, stored in zip(self.pivot_cols, self.rows):
            if (row[col >> 6] >> np.uint64(col % 64)) & np.uint64(1):
                row ^= stored
        return row

    def add(self, row_words: np.ndarray) -> bool:
        """Reduce a packed row against the span; absorb it if independent."""
        row = self.reduce(row_words)
        nz = np.nonzero(row)[0]
        if nz.size == 0:
            return False
        w = int(nz[0])
        word = int(row[w])
        col = w * 64 + ((word & -word).bit_length() - 1)
        self.pivot_cols.append(col)
        self.rows.append(row)
        return True


# ---------------------------------------------------------------------------
# group-algebra elements and lifts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RingElement:
    """Element of F2[x]/(x^l + 1), or of the bivariate quotient for two orders.

    `terms` holds exponent tuples, already reduced modulo the orders; addition
    is symmetric difference, multiplication is convolution with mod-2
    cancellation.
    """

    orders: tuple[int, ...]
    terms: frozenset[tuple[int, ...]]

    def __post_init__(self):
        if not self.orders or len(self.orders) > 2:
            raise ValueError("one or two cyclic orders expected")
        reduced = frozenset(tuple(e % o for e, o in zip(t, self.orders)) for t in self.terms)
        object.__setattr__(self, "terms", reduced)

    @classmethod
    def zero(cls, orders: tuple[int, ...]) -> "RingElement":
        return cls(orders, frozenset())

    @classmethod
    def one(cls, orders: tuple[int, ...]) -> "RingElement":
        return cls(orders, frozenset({(0,) * len(orders)}))

    @classmethod
    def monomial(cls, orders: tuple[int, ...], *exponents: int) -> "RingElement":
        if len(exponents) != len(orders):
            raise ValueError("one exponent per order")
        return cls(orders, frozenset({tuple(exponents)}))

    @property
    def weight(self) -> int:
        return len(self.terms)

    def __add__(self, other: "RingElement") -> "RingElement":
        if self.orders != other.orders:
            raise ValueError("order mismatch")
        return RingElement(self.orders, self.terms ^ other.terms)

    def __mul__(self, other: "RingElement") -> "RingElement":
        if self.orders != other.orders:
            raise ValueError("order mismatch")
        acc: set[tuple[int, ...]] = set()
        for a in self.terms:
            for b in other.terms:
                t = tuple((x + y) % o for x, y, o in zip(a, b, self.orders))
                acc.symmetric_difference_update({t})
        return RingElement(self.orders, frozenset(acc))

    def dagger(self) -> "RingElement":
        """Antipode: negate every exponent modulo its order."""
        return RingElement(
            self.orders,
            frozenset(tuple((-e) % o for e, o in zip(t, self.orders)) for t in self.terms),
        )

    @property
    def dim(self) -> int:
        return int(np.prod(self.orders))

    def lift(self) -> BinaryMatrix:
        """Matrix of multiplication by this element on the group algebra.

        A monomial x^a maps index i to i + a mod l (bivariate: the Kronecker
        product of the two cyclic shifts), so lift(x^a)[i, (i+a) % l] = 1.
        """
        dim = self.dim
        rows: list[np.ndarray] = []
        cols: list[np.ndarray] = []
        if len(self.orders) == 1:
            (l,) = self.orders
            base = np.arange(l, dtype=np.int64)
            for (a,) in self.terms:
                rows.append(base)
                cols.append((base + a) % l)
        else:
            l, m = self.orders
            i = np.repeat(np.arange(l, dtype=np.int64), m)
            j = np.tile(np.arange(m, dtype=np.int64), l)
            for a, b in self.terms:
                rows.append(i * m + j)
                cols.append(((i + a) % l) * m + ((j + b) % m))
        if not rows:
            return BinaryMatrix.zeros(dim, dim)
        return BinaryMatrix.from_coords(dim, dim, np.concatenate(rows), np.concatenate(cols))


def lift_matrix(entries: list[list[RingElement]]) -> BinaryMatrix:
    """Lift a matrix over the group algebra to a binary block matrix."""
    if not entries or not entries[0]:
        raise ValueError("empty ring matrix")
    orders = entries[0][0].orders
    dim = entries[0][0].dim
    nrows, ncols = len(entries), len(entries[0])
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    for bi, row in enumerate(entries):
        if len(row) != ncols:
            raise ValueError("ragged ring matrix")
        for bj, elem in enumerate(row):
            if elem.orders != orders:
                raise ValueError("mixed orders in ring matrix")
            block = elem.lift()
            dense = block.to_dense()
            r, c = np.nonzero(dense)
            rows.append(r + bi * dim)
            cols.append(c + bj * dim)
    return BinaryMatrix.from_coords(
        nrows * dim, ncols * dim, np.concatenate(rows), np.concatenate(cols)
    )


def dagger_matrix(entries: list[list[RingElement]]) -> list[list[RingElement]]:
    """Conjugate transpose over the group algebra: transpose + antipode."""
    nrows, ncols = len(entries), len(entries[0])
    return [[entries[i][j].dagger() for i in range(nrows)] for j in range(ncols)]


# ---------------------------------------------------------------------------
# logical operator bases
# ---------------------------------------------------------------------------


def logical_basis(hx: BinaryMatrix, hz: BinaryMatrix) -> tuple[BinaryMatrix, BinaryMatrix]:
    """Paired logical bases (lx, lz) with lx @ lz^T = identity.

    Rows of lx span ker(hz) modulo the row space of hx, rows of lz span
    ker(hx) modulo the row space of hz, and the bases are normalized so the
    k x k pairing matrix is the identity (operator i of one type commutes
    with every operator of the other type except its partner).
    """
    if hx.ncols != hz.ncols:
        raise ValueError("column count mismatch")
    n = hx.ncols

    def quotient_rows(stabs: BinaryMatrix, kernel_of: BinaryMatrix) -> BinaryMatrix:
        ker = kernel_of.kernel_basis()
        elim = _Eliminator(n)
        for i in range(stabs.nrows):
            elim.add(stabs.words[i])
        keep = [i for i in range(ker.nrows) if elim.add(ker.words[i])]
        return ker.select_rows(keep) if keep else BinaryMatrix.zeros(0, n)

    lx = quotient_rows(hx, hz)
    lz = quotient_rows(hz, hx)
    k = n - hx.rank() - hz.rank()
    if lx.nrows != k or lz.nrows != k:
        raise AssertionError("logical extraction dimension mismatch")
    if k == 0:
        return lx, lz
    pairing = lx @ lz.transpose()
    # lx @ (A @ lz)^T = pairing @ A^T, so A must be the inverse transpose
    lz_fixed = pairing.inverse().transpose() @ lz
    check = lx @ lz_fixed.transpose()
    if check != BinaryMatrix.identity(k):
        raise AssertionError("pairing normalization failed")
    return lx, lz_fixed
