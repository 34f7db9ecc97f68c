"""CSS code constructions and the built-in code catalog.

Provides the two families the workbench is built around, a rotated surface
code for the magic-state zone, and two tiny codes that are small enough to
verify exhaustively:

* lifted products of a monomial seed matrix over F2[x]/(x^l + 1) with its
  conjugate transpose, giving two-block quantum LDPC codes;
* two-block bivariate constructions H_X = [A | B], H_Z = [B^T | A^T] with A,
  B sums of monomials in F2[x, y]/(x^l + 1, y^m + 1).

Catalog entries live in TOML files under ``data/codes`` and are built on
first use; parameters such as the code dimension come from rank
computations, never from the data file (the file's declared values are
checked by the test suite instead).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
import tomli

from .gf2 import BinaryMatrix, RingElement, dagger_matrix, lift_matrix, logical_basis

__all__ = [
    "CssCode",
    "CodeFootprint",
    "build_lifted_product",
    "build_bivariate_bicycle",
    "build_surface",
    "build_steane",
    "build_four_two_two",
    "build_explicit",
    "direct_sum",
    "explicit_doc",
    "footprint",
    "load_code_file",
    "save_code_file",
    "render_toml",
    "available_codes",
    "get_code",
    "catalog",
]


@dataclass
class CssCode:
    """A CSS code given by its two parity-check matrices.

    X-type checks are rows of `hx` (they detect Z errors); Z-type checks are
    rows of `hz`. Commutation hx @ hz^T = 0 is enforced at construction.
    Logical operator bases and the code dimension are computed lazily and
    cached; treat instances as immutable.
    """

    name: str
    hx: BinaryMatrix
    hz: BinaryMatrix
    metadata: dict = field(default_factory=dict)
    _k: int | None = field(default=None, repr=False, compare=False)
    _logicals: tuple[BinaryMatrix, BinaryMatrix] | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        if self.hx.ncols != self.hz.ncols:
            raise ValueError("hx and hz must act on the same qubits")
        if not (self.hx @ self.hz.transpose()).is_zero():
            raise ValueError(f"{self.name}: X and Z checks do not commute")

    @property
    def n(self) -> int:
        return self.hx.ncols

    @property
    def k(self) -> int:
        if self._k is None:
            self._k = self.n - self.hx.rank() - self.hz.rank()
        return self._k

    @property
    def mx(self) -> int:
        return self.hx.nrows

    @property
    def mz(self) -> int:
        return self.hz.nrows

    def logicals(self) -> tuple[BinaryMatrix, BinaryMatrix]:
        """Paired logical bases (lx, lz) with lx @ lz^T = identity."""
        if self._logicals is None:
            self._logicals = logical_basis(self.hx, self.hz)
        return self._logicals

    def check_weights(self) -> tuple[int, int]:
        """Maximum row weight of (hx, hz)."""
        wx = int(self.hx.row_weights().max()) if self.mx else 0
        wz = int(self.hz.row_weights().max()) if self.mz else 0
        return wx, wz

    def qubit_degrees(self) -> tuple[int, int]:
        """Maximum column weight of (hx, hz)."""
        return int(self.hx.col_weights().max()), int(self.hz.col_weights().max())

    def max_check_weight(self) -> int:
        return max(self.check_weights())


@dataclass(frozen=True)
class CodeFootprint:
    """Physical-qubit footprint of one dressed code block.

    `total` counts the data qubits plus the ancilla share needed to measure
    the checks of one basis at a time: n + floor((n - k) / 2).
    """

    n: int
    k: int
    total: int


def footprint(code: CssCode) -> CodeFootprint:
    n, k = code.n, code.k
    return CodeFootprint(n=n, k=k, total=n + (n - k) // 2)


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------


def _kron_ring(a: list[list[RingElement]], b: list[list[RingElement]]) -> list[list[RingElement]]:
    """Kronecker product of two matrices over the same group algebra."""
    out: list[list[RingElement]] = []
    for ra in a:
        for rb in b:
            out.append([ea * eb for ea in ra for eb in rb])
    return out


def _ring_identity(size: int, orders: tuple[int, ...]) -> list[list[RingElement]]:
    one = RingElement.one(orders)
    zero = RingElement.zero(orders)
    return [[one if i == j else zero for j in range(size)] for i in range(size)]


def _ring_hstack(a: list[list[RingElement]], b: list[list[RingElement]]) -> list[list[RingElement]]:
    return [ra + rb for ra, rb in zip(a, b)]


def build_lifted_product(seed: list[list[int]], l: int, name: str = "lp") -> CssCode:
    """Lifted product of a monomial seed matrix with its conjugate transpose.

    Args:
        seed: r x c array of exponents; entry e stands for the monomial x^e
            in F2[x]/(x^l + 1).
        l: cyclic lift order.
        name: catalog name for the resulting code.

    The two qubit blocks have sizes r^2 * l and c^2 * l; checks of either
    type have weight r + c when the seed is full.
    """
    orders = (l,)
    r = len(seed)
    c = len(seed[0])
    a = [[RingElement.monomial(orders, int(e)) for e in row] for row in seed]
    a_dag = dagger_matrix(a)
    i_r = _ring_identity(r, orders)
    i_c = _ring_identity(c, orders)
    hx = lift_matrix(_ring_hstack(_kron_ring(a_dag, i_r), _kron_ring(i_c, a)))
    hz = lift_matrix(_ring_hstack(_kron_ring(i_r, a_dag), _kron_ring(a, i_c)))
    return CssCode(
        name=name,
        hx=hx,
        hz=hz,
        metadata={"construction": "lifted_product", "l": l, "seed": seed},
    )


def build_bivariate_bicycle(
    l: int, m: int, a_terms: list[list[int]], b_terms: list[list[int]], name: str = "bb"
) -> CssCode:
    """Two-block bivariate construction over F2[x, y]/(x^l + 1, y^m + 1).

    H_X = [A | B] and H_Z = [B^T | A^T] where A, B are the lifts of the two
    polynomials; commutation reduces to AB = BA in the group algebra.
    """
    orders = (l, m)
    a = RingElement(orders, frozenset(tuple(t) for t in a_terms))
    b = RingElement(orders, frozenset(tuple(t) for t in b_terms))
    la, lb = a.lift(), b.lift()
    hx = BinaryMatrix.hstack([la, lb])
    hz = BinaryMatrix.hstack([lb.transpose(), la.transpose()])
    return CssCode(
        name=name,
        hx=hx,
        hz=hz,
        metadata={"construction": "bivariate_bicycle", "l": l, "m": m,
                  "a": a_terms, "b": b_terms},
    )


def build_surface(d: int, name: str | None = None) -> CssCode:
    """Rotated surface code on a d x d data grid.

    Plaquettes live on the (d+1) x (d+1) corner grid; plaquette (i, j)
    touches the up-to-four data qubits {(i-1, j-1), (i-1, j), (i, j-1),
    (i, j)} and is X-type when i + j is even. Interior plaquettes are all
    kept; the boundary keeps weight-2 X-checks on the top and bottom rows
    and weight-2 Z-checks on the left and right columns.
    """
    if d < 2 or d % 2 == 0:
        raise ValueError("odd d >= 3 expected")

    def data_index(r: int, c: int) -> int:
        return r * d + c

    x_rows: list[list[int]] = []
    z_rows: list[list[int]] = []
    for i in range(d + 1):
        for j in range(d + 1):
            support = [
                data_index(r, c)
                for r, c in ((i - 1, j - 1), (i - 1, j), (i, j - 1), (i, j))
                if 0 <= r < d and 0 <= c < d
            ]
            is_x = (i + j) % 2 == 0
            interior = 1 <= i <= d - 1 and 1 <= j <= d - 1
            if interior:
                (x_rows if is_x else z_rows).append(support)
            elif len(support) == 2:
                if is_x and i in (0, d):
                    x_rows.append(support)
                elif not is_x and j in (0, d):
                    z_rows.append(support)

    def rows_to_matrix(rows: list[list[int]]) -> BinaryMatrix:
        dense = np.zeros((len(rows), d * d), dtype=np.uint8)
        for r, support in enumerate(rows):
            dense[r, support] = 1
        return BinaryMatrix.from_dense(dense)

    return CssCode(
        name=name or f"surface{d}",
        hx=rows_to_matrix(x_rows),
        hz=rows_to_matrix(z_rows),
        metadata={"construction": "surface", "d": d, "distance_upper": d},
    )


_HAMMING_743 = np.array(
    [
        [0, 0, 0, 1, 1, 1, 1],
        [0, 1, 1, 0, 0, 1, 1],
        [1, 0, 1, 0, 1, 0, 1],
    ],
    dtype=np.uint8,
)


def build_steane(name: str = "steane") -> CssCode:
    """Self-dual seven-qubit code built from the [7, 4, 3] Hamming checks."""
    h = BinaryMatrix.from_dense(_HAMMING_743)
    return CssCode(name=name, hx=h, hz=h,
                   metadata={"construction": "steane", "distance_upper": 3})


def build_four_two_two(name: str = "c422") -> CssCode:
    """Smallest error-detecting CSS code: one X and one Z check of weight 4."""
    h = BinaryMatrix.from_dense(np.ones((1, 4), dtype=np.uint8))
    return CssCode(name=name, hx=h, hz=h,
                   metadata={"construction": "four_two_two", "distance_upper": 2})


def direct_sum(a: CssCode, b: CssCode, name: str | None = None) -> CssCode:
    """Two independent blocks treated as one code (block-diagonal checks)."""
    def blockdiag(m1: BinaryMatrix, m2: BinaryMatrix) -> BinaryMatrix:
        top = BinaryMatrix.hstack([m1, BinaryMatrix.zeros(m1.nrows, m2.ncols)])
        bot = BinaryMatrix.hstack([BinaryMatrix.zeros(m2.nrows, m1.ncols), m2])
        return BinaryMatrix.vstack([top, bot])

    return CssCode(
        name=name or f"{a.name}+{b.name}",
        hx=blockdiag(a.hx, b.hx),
        hz=blockdiag(a.hz, b.hz),
        metadata={"construction": "direct_sum", "parts": [a.name, b.name]},
    )


def build_explicit(
    n: int,
    x_rows: list[list[int]],
    z_rows: list[list[int]],
    name: str = "explicit",
) -> CssCode:
    """Assemble a code directly from sparse check supports."""

    def to_matrix(rows: list[list[int]]) -> BinaryMatrix:
        lengths = [len(support) for support in rows]
        if sum(lengths) == 0:
            return BinaryMatrix.zeros(len(rows), n)
        r = np.repeat(np.arange(len(rows), dtype=np.int64), lengths)
        c = np.concatenate([np.asarray(s, dtype=np.int64) for s in rows if s])
        return BinaryMatrix.from_coords(len(rows), n, r, c)

    return CssCode(
        name=name,
        hx=to_matrix(x_rows),
        hz=to_matrix(z_rows),
        metadata={"construction": "explicit", "n": n},
    )


def explicit_doc(code: CssCode) -> dict:
    """Portable definition of a code as sparse check supports."""
    return {
        "name": code.name,
        "construction": "explicit",
        "n": code.n,
        "hx": [sorted(np.flatnonzero(row).tolist()) for row in code.hx.to_dense()],
        "hz": [sorted(np.flatnonzero(row).tolist()) for row in code.hz.to_dense()],
    }


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


def load_code_file(path: str | Path) -> CssCode:
    """Build a code from a TOML definition file."""
    path = Path(path)
    with open(path, "rb") as f:
        try:
            doc = tomli.load(f)
        except tomli.TOMLDecodeError as exc:
            # tomli reports line and column in the message; keep the file name
            raise ValueError(f"{path}: {exc}") from exc
    return _build_from_doc(doc, default_name=path.stem)


def _build_from_doc(doc: dict, default_name: str) -> CssCode:
    name = doc.get("name", default_name)
    construction = doc.get("construction")
    if construction in ("lifted_product", "lp"):
        code = build_lifted_product(doc["seed"], int(doc["l"]), name=name)
    elif construction in ("bivariate_bicycle", "bb"):
        code = build_bivariate_bicycle(
            int(doc["l"]), int(doc["m"]), doc["a"], doc["b"], name=name
        )
    elif construction == "surface":
        code = build_surface(int(doc["d"]), name=name)
    elif construction == "steane":
        code = build_steane(name=name)
    elif construction == "four_two_two":
        code = build_four_two_two(name=name)
    elif construction == "explicit":
        code = build_explicit(int(doc["n"]), doc["hx"], doc["hz"], name=name)
    else:
        raise ValueError(f"unknown construction {construction!r} in {name}")
    for key in ("distance_upper", "n", "k"):
        if key in doc:
            code.metadata[key] = doc[key]
    return code


def render_toml(doc: dict) -> str:
    """Serialize a flat document (scalars, int lists, nested int lists) as TOML."""

    def value(v) -> str:
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, float)):
            return repr(v)
        if isinstance(v, str):
            return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(value(item) for item in v) + "]"
        raise TypeError(f"cannot serialize {type(v).__name__} as a TOML value")

    scalars = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    tables = {k: v for k, v in doc.items() if isinstance(v, dict)}
    lines = [f"{key} = {value(v)}" for key, v in scalars.items()]
    for key, table in tables.items():
        lines.append("")
        lines.append(f"[{key}]")
        lines.extend(f"{tk} = {value(tv)}" for tk, tv in table.items())
    return "\n".join(lines) + "\n"


def save_code_file(code: CssCode, path: str | Path) -> None:
    """Write a code's sparse check supports to a TOML file."""
    Path(path).write_text(render_toml(explicit_doc(code)))


def _data_dir() -> Path:
    return Path(str(resources.files("qfab").joinpath("data/codes")))


def available_codes() -> list[str]:
    return sorted(p.stem for p in _data_dir().glob("*.toml"))


@lru_cache(maxsize=None)
def get_code(name: str) -> CssCode:
    """Fetch a catalog code by name (built and cached on first use)."""
    path = _data_dir() / f"{name}.toml"
    if not path.exists():
        raise KeyError(f"unknown code {name!r}; available: {', '.join(available_codes())}")
    return load_code_file(path)


def catalog() -> dict[str, CssCode]:
    """Build every catalog entry."""
    return {name: get_code(name) for name in available_codes()}
