"""
Exact Linear Algebra Kernel
Rank, Hom-space solving, inverses and congruence signatures over Q and Q(i)
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import sympy
from sympy.polys.domains import QQ, QQ_I
from sympy.polys.matrices import DomainMatrix
from sympy.polys.matrices.exceptions import DMNonInvertibleMatrixError

from .errors import NotSymmetric, ShapeMismatch, Singular

logger = logging.getLogger(__name__)

# Every entry of every matrix is an element of the Gaussian rationals; a
# rational scalar is one whose imaginary part is zero.
Scalar = type(QQ_I.one)

ZERO = QQ_I.zero
ONE = QQ_I.one


def rational(value) -> "QQ.dtype":
    """
    Convert an int, Fraction, "p/q" string or QQ element into a QQ element

    Raises:
        ZeroDivisionError: for a zero denominator
        ValueError: for anything that is not an exact rational
    """
    if isinstance(value, bool):
        raise ValueError(f"not a rational number: {value!r}")
    if isinstance(value, int):
        return QQ(value)
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    if isinstance(value, str):
        frac = Fraction(value.strip())
        return QQ(frac.numerator, frac.denominator)
    if QQ.of_type(value):
        return value
    if isinstance(value, sympy.Rational):
        return QQ(int(value.p), int(value.q))
    raise ValueError(f"not a rational number: {value!r}")


def scalar(value) -> Scalar:
    """
    Convert a Python or sympy number into an exact Gaussian-rational scalar

    Accepts ints, Fractions, "p/q" strings, QQ and QQ_I elements, sympy
    expressions a + b*I with rational a, b, and (re, im) pairs.
    """
    if isinstance(value, Scalar):
        return value
    if isinstance(value, tuple) and len(value) == 2:
        return QQ_I(rational(value[0]), rational(value[1]))
    if isinstance(value, sympy.Basic):
        return QQ_I.from_sympy(value)
    if isinstance(value, complex):
        raise ValueError("floating point complex numbers are not exact")
    return QQ_I(rational(value), QQ.zero)


def is_zero(value: Scalar) -> bool:
    return value == ZERO


def real_sign(value: Scalar) -> int:
    """Sign of a rational scalar: +1, -1 or 0"""
    if value.y != QQ.zero:
        raise ValueError(f"sign of a non-real scalar {value}")
    if QQ.is_positive(value.x):
        return 1
    if QQ.is_negative(value.x):
        return -1
    return 0


@dataclass(frozen=True)
class ExactMatrix:
    """
    Dense matrix of exact scalars

    ``entries`` is the value; arithmetic runs on the equivalent DomainMatrix
    over QQ_I, built once per matrix.
    """

    rows: int
    cols: int
    entries: Tuple[Tuple[Scalar, ...], ...]

    def __post_init__(self):
        if len(self.entries) != self.rows or any(len(row) != self.cols for row in self.entries):
            raise ShapeMismatch(
                f"entry grid does not match declared shape {self.rows}x{self.cols}",
                {"rows": self.rows, "cols": self.cols},
            )

    @classmethod
    def from_domain(cls, dm: DomainMatrix) -> "ExactMatrix":
        rows, cols = dm.shape
        if rows == 0 or cols == 0:
            return zeros(rows, cols)
        return cls(rows, cols, tuple(tuple(row) for row in dm.convert_to(QQ_I).to_list()))

    @cached_property
    def domain(self) -> DomainMatrix:
        if self.is_empty:
            return DomainMatrix.zeros(self.shape, QQ_I).to_dense()
        return DomainMatrix([list(row) for row in self.entries], self.shape, QQ_I)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    @property
    def is_empty(self) -> bool:
        return self.rows == 0 or self.cols == 0

    def __getitem__(self, index: Tuple[int, int]) -> Scalar:
        i, j = index
        return self.entries[i][j]

    def __add__(self, other: "ExactMatrix") -> "ExactMatrix":
        _require_same_shape(self, other, "add")
        if self.is_empty:
            return self
        return ExactMatrix.from_domain(self.domain + other.domain)

    def __sub__(self, other: "ExactMatrix") -> "ExactMatrix":
        _require_same_shape(self, other, "subtract")
        if self.is_empty:
            return self
        return ExactMatrix.from_domain(self.domain - other.domain)

    def __neg__(self) -> "ExactMatrix":
        if self.is_empty:
            return self
        return ExactMatrix.from_domain(self.domain.neg())

    def __matmul__(self, other: "ExactMatrix") -> "ExactMatrix":
        if self.cols != other.rows:
            raise ShapeMismatch(
                f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}",
                {"left": list(self.shape), "right": list(other.shape)},
            )
        if self.is_empty or other.is_empty:
            return zeros(self.rows, other.cols)
        return ExactMatrix.from_domain(self.domain.matmul(other.domain))

    def scale(self, factor) -> "ExactMatrix":
        if self.is_empty:
            return self
        return ExactMatrix.from_domain(self.domain * scalar(factor))

    @property
    def T(self) -> "ExactMatrix":
        if self.is_empty:
            return zeros(self.cols, self.rows)
        return ExactMatrix.from_domain(self.domain.transpose())

    def is_zero(self) -> bool:
        return all(a == ZERO for row in self.entries for a in row)

    def is_rational(self) -> bool:
        return all(a.y == QQ.zero for row in self.entries for a in row)

    def real_part(self) -> "ExactMatrix":
        return ExactMatrix(self.rows, self.cols, tuple(
            tuple(QQ_I(a.x, QQ.zero) for a in row) for row in self.entries
        ))

    def imag_part(self) -> "ExactMatrix":
        return ExactMatrix(self.rows, self.cols, tuple(
            tuple(QQ_I(a.y, QQ.zero) for a in row) for row in self.entries
        ))

    def column(self, j: int) -> "ExactMatrix":
        return ExactMatrix(self.rows, 1, tuple((row[j],) for row in self.entries))

    def columns(self) -> List["ExactMatrix"]:
        return [self.column(j) for j in range(self.cols)]

    def submatrix(self, row_indices: Sequence[int], col_indices: Sequence[int]) -> "ExactMatrix":
        return ExactMatrix(len(row_indices), len(col_indices), tuple(
            tuple(self.entries[i][j] for j in col_indices) for i in row_indices
        ))

    def tolist(self) -> List[List[Scalar]]:
        return [list(row) for row in self.entries]

    def __repr__(self) -> str:
        body = "; ".join(", ".join(str(QQ_I.to_sympy(a)) for a in row) for row in self.entries)
        return f"ExactMatrix({self.rows}x{self.cols}: [{body}])"


def _require_same_shape(a: ExactMatrix, b: ExactMatrix, operation: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(
            f"cannot {operation} {a.rows}x{a.cols} and {b.rows}x{b.cols}",
            {"left": list(a.shape), "right": list(b.shape)},
        )


def matrix(data: Iterable[Iterable], rows: Optional[int] = None, cols: Optional[int] = None) -> ExactMatrix:
    """
    Build an ExactMatrix from nested rows of numbers

    Args:
        data: row-major nested iterables of anything `scalar` accepts
        rows, cols: explicit shape, required when data is empty

    Returns:
        ExactMatrix
    """
    grid = tuple(tuple(scalar(v) for v in row) for row in data)
    n_rows = len(grid) if rows is None else rows
    if cols is None:
        cols = len(grid[0]) if grid else 0
    if not grid and n_rows:
        grid = tuple(() for _ in range(n_rows))
    return ExactMatrix(n_rows, cols, grid)


def zeros(rows: int, cols: int) -> ExactMatrix:
    return ExactMatrix(rows, cols, tuple(tuple(ZERO for _ in range(cols)) for _ in range(rows)))


def identity(n: int) -> ExactMatrix:
    return ExactMatrix(n, n, tuple(tuple(ONE if i == j else ZERO for j in range(n)) for i in range(n)))


def column_vector(values: Iterable) -> ExactMatrix:
    items = [scalar(v) for v in values]
    return ExactMatrix(len(items), 1, tuple((v,) for v in items))


def hstack(*blocks: ExactMatrix) -> ExactMatrix:
    if not blocks:
        raise ShapeMismatch("hstack of nothing")
    rows = blocks[0].rows
    if any(b.rows != rows for b in blocks):
        raise ShapeMismatch("hstack blocks have different row counts",
                            {"rows": [b.rows for b in blocks]})
    parts = [b.domain for b in blocks if not b.is_empty]
    if not parts:
        return zeros(rows, sum(b.cols for b in blocks))
    return ExactMatrix.from_domain(parts[0].hstack(*parts[1:]))


def vstack(*blocks: ExactMatrix) -> ExactMatrix:
    if not blocks:
        raise ShapeMismatch("vstack of nothing")
    cols = blocks[0].cols
    if any(b.cols != cols for b in blocks):
        raise ShapeMismatch("vstack blocks have different column counts",
                            {"cols": [b.cols for b in blocks]})
    parts = [b.domain for b in blocks if not b.is_empty]
    if not parts:
        return zeros(sum(b.rows for b in blocks), cols)
    return ExactMatrix.from_domain(parts[0].vstack(*parts[1:]))


def block_diag(*blocks: ExactMatrix) -> ExactMatrix:
    total_cols = sum(b.cols for b in blocks)
    bands = []
    before = 0
    for b in blocks:
        bands.append(hstack(zeros(b.rows, before), b, zeros(b.rows, total_cols - before - b.cols)))
        before += b.cols
    if not bands:
        return zeros(0, 0)
    return vstack(*bands)


def block_matrix(blocks: Sequence[Sequence[ExactMatrix]]) -> ExactMatrix:
    """Assemble a matrix from a grid of blocks with consistent shapes"""
    return vstack(*[hstack(*row) for row in blocks])


def kron(a: ExactMatrix, b: ExactMatrix) -> ExactMatrix:
    if a.is_empty or b.is_empty:
        return zeros(a.rows * b.rows, a.cols * b.cols)
    return block_matrix([[b.scale(x) for x in row] for row in a.entries])


def vec(m: ExactMatrix) -> ExactMatrix:
    """Row-major flattening of a matrix into a column vector"""
    return ExactMatrix(m.rows * m.cols, 1, tuple((a,) for row in m.entries for a in row))


def unvec(v: ExactMatrix, rows: int, cols: int) -> ExactMatrix:
    flat = [row[0] for row in v.entries]
    return ExactMatrix(rows, cols, tuple(tuple(flat[i * cols:(i + 1) * cols]) for i in range(rows)))


def rank(m: ExactMatrix) -> int:
    """Exact rank over Q(i)"""
    if m.rows == 0 or m.cols == 0:
        return 0
    return m.domain.rank()


def rref(m: ExactMatrix) -> Tuple[ExactMatrix, Tuple[int, ...]]:
    """Reduced row echelon form and pivot columns"""
    if m.rows == 0 or m.cols == 0:
        return m, ()
    reduced, pivots = m.domain.rref()
    return ExactMatrix.from_domain(reduced), tuple(pivots)


def nullspace_basis(m: ExactMatrix) -> List[ExactMatrix]:
    """
    Basis of the right null space of m, one column vector per free variable

    The basis is read off the reduced row echelon form, so it is
    deterministic for a given matrix.
    """
    n = m.cols
    reduced, pivots = rref(m)
    pivot_set = set(pivots)
    basis = []
    for free in range(n):
        if free in pivot_set:
            continue
        values = [ZERO] * n
        values[free] = ONE
        for row, pivot in enumerate(pivots):
            values[pivot] = -reduced.entries[row][free]
        basis.append(ExactMatrix(n, 1, tuple((v,) for v in values)))
    return basis


def determinant(m: ExactMatrix) -> Scalar:
    if not m.is_square:
        raise ShapeMismatch(f"determinant of a non-square {m.rows}x{m.cols} matrix")
    if m.rows == 0:
        return ONE
    return m.domain.det()


def invert(m: ExactMatrix) -> ExactMatrix:
    """
    Exact inverse of a square matrix

    Raises:
        ShapeMismatch: if m is not square
        Singular: if rank(m) < size
    """
    if not m.is_square:
        raise ShapeMismatch(f"cannot invert a non-square {m.rows}x{m.cols} matrix")
    if m.rows == 0:
        return m
    try:
        inverse = m.domain.inv()
    except (DMNonInvertibleMatrixError, ZeroDivisionError):
        raise Singular(f"matrix of size {m.rows} has rank {rank(m)}",
                       {"size": m.rows, "rank": rank(m)})
    return ExactMatrix.from_domain(inverse)


def is_invertible(m: ExactMatrix) -> bool:
    return m.is_square and rank(m) == m.rows


# ---------------------------------------------------------------------------
# Homogeneous systems on matrix-valued unknowns
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    """The expression left · X[block] · right inside a linear equation"""

    block: int
    left: ExactMatrix
    right: ExactMatrix


@dataclass(frozen=True)
class SolutionSpace:
    """Basis of the solution set of a homogeneous system"""

    ambient_dim: int
    basis: Tuple[ExactMatrix, ...]
    block_shapes: Tuple[Tuple[int, int], ...] = ()

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def basis_matrix(self) -> ExactMatrix:
        if not self.basis:
            return zeros(self.ambient_dim, 0)
        return hstack(*self.basis)

    def contains(self, vector: ExactMatrix) -> bool:
        if vector.shape != (self.ambient_dim, 1):
            raise ShapeMismatch(f"vector of shape {vector.shape} in a space of dimension {self.ambient_dim}")
        return rank(hstack(self.basis_matrix(), vector)) == self.dimension

    def element(self, coefficients: Sequence) -> ExactMatrix:
        if len(coefficients) != self.dimension:
            raise ShapeMismatch(f"{len(coefficients)} coefficients for a {self.dimension}-dimensional space")
        total = zeros(self.ambient_dim, 1)
        for c, v in zip(coefficients, self.basis):
            total = total + v.scale(c)
        return total

    def unflatten(self, vector: ExactMatrix) -> Tuple[ExactMatrix, ...]:
        if not self.block_shapes:
            return (vector,)
        out = []
        offset = 0
        for rows, cols in self.block_shapes:
            size = rows * cols
            piece = ExactMatrix(size, 1, vector.entries[offset:offset + size])
            out.append(unvec(piece, rows, cols))
            offset += size
        return tuple(out)

    def flatten(self, blocks: Sequence[ExactMatrix]) -> ExactMatrix:
        return flatten_blocks(blocks, self.block_shapes)

    def block_basis(self) -> List[Tuple[ExactMatrix, ...]]:
        return [self.unflatten(v) for v in self.basis]


def flatten_blocks(blocks: Sequence[ExactMatrix], shapes: Sequence[Tuple[int, int]]) -> ExactMatrix:
    if len(blocks) != len(shapes):
        raise ShapeMismatch(f"{len(blocks)} blocks given, {len(shapes)} expected")
    for block, shape in zip(blocks, shapes):
        if block.shape != tuple(shape):
            raise ShapeMismatch(f"block of shape {block.shape} where {tuple(shape)} was expected",
                                {"expected": list(shape), "got": list(block.shape)})
    if not blocks:
        return zeros(0, 1)
    return vstack(*[vec(b) for b in blocks])


class LinearSystem:
    """
    Homogeneous linear conditions on a vector of matrix-valued unknowns

    Unknown blocks X_0, X_1, ... are flattened row-major one after another;
    each equation Σ left·X_b·right = 0 contributes one row per output entry.
    """

    def __init__(self, block_shapes: Sequence[Tuple[int, int]] = ()):
        self.block_shapes: List[Tuple[int, int]] = [tuple(s) for s in block_shapes]
        self._rows: List[Dict[int, Scalar]] = []

    def add_block(self, rows: int, cols: int) -> int:
        self.block_shapes.append((rows, cols))
        return len(self.block_shapes) - 1

    @property
    def ambient_dim(self) -> int:
        return sum(r * c for r, c in self.block_shapes)

    def offset(self, block: int) -> int:
        return sum(r * c for r, c in self.block_shapes[:block])

    def add_equation(self, terms: Sequence[Term]) -> None:
        if not terms:
            return
        out_shape = None
        for term in terms:
            if term.block >= len(self.block_shapes):
                raise ShapeMismatch(f"unknown block {term.block}")
            rows, cols = self.block_shapes[term.block]
            if term.left.cols != rows or term.right.rows != cols:
                raise ShapeMismatch(
                    f"term {term.left.shape} · X{term.block}{(rows, cols)} · {term.right.shape} is not defined",
                    {"block": term.block},
                )
            shape = (term.left.rows, term.right.cols)
            if out_shape is None:
                out_shape = shape
            elif shape != out_shape:
                raise ShapeMismatch(f"equation terms have shapes {out_shape} and {shape}")

        p, q = out_shape
        rows = [dict() for _ in range(p * q)]
        for term in terms:
            base = self.offset(term.block)
            _, cols = self.block_shapes[term.block]
            for a in range(p):
                for s, left in enumerate(term.left.entries[a]):
                    if left == ZERO:
                        continue
                    for t in range(cols):
                        right_row = term.right.entries[t]
                        for b in range(q):
                            coeff = right_row[b]
                            if coeff == ZERO:
                                continue
                            row = rows[a * q + b]
                            key = base + s * cols + t
                            row[key] = row.get(key, ZERO) + left * coeff
        self._rows.extend(rows)

    def add_rows(self, coefficients: Dict[int, ExactMatrix]) -> None:
        """
        Add rows acting on whole flattened blocks

        Args:
            coefficients: block index -> matrix of shape (k, rows*cols) of that block;
                all matrices share the row count k
        """
        counts = {m.rows for m in coefficients.values()}
        if len(counts) > 1:
            raise ShapeMismatch("coefficient blocks have different row counts")
        if not counts:
            return
        k = counts.pop()
        rows = [dict() for _ in range(k)]
        for block, coeff in coefficients.items():
            r, c = self.block_shapes[block]
            if coeff.cols != r * c:
                raise ShapeMismatch(f"coefficient matrix has {coeff.cols} columns for a block of size {r * c}")
            base = self.offset(block)
            for i in range(k):
                for j, value in enumerate(coeff.entries[i]):
                    if value != ZERO:
                        rows[i][base + j] = rows[i].get(base + j, ZERO) + value
        self._rows.extend(rows)

    def matrix(self) -> ExactMatrix:
        n = self.ambient_dim
        grid = []
        for row in self._rows:
            if all(v == ZERO for v in row.values()):
                continue
            dense = [ZERO] * n
            for key, value in row.items():
                dense[key] = value
            grid.append(tuple(dense))
        return ExactMatrix(len(grid), n, tuple(grid))

    def solve(self) -> SolutionSpace:
        return solve_homogeneous(self)


def solve_homogeneous(system: LinearSystem) -> SolutionSpace:
    """
    Basis of the full solution space of a homogeneous system

    The dimension always equals ambient_dim - rank(constraint matrix).
    """
    n = system.ambient_dim
    constraints = system.matrix()
    if constraints.rows == 0:
        basis = [identity(n).column(j) for j in range(n)]
    else:
        basis = nullspace_basis(constraints)
    logger.debug("solved %d equations in %d unknowns: nullity %d", constraints.rows, n, len(basis))
    return SolutionSpace(n, tuple(basis), tuple(system.block_shapes))


def intertwiner_system(rows: int, cols: int, pairs: Sequence[Tuple[ExactMatrix, ExactMatrix]]) -> LinearSystem:
    """
    Single unknown X (rows×cols) subject to X·a = b·X for every pair (a, b)
    """
    system = LinearSystem([(rows, cols)])
    for a, b in pairs:
        system.add_equation([
            Term(0, identity(rows), a),
            Term(0, -b, identity(cols)),
        ])
    return system


# ---------------------------------------------------------------------------
# Congruence reduction of symmetric forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignatureReport:
    """
    Signature of a real symmetric form together with the reduction data

    ``transform`` has the congruence basis as columns: transformᵀ·S·transform
    is diagonal with entries ``diagonal``.
    """

    positive: int
    negative: int
    null: int
    diagonal: Tuple[Scalar, ...] = ()
    transform: Optional[ExactMatrix] = None

    @property
    def dimension(self) -> int:
        return self.positive + self.negative + self.null

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.positive, self.negative, self.null)

    def negative_basis(self) -> ExactMatrix:
        """Columns spanning the chosen maximal negative-definite subspace"""
        chosen = [k for k, d in enumerate(self.diagonal) if real_sign(d) < 0]
        if self.transform is None:
            return zeros(self.dimension, 0)
        return self.transform.submatrix(range(self.transform.rows), chosen)


def _add_multiple(form, basis, target: int, source: int, factor) -> None:
    # Replace basis vector `target` by target + factor·source.
    n = len(form)
    for t in range(n):
        form[target][t] = form[target][t] + factor * form[source][t]
    for t in range(n):
        form[t][target] = form[t][target] + factor * form[t][source]
    basis[target] = [x + factor * y for x, y in zip(basis[target], basis[source])]


def _swap(form, basis, i: int, j: int) -> None:
    form[i], form[j] = form[j], form[i]
    for row in form:
        row[i], row[j] = row[j], row[i]
    basis[i], basis[j] = basis[j], basis[i]


def congruence_signature(sym: ExactMatrix) -> SignatureReport:
    """
    Signature of a rational symmetric matrix by symmetric Gaussian reduction

    Pivot rule: the first nonzero diagonal entry at or after the current
    position; when the remaining diagonal is zero, the first nonzero
    off-diagonal pair (i, j) is split by replacing e_i with e_i + e_j.

    Args:
        sym: symmetric matrix with rational entries

    Returns:
        SignatureReport with counts, diagonal and congruence basis

    Raises:
        NotSymmetric: if sym is not square, not symmetric or not real
    """
    if not sym.is_square:
        raise NotSymmetric(f"form of shape {sym.rows}x{sym.cols} is not square")
    if not sym.is_rational():
        raise NotSymmetric("form has non-real entries; realify it first")
    if sym != sym.T:
        raise NotSymmetric("form is not symmetric")

    n = sym.rows
    form = [[a.x for a in row] for row in sym.entries]
    basis = [[QQ.one if r == k else QQ.zero for r in range(n)] for k in range(n)]

    for k in range(n):
        pivot = next((i for i in range(k, n) if form[i][i] != QQ.zero), None)
        if pivot is None:
            pair = next(((i, j) for i in range(k, n) for j in range(i + 1, n)
                         if form[i][j] != QQ.zero), None)
            if pair is None:
                break
            i, j = pair
            logger.debug("rank-2 split on (%d, %d)", i, j)
            _add_multiple(form, basis, i, j, QQ.one)
            pivot = i
        if pivot != k:
            _swap(form, basis, k, pivot)
        head = form[k][k]
        for r in range(k + 1, n):
            if form[r][k] != QQ.zero:
                _add_multiple(form, basis, r, k, -(form[r][k] / head))

    diagonal = tuple(QQ_I(form[k][k], QQ.zero) for k in range(n))
    signs = [real_sign(d) for d in diagonal]
    transform = ExactMatrix(n, n, tuple(
        tuple(QQ_I(basis[k][r], QQ.zero) for k in range(n)) for r in range(n)
    ))
    return SignatureReport(
        positive=signs.count(1),
        negative=signs.count(-1),
        null=signs.count(0),
        diagonal=diagonal,
        transform=transform,
    )
