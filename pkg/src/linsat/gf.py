"""Exact arithmetic and dense linear algebra over prime fields GF(p).

Elements are stored as plain integers in [0, p-1]; matrices are immutable
tuples of row tuples.  Everything is exact, deterministic and pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .errors import ModelError

# Witness set for deterministic Miller-Rabin, valid for all n < 3.3e24.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin primality check (valid below 3.3e24)."""
    if n < 2:
        return False
    for w in _MR_WITNESSES:
        if n == w:
            return True
        if n % w == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for w in _MR_WITNESSES:
        x = pow(w, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    c = max(2, n)
    while not is_prime(c):
        c += 1
    return c


@dataclass(frozen=True)
class FieldOrder:
    """A prime field order p, checked at construction."""

    p: int

    def __post_init__(self):
        if not is_prime(self.p):
            raise ModelError(f"field order must be prime, got {self.p}")

    def element(self, value: int) -> "FieldElement":
        return FieldElement(value % self.p, self)

    def elements(self) -> Iterator["FieldElement"]:
        for v in range(self.p):
            yield FieldElement(v, self)

    def __repr__(self):
        return f"GF({self.p})"


def GF(p: int) -> FieldOrder:
    """Convenience constructor for a prime field order."""
    return FieldOrder(p)


@dataclass(frozen=True)
class FieldElement:
    """An element of GF(p), stored reduced to [0, p-1]."""

    value: int
    order: FieldOrder

    def __post_init__(self):
        object.__setattr__(self, "value", self.value % self.order.p)

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.order != self.order:
                raise ModelError("field order mismatch")
            return other.value
        if isinstance(other, int):
            return other % self.order.p
        return NotImplemented

    def __add__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return NotImplemented
        return FieldElement((self.value + v) % self.order.p, self.order)

    __radd__ = __add__

    def __sub__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return NotImplemented
        return FieldElement((self.value - v) % self.order.p, self.order)

    def __rsub__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return NotImplemented
        return FieldElement((v - self.value) % self.order.p, self.order)

    def __mul__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return NotImplemented
        return FieldElement(self.value * v % self.order.p, self.order)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(-self.value % self.order.p, self.order)

    def __pow__(self, exp: int):
        return FieldElement(pow(self.value, exp, self.order.p), self.order)

    def inverse(self) -> "FieldElement":
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse")
        return FieldElement(pow(self.value, self.order.p - 2, self.order.p), self.order)

    def __truediv__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return NotImplemented
        return self * FieldElement(v, self.order).inverse()

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"{self.value} (mod {self.order.p})"


class FieldMatrix:
    """Immutable dense matrix over GF(p)."""

    __slots__ = ("order", "rows", "cols", "_rows")

    def __init__(self, order: FieldOrder, rows: Sequence[Sequence[int]], cols: Optional[int] = None):
        p = order.p
        data = tuple(tuple(int(v) % p for v in row) for row in rows)
        if data:
            ncols = len(data[0])
            if any(len(r) != ncols for r in data):
                raise ModelError("ragged matrix rows")
        else:
            ncols = 0 if cols is None else cols
        self.order = order
        self.rows = len(data)
        self.cols = ncols
        self._rows = data

    @classmethod
    def identity(cls, order: FieldOrder, n: int) -> "FieldMatrix":
        return cls(order, [[int(i == j) for j in range(n)] for i in range(n)])

    @classmethod
    def zero(cls, order: FieldOrder, rows: int, cols: int) -> "FieldMatrix":
        return cls(order, [[0] * cols for _ in range(rows)], cols=cols)

    def int_rows(self) -> tuple:
        """Raw entries as a tuple of int tuples (fast path for other modules)."""
        return self._rows

    def __getitem__(self, key) -> FieldElement:
        i, j = key
        return FieldElement(self._rows[i][j], self.order)

    def row(self, i: int) -> tuple:
        return self._rows[i]

    def column(self, j: int) -> tuple:
        return tuple(r[j] for r in self._rows)

    def transpose(self) -> "FieldMatrix":
        return FieldMatrix(
            self.order,
            [[self._rows[i][j] for i in range(self.rows)] for j in range(self.cols)],
            cols=self.rows,
        )

    def __eq__(self, other):
        return (
            isinstance(other, FieldMatrix)
            and self.order == other.order
            and self.cols == other.cols
            and self._rows == other._rows
        )

    def __hash__(self):
        return hash((self.order, self.cols, self._rows))

    def __repr__(self):
        body = "; ".join(" ".join(str(v) for v in row) for row in self._rows)
        return f"FieldMatrix({self.rows}x{self.cols} mod {self.order.p}: {body})"

    def matvec(self, x: Sequence[int]) -> tuple:
        if len(x) != self.cols:
            raise ModelError(f"dimension mismatch: {self.cols} columns, vector of length {len(x)}")
        p = self.order.p
        xs = [int(v) % p for v in x]
        return tuple(sum(a * b for a, b in zip(row, xs)) % p for row in self._rows)

    def matmul(self, other: "FieldMatrix") -> "FieldMatrix":
        if self.cols != other.rows:
            raise ModelError("dimension mismatch in matmul")
        p = self.order.p
        out = []
        bt = other.transpose()._rows
        for row in self._rows:
            out.append([sum(a * b for a, b in zip(row, col)) % p for col in bt])
        return FieldMatrix(self.order, out, cols=other.cols)


def _eliminate(rows: list, p: int, ncols: int) -> tuple[list, list]:
    """In-place reduced row echelon form; returns (rows, pivot column list)."""
    pivots = []
    r = 0
    for c in range(ncols):
        pivot = None
        for i in range(r, len(rows)):
            if rows[i][c] % p != 0:
                pivot = i
                break
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        inv = pow(rows[r][c], p - 2, p)
        rows[r] = [v * inv % p for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] % p != 0:
                f = rows[i][c]
                rows[i] = [(a - f * b) % p for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows, pivots


def reduce_row_echelon(m: FieldMatrix) -> tuple[FieldMatrix, int, list]:
    """Reduced row echelon form of m.

    Returns (echelon matrix, rank, pivot column indices).  Pivot columns are
    strictly increasing and each pivot entry is 1 with zeros above and below.
    """
    rows = [list(r) for r in m.int_rows()]
    rows, pivots = _eliminate(rows, m.order.p, m.cols)
    ech = FieldMatrix(m.order, rows, cols=m.cols)
    return ech, len(pivots), pivots


def rank(m: FieldMatrix) -> int:
    return reduce_row_echelon(m)[1]


def solve(m: FieldMatrix, rhs: Sequence[int]) -> Optional[list]:
    """Solve m @ x = rhs; returns one solution (free variables 0) or None.

    None signals an inconsistent system.  Raises on dimension mismatch.
    """
    if len(rhs) != m.rows:
        raise ModelError(f"dimension mismatch: {m.rows} rows, rhs of length {len(rhs)}")
    p = m.order.p
    aug = [list(r) + [int(v) % p] for r, v in zip(m.int_rows(), rhs)]
    aug, pivots = _eliminate(aug, p, m.cols)
    for row in aug:
        if all(v % p == 0 for v in row[:-1]) and row[-1] % p != 0:
            return None
    x = [0] * m.cols
    for r, c in enumerate(pivots):
        x[c] = aug[r][-1] % p
    return [FieldElement(v, m.order) for v in x]


def kernel_basis(m: FieldMatrix) -> FieldMatrix:
    """Basis of the null space of m, returned as matrix columns.

    The result has shape (m.cols, m.cols - rank(m)); m @ column = 0 for every
    column.  Free variables are set to 1 one at a time, so the basis is
    deterministic.
    """
    ech, rk, pivots = reduce_row_echelon(m)
    p = m.order.p
    free = [c for c in range(m.cols) if c not in pivots]
    basis = []
    erows = ech.int_rows()
    for f in free:
        vec = [0] * m.cols
        vec[f] = 1
        for r, c in enumerate(pivots):
            vec[c] = -erows[r][f] % p
        basis.append(vec)
    cols = len(basis)
    data = [[basis[j][i] for j in range(cols)] for i in range(m.cols)]
    return FieldMatrix(m.order, data, cols=cols)
