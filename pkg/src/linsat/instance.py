"""Low-level Max-LINSAT instances over a prime field.

An instance is a list of constraints ``b_i . x in F_i`` where each member
value of F_i carries a positive integer weight.  The satisfied weight of an
assignment is the sum, over constraints, of the weight attached to the value
the left-hand side evaluates to (0 if the value is not a member).

Constraints are stored in a canonical form (lowest-index nonzero coefficient
scaled to 1) and, depending on the merge policy, constraints with the same
left-hand side are merged by adding their member weights.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import GuardExceeded, ModelError
from .gf import FieldElement, FieldMatrix, FieldOrder

ASSIGNMENT_GUARD = 2**20  # max q**n for full enumeration


@dataclass(frozen=True)
class LinsatVar:
    """A field-valued variable; ids are sequential positions within one instance."""

    id: int
    name: str

    def _expr(self) -> "LinExpr":
        return LinExpr({self.id: 1}, 0)

    def __add__(self, other):
        return self._expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self._expr() - other

    def __rsub__(self, other):
        return (-self._expr()) + other

    def __mul__(self, other):
        return self._expr() * other

    __rmul__ = __mul__

    def __neg__(self):
        return -self._expr()

    def __eq__(self, other):
        if isinstance(other, LinsatVar):
            return self.id == other.id and self.name == other.name
        return self._expr() == other

    def __ne__(self, other):
        if isinstance(other, LinsatVar):
            return not self.__eq__(other)
        return self._expr() != other

    def __hash__(self):
        return hash((self.id, self.name))

    def isin(self, values: Iterable[int]) -> "Membership":
        return self._expr().isin(values)


class LinExpr:
    """Integer linear combination of instance variables plus a constant.

    Used only as a builder; the constant folds into the right-hand side when
    a comparison is turned into a constraint.
    """

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs: Mapping[int, int], const: int = 0):
        self.coeffs = dict(coeffs)
        self.const = const

    @staticmethod
    def _lift(other) -> Optional["LinExpr"]:
        if isinstance(other, LinExpr):
            return other
        if isinstance(other, LinsatVar):
            return other._expr()
        if isinstance(other, int):
            return LinExpr({}, other)
        return None

    def __add__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        coeffs = dict(self.coeffs)
        for k, v in o.coeffs.items():
            coeffs[k] = coeffs.get(k, 0) + v
        return LinExpr(coeffs, self.const + o.const)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        if not isinstance(other, int):
            return NotImplemented
        return LinExpr({k: v * other for k, v in self.coeffs.items()}, self.const * other)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __eq__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        d = self - o
        return Membership(d.coeffs, [-d.const], negate=False)

    def __ne__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        d = self - o
        return Membership(d.coeffs, [-d.const], negate=True)

    def __hash__(self):
        return hash((tuple(sorted(self.coeffs.items())), self.const))

    def isin(self, values: Iterable[int]) -> "Membership":
        return Membership(self.coeffs, [v - self.const for v in values], negate=False)


@dataclass
class Membership:
    """A pending constraint: expr value in (or not in) a set of field values."""

    coeffs: dict
    values: list
    negate: bool


@dataclass(frozen=True)
class LinsatConstraint:
    """Canonical constraint: sparse coefficients plus weighted member values."""

    coeffs: tuple  # sorted ((var_id, coefficient), ...), coefficients in [1, p-1]
    rhs: tuple  # sorted ((value, weight), ...), weights positive integers
    provenance: tuple = ()

    def coeff_map(self) -> dict:
        return dict(self.coeffs)

    def rhs_map(self) -> dict:
        return dict(self.rhs)

    def weights_total(self) -> int:
        return sum(w for _, w in self.rhs)

    def member_values(self) -> tuple:
        return tuple(v for v, _ in self.rhs)

    def value_at(self, x: Sequence[int], p: int) -> int:
        return sum(c * x[i] for i, c in self.coeffs) % p

    def satisfied_weight(self, x: Sequence[int], p: int) -> int:
        v = self.value_at(x, p)
        for val, w in self.rhs:
            if val == v:
                return w
        return 0


def _canonicalize(coeffs: dict, values: Mapping[int, int], p: int, scale_lhs: bool):
    """Reduce mod p, drop zeros, optionally scale leading coefficient to 1."""
    cleaned = {i: c % p for i, c in coeffs.items() if c % p != 0}
    if not cleaned:
        raise ModelError("constraint left-hand side is zero")
    vals = {}
    for v, w in values.items():
        vals[v % p] = vals.get(v % p, 0) + w
    if scale_lhs:
        lead = cleaned[min(cleaned)]
        if lead != 1:
            inv = pow(lead, p - 2, p)
            cleaned = {i: c * inv % p for i, c in cleaned.items()}
            vals = {v * inv % p: w for v, w in vals.items()}
    key = tuple(sorted(cleaned.items()))
    rhs = tuple(sorted(vals.items()))
    return key, rhs


class LinsatInstance:
    """A weighted Set-Max-LINSAT instance over GF(p).

    merge policy:
      * "scaled" (default): constraints equal up to a nonzero scalar factor on
        the left-hand side are merged (member values are rescaled to match).
      * "exact": only literally identical left-hand sides are merged.
      * "none": no merging; duplicates are kept (used by the unweighted view).
    """

    def __init__(self, order: Union[int, FieldOrder], merge: str = "scaled"):
        if isinstance(order, int):
            order = FieldOrder(order)
        if merge not in ("scaled", "exact", "none"):
            raise ModelError(f"unknown merge policy {merge!r}")
        self.order = order
        self.merge = merge
        self.variables: list[LinsatVar] = []
        self.constraints: list[LinsatConstraint] = []
        self._index: dict = {}

    @property
    def p(self) -> int:
        return self.order.p

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def new_var(self, name: Optional[str] = None) -> LinsatVar:
        vid = len(self.variables)
        var = LinsatVar(vid, name if name is not None else f"x{vid}")
        self.variables.append(var)
        return var

    def new_vars(self, count: int, prefix: str = "x") -> list:
        return [self.new_var(f"{prefix}{len(self.variables)}") for _ in range(count)]

    def _check_var_ids(self, coeffs: Mapping[int, int]):
        for i in coeffs:
            if not 0 <= i < len(self.variables):
                raise ModelError(f"unknown variable id {i}")

    def add_constraint(
        self,
        expr,
        members=None,
        weight: int = 1,
        provenance: tuple = (),
    ) -> int:
        """Add (or merge) a constraint and return its index.

        ``expr`` may be a Membership produced by ``==``/``!=``/``isin`` on
        variables, or a coefficient mapping; in the latter case ``members``
        gives the weighted right-hand side as a value->weight mapping or an
        iterable of (value, weight) pairs, and ``weight`` is used for plain
        value iterables.
        """
        if isinstance(expr, Membership):
            if members is not None:
                raise ModelError("members cannot be combined with a comparison")
            if expr.negate:
                excluded = {v % self.p for v in expr.values}
                value_map = {v: weight for v in range(self.p) if v not in excluded}
            else:
                value_map = {}
                for v in expr.values:
                    value_map[v % self.p] = weight
            coeffs = expr.coeffs
        else:
            if isinstance(expr, LinsatVar):
                coeffs = {expr.id: 1}
            elif isinstance(expr, LinExpr):
                if expr.const % self.p != 0:
                    raise ModelError("bare expressions with constants need a comparison")
                coeffs = expr.coeffs
            else:
                coeffs = dict(expr)
            if members is None:
                raise ModelError("members required when expr is not a comparison")
            if isinstance(members, Mapping):
                value_map = dict(members)
            else:
                pairs = list(members)
                if pairs and isinstance(pairs[0], tuple):
                    value_map = {}
                    for v, w in pairs:
                        value_map[v] = value_map.get(v, 0) + w
                else:
                    value_map = {v: weight for v in pairs}
        if not value_map:
            raise ModelError("empty right-hand side")
        for w in value_map.values():
            if not isinstance(w, int) or isinstance(w, bool) or w <= 0:
                raise ModelError(f"weights must be positive integers, got {w!r}")
        self._check_var_ids(coeffs)
        key, rhs = _canonicalize(coeffs, value_map, self.p, scale_lhs=self.merge != "exact")
        return self._insert(key, rhs, provenance)

    def _insert(self, key: tuple, rhs: tuple, provenance: tuple) -> int:
        merged_idx = self._index.get(key) if self.merge != "none" else None
        if merged_idx is not None:
            old = self.constraints[merged_idx]
            vals = old.rhs_map()
            for v, w in rhs:
                vals[v] = vals.get(v, 0) + w
            new_rhs = tuple(sorted(vals.items()))
            self._reject_trivial(new_rhs)
            self.constraints[merged_idx] = LinsatConstraint(
                key, new_rhs, tuple(dict.fromkeys(old.provenance + tuple(provenance)))
            )
            return merged_idx
        self._reject_trivial(rhs)
        self.constraints.append(LinsatConstraint(key, rhs, tuple(provenance)))
        idx = len(self.constraints) - 1
        if self.merge != "none":
            self._index[key] = idx
        return idx

    def _reject_trivial(self, rhs: tuple):
        if len(rhs) == self.p and len({w for _, w in rhs}) == 1:
            raise ModelError(
                "right-hand side covers the whole field with one uniform weight; "
                "the constraint would be constant and corrupt code analysis"
            )

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, x: Sequence[int]) -> int:
        """Total satisfied weight of assignment x (length = variable count)."""
        if len(x) != self.num_vars:
            raise ModelError(f"expected {self.num_vars} values, got {len(x)}")
        p = self.p
        xs = [int(v) % p for v in x]
        return sum(c.satisfied_weight(xs, p) for c in self.constraints)

    def assignments(self) -> Iterator[tuple]:
        """All assignments in lexicographic order (first variable varies slowest)."""
        return itertools.product(range(self.p), repeat=self.num_vars)

    def assignment_from_index(self, idx: int) -> tuple:
        digits = []
        for _ in range(self.num_vars):
            digits.append(idx % self.p)
            idx //= self.p
        return tuple(reversed(digits))

    def evaluate_all(self, guard: int = ASSIGNMENT_GUARD) -> np.ndarray:
        """Satisfied weight for every assignment, indexed lexicographically.

        Index i corresponds to the base-p digits of i with variable 0 as the
        most significant digit, matching ``assignments()`` order.
        """
        n, p = self.num_vars, self.p
        total = p**n
        if total > guard:
            raise GuardExceeded(f"q^n = {total} exceeds guard {guard}")
        out = np.zeros(total, dtype=np.int64)
        if n == 0:
            out[0] = sum(
                dict(c.rhs).get(0, 0) for c in self.constraints
            )
            return out
        shape = (p,) * n
        for c in self.constraints:
            vals = np.zeros(shape, dtype=np.int64)
            for i, coef in c.coeffs:
                axis_shape = [1] * n
                axis_shape[i] = p
                vals = vals + coef * np.arange(p, dtype=np.int64).reshape(axis_shape)
            vals %= p
            table = np.zeros(p, dtype=np.int64)
            for v, w in c.rhs:
                table[v] = w
            out += table[vals].reshape(-1)
        return out

    def total_weight(self) -> int:
        return sum(c.weights_total() for c in self.constraints)

    def max_member_weight(self, idx: int) -> int:
        return max(w for _, w in self.constraints[idx].rhs)

    def is_unweighted(self) -> bool:
        return all(w == 1 for c in self.constraints for _, w in c.rhs)

    # -- matrix views -------------------------------------------------------

    def constraint_matrix(self) -> FieldMatrix:
        """The m x n coefficient matrix B (one row per constraint)."""
        rows = []
        for c in self.constraints:
            row = [0] * self.num_vars
            for i, coef in c.coeffs:
                row[i] = coef
            rows.append(row)
        return FieldMatrix(self.order, rows, cols=self.num_vars)

    # -- copies -------------------------------------------------------------

    def copy(self, merge: Optional[str] = None) -> "LinsatInstance":
        out = LinsatInstance(self.order, merge=self.merge if merge is None else merge)
        out.variables = list(self.variables)
        for c in self.constraints:
            out._insert(c.coeffs, c.rhs, c.provenance)
        return out

    def __repr__(self):
        return (
            f"LinsatInstance(GF({self.p}), {self.num_vars} vars, "
            f"{self.num_constraints} constraints, merge={self.merge!r})"
        )


@dataclass
class UnweightingMap:
    """Bookkeeping for the weighted -> unweighted duplication step."""

    weight_gcd: int
    # new constraint index -> (original index, copy number)
    origins: list = field(default_factory=list)

    @property
    def copies(self) -> int:
        return len(self.origins)


def to_unweighted(inst: LinsatInstance) -> tuple[LinsatInstance, UnweightingMap]:
    """Duplicate constraints so every member weight becomes 1.

    All weights are first divided by their common GCD.  Within one original
    constraint, member values sharing the same residual weight w are grouped
    into a single set that is emitted w times, so for every assignment the
    unweighted satisfied count times the GCD equals the weighted satisfied
    weight.  The result does not merge (duplicates are intentional).
    """
    weights = [w for c in inst.constraints for _, w in c.rhs]
    g = math.gcd(*weights) if weights else 1
    out = LinsatInstance(inst.order, merge="none")
    out.variables = list(inst.variables)
    umap = UnweightingMap(weight_gcd=g)
    for idx, c in enumerate(inst.constraints):
        by_weight: dict = {}
        for v, w in c.rhs:
            by_weight.setdefault(w // g, []).append(v)
        for w, values in sorted(by_weight.items()):
            rhs = tuple((v, 1) for v in sorted(values))
            for copy in range(w):
                out._insert(c.coeffs, rhs, c.provenance)
                umap.origins.append((idx, copy))
    return out, umap
