"""High-level constraint modeling: bounded integer variables, multilinear
expressions with exact rational coefficients, relational/modular/set
constraints and weighted objectives.

Expressions are built with Python operators (+, -, *, and ~ & | ^ for
Boolean combinations of binary variables) and normalized to canonical
multilinear form: x**k == x for every binary variable x.  Boolean operators
are desugared eagerly into polynomials, so a Boolean constraint is stored as
a weighted objective term (it carries no relation).
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from .errors import ModelError

Rational = Union[int, Fraction]


class Relation(enum.Enum):
    EQUALS = "EQUALS"
    DOES_NOT_EQUAL = "DOES_NOT_EQUAL"
    LESS_THAN = "LESS_THAN"
    LESS_EQUAL = "LESS_EQUAL"
    GREATER_THAN = "GREATER_THAN"
    GREATER_EQUAL = "GREATER_EQUAL"


_MODULAR_RELATIONS = (Relation.EQUALS, Relation.DOES_NOT_EQUAL)


@dataclass(frozen=True, eq=False)
class IntVar:
    """A bounded integer variable owned by one model."""

    id: int
    name: str
    lower: int
    upper: int
    model: "ConstraintModel"

    @property
    def is_binary(self) -> bool:
        return self.lower == 0 and self.upper == 1

    def _expr(self) -> "IntExpr":
        mono = IntMonomial(((self.id, 1),))
        return IntExpr(self.model, {mono: Fraction(1)}, Fraction(0))

    # arithmetic ------------------------------------------------------------

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

    def __pow__(self, exp):
        return self._expr() ** exp

    # comparisons / Boolean ops ----------------------------------------------

    def __eq__(self, other):
        return self._expr() == other

    def __ne__(self, other):
        return self._expr() != other

    def __le__(self, other):
        return self._expr() <= other

    def __lt__(self, other):
        return self._expr() < other

    def __ge__(self, other):
        return self._expr() >= other

    def __gt__(self, other):
        return self._expr() > other

    def __hash__(self):
        return hash(("IntVar", self.id))

    def __invert__(self):
        return bool_not(self._expr())

    def __and__(self, other):
        return bool_and(self._expr(), _as_expr(self.model, other))

    __rand__ = __and__

    def __or__(self, other):
        return bool_or(self._expr(), _as_expr(self.model, other))

    __ror__ = __or__

    def __xor__(self, other):
        return bool_xor(self._expr(), _as_expr(self.model, other))

    __rxor__ = __xor__

    def __repr__(self):
        return f"IntVar({self.name} in [{self.lower}, {self.upper}])"


@dataclass(frozen=True)
class IntMonomial:
    """Product of variables: ((var_id, exponent), ...) with ids strictly increasing."""

    vars: tuple

    @property
    def degree(self) -> int:
        return sum(e for _, e in self.vars)

    @property
    def var_ids(self) -> tuple:
        return tuple(i for i, _ in self.vars)

    def __repr__(self):
        if not self.vars:
            return "1"
        return "*".join(f"v{i}" + (f"^{e}" if e > 1 else "") for i, e in self.vars)


_ONE = IntMonomial(())


def _normalize_monomial(model: "ConstraintModel", items: Iterable[tuple]) -> IntMonomial:
    merged: dict = {}
    for vid, exp in items:
        merged[vid] = merged.get(vid, 0) + exp
    normal = []
    for vid in sorted(merged):
        exp = merged[vid]
        if exp == 0:
            continue
        if exp < 0:
            raise ModelError("negative exponents are not representable")
        if model.var(vid).is_binary:
            exp = 1
        normal.append((vid, exp))
    return IntMonomial(tuple(normal))


def _as_expr(model: "ConstraintModel", value) -> "IntExpr":
    if isinstance(value, IntExpr):
        if value.model is not model:
            raise ModelError("expressions from different models cannot be combined")
        return value
    if isinstance(value, IntVar):
        if value.model is not model:
            raise ModelError("variables from different models cannot be combined")
        return value._expr()
    if isinstance(value, (int, Fraction)):
        return IntExpr(model, {}, Fraction(value))
    raise ModelError(f"cannot interpret {value!r} as an expression (use int or Fraction)")


class IntExpr:
    """Multilinear-normalized polynomial with Fraction coefficients."""

    __slots__ = ("model", "terms", "const")

    def __init__(self, model: "ConstraintModel", terms: Mapping[IntMonomial, Fraction], const: Rational = 0):
        self.model = model
        self.terms = {m: Fraction(c) for m, c in terms.items() if c != 0}
        self.const = Fraction(const)

    # arithmetic ------------------------------------------------------------

    def _lift(self, other) -> Optional["IntExpr"]:
        try:
            return _as_expr(self.model, other)
        except ModelError:
            if isinstance(other, (IntExpr, IntVar)):
                raise
            return None

    def __add__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        terms = dict(self.terms)
        for m, c in o.terms.items():
            terms[m] = terms.get(m, Fraction(0)) + c
        return IntExpr(self.model, terms, self.const + o.const)

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

    def __neg__(self):
        return IntExpr(self.model, {m: -c for m, c in self.terms.items()}, -self.const)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            f = Fraction(other)
            return IntExpr(self.model, {m: c * f for m, c in self.terms.items()}, self.const * f)
        o = self._lift(other)
        if o is None:
            return NotImplemented
        terms: dict = {}
        items = list(self.terms.items()) + ([(_ONE, self.const)] if self.const else [])
        oitems = list(o.terms.items()) + ([(_ONE, o.const)] if o.const else [])
        const = Fraction(0)
        for ma, ca in items:
            for mb, cb in oitems:
                m = _normalize_monomial(self.model, ma.vars + mb.vars)
                c = ca * cb
                if m is _ONE or not m.vars:
                    const += c
                else:
                    terms[m] = terms.get(m, Fraction(0)) + c
        return IntExpr(self.model, terms, const)

    __rmul__ = __mul__

    def __pow__(self, exp):
        if not isinstance(exp, int) or exp < 0:
            raise ModelError("only small non-negative integer powers are supported")
        out = IntExpr(self.model, {}, Fraction(1))
        for _ in range(exp):
            out = out * self
        return out

    # comparisons ------------------------------------------------------------

    def _compare(self, other, relation: Relation) -> "Comparison":
        o = _as_expr(self.model, other)
        return Comparison(self - o, relation)

    def __eq__(self, other):
        return self._compare(other, Relation.EQUALS)

    def __ne__(self, other):
        return self._compare(other, Relation.DOES_NOT_EQUAL)

    def __le__(self, other):
        return self._compare(other, Relation.LESS_EQUAL)

    def __lt__(self, other):
        return self._compare(other, Relation.LESS_THAN)

    def __ge__(self, other):
        return self._compare(other, Relation.GREATER_EQUAL)

    def __gt__(self, other):
        return self._compare(other, Relation.GREATER_THAN)

    def __hash__(self):
        return hash((tuple(sorted(self.terms.items(), key=lambda kv: kv[0].vars)), self.const))

    # Boolean ops -------------------------------------------------------------

    def __invert__(self):
        return bool_not(self)

    def __and__(self, other):
        return bool_and(self, _as_expr(self.model, other))

    __rand__ = __and__

    def __or__(self, other):
        return bool_or(self, _as_expr(self.model, other))

    __ror__ = __or__

    def __xor__(self, other):
        return bool_xor(self, _as_expr(self.model, other))

    __rxor__ = __xor__

    # inspection ---------------------------------------------------------------

    @property
    def degree(self) -> int:
        return max((m.degree for m in self.terms), default=0)

    def is_linear(self) -> bool:
        return self.degree <= 1

    def var_ids(self) -> set:
        out: set = set()
        for m in self.terms:
            out.update(m.var_ids)
        return out

    def same_as(self, other: "IntExpr") -> bool:
        """Structural equality (== is reserved for building constraints)."""
        return self.terms == other.terms and self.const == other.const

    def value(self, assignment: Mapping[int, int]) -> Fraction:
        total = self.const
        for m, c in self.terms.items():
            prod = 1
            for vid, exp in m.vars:
                prod *= assignment[vid] ** exp
            total += c * prod
        return total

    def has_integer_coefficients(self) -> bool:
        return self.const.denominator == 1 and all(c.denominator == 1 for c in self.terms.values())

    def __repr__(self):
        parts = [f"{c}*{m}" for m, c in sorted(self.terms.items(), key=lambda kv: kv[0].vars)]
        if self.const or not parts:
            parts.append(str(self.const))
        return " + ".join(parts)


@dataclass
class Comparison:
    """A pending relational constraint with canonical right-hand side 0."""

    expr: IntExpr
    relation: Relation


def _check_boolean_args(exprs: Sequence[IntExpr]):
    for e in exprs:
        for vid in e.var_ids():
            var = e.model.var(vid)
            if not var.is_binary:
                raise ModelError(
                    f"Boolean operators need binary variables; {var.name} has bounds "
                    f"[{var.lower}, {var.upper}]"
                )


def bool_not(e: IntExpr) -> IntExpr:
    _check_boolean_args([e])
    return 1 - e


def bool_and(*exprs: IntExpr) -> IntExpr:
    _check_boolean_args(exprs)
    out = exprs[0]
    for e in exprs[1:]:
        out = out * e
    return out


def bool_or(*exprs: IntExpr) -> IntExpr:
    # a | b == a + b - a*b, folded over the arguments
    _check_boolean_args(exprs)
    out = exprs[0]
    for e in exprs[1:]:
        out = out + e - out * e
    return out


def bool_xor(*exprs: IntExpr) -> IntExpr:
    # a ^ b == a + b - 2ab
    _check_boolean_args(exprs)
    out = exprs[0]
    for e in exprs[1:]:
        out = out + e - 2 * out * e
    return out


def bool_desugar(op: str, args: Sequence[IntExpr]) -> IntExpr:
    """Desugar a named Boolean operator into a polynomial.

    The result evaluates to the operator's truth table on every 0/1
    assignment of its (binary) variables.
    """
    ops = {"not": bool_not, "and": bool_and, "or": bool_or, "xor": bool_xor}
    if op not in ops:
        raise ModelError(f"unknown Boolean operator {op!r}")
    if op == "not":
        if len(args) != 1:
            raise ModelError("'not' takes exactly one argument")
        return bool_not(args[0])
    if len(args) < 2:
        raise ModelError(f"{op!r} needs at least two arguments")
    return ops[op](*args)


@dataclass
class IntConstraint:
    """expr (relation) 0, optionally modulo ``modulus``, with a positive weight."""

    expr: IntExpr
    relation: Relation
    modulus: Optional[int]
    weight: Fraction

    def is_satisfied(self, assignment: Mapping[int, int]) -> bool:
        v = self.expr.value(assignment)
        if self.modulus is not None:
            r = int(v) % self.modulus
            return (r == 0) == (self.relation == Relation.EQUALS)
        if self.relation == Relation.EQUALS:
            return v == 0
        if self.relation == Relation.DOES_NOT_EQUAL:
            return v != 0
        if self.relation == Relation.LESS_THAN:
            return v < 0
        if self.relation == Relation.LESS_EQUAL:
            return v <= 0
        if self.relation == Relation.GREATER_THAN:
            return v > 0
        return v >= 0


@dataclass
class SetConstraint:
    """expr value in ``values`` (optionally modulo ``modulus``), weighted."""

    expr: IntExpr
    values: tuple
    modulus: Optional[int]
    weight: Fraction

    def is_satisfied(self, assignment: Mapping[int, int]) -> bool:
        v = self.expr.value(assignment)
        if self.modulus is not None:
            return int(v) % self.modulus in {x % self.modulus for x in self.values}
        return v in self.values


@dataclass
class Objective:
    """A maximized expression term; minimize is stored as maximize of -expr."""

    expr: IntExpr
    weight: Fraction
    origin: str = "objective"  # "objective" | "bool" (desugared Boolean constraint)


class ConstraintModel:
    """Container for variables, objectives and constraints."""

    def __init__(self, name: str = ""):
        self.name = name
        self.variables: list[IntVar] = []
        self.objectives: list[Objective] = []
        self.constraints: list = []  # IntConstraint | SetConstraint

    def var(self, vid: int) -> IntVar:
        try:
            return self.variables[vid]
        except IndexError:
            raise ModelError(f"unknown variable id {vid}") from None

    def new_var(self, name: Optional[str] = None, lower: int = 0, upper: int = 1) -> IntVar:
        if lower > upper:
            raise ModelError(f"lower bound {lower} exceeds upper bound {upper}")
        vid = len(self.variables)
        v = IntVar(vid, name if name is not None else f"x{vid}", lower, upper, self)
        self.variables.append(v)
        return v

    def new_binary_var(self, name: Optional[str] = None) -> IntVar:
        return self.new_var(name, 0, 1)

    def constant(self, value: Rational) -> IntExpr:
        return IntExpr(self, {}, Fraction(value))

    def as_expr(self, value) -> IntExpr:
        return _as_expr(self, value)

    def add_objective(
        self, expr, minimize: bool = False, weight: Rational = 1, origin: str = "objective"
    ) -> Objective:
        e = _as_expr(self, expr)
        w = Fraction(weight)
        if w <= 0:
            raise ModelError("objective weight must be positive")
        obj = Objective(-e if minimize else e, w, origin)
        self.objectives.append(obj)
        return obj

    def add_constraint(self, constraint, weight: Rational = 1, mod: Optional[int] = None):
        """Add a relational constraint (a Comparison) or a bare Boolean expression.

        A bare Boolean expression carries no relation, so it is stored as a
        weighted objective term; its user weight multiplies the objective
        weight scale.
        """
        w = Fraction(weight)
        if w <= 0:
            raise ModelError("constraint weight must be positive (Max-LINSAT weights are > 0)")
        if isinstance(constraint, (IntExpr, IntVar)):
            return self.add_boolean_constraint(constraint, weight=weight)
        if not isinstance(constraint, Comparison):
            raise ModelError(f"expected a comparison or Boolean expression, got {constraint!r}")
        if mod is not None:
            if mod < 2:
                raise ModelError("modulus must be >= 2")
            if constraint.relation not in _MODULAR_RELATIONS:
                raise ModelError("modular constraints support only == and !=")
            if not constraint.expr.has_integer_coefficients():
                raise ModelError("modular constraints need integer coefficients")
        c = IntConstraint(constraint.expr, constraint.relation, mod, w)
        self.constraints.append(c)
        return c

    def add_boolean_constraint(self, expr, weight: Rational = 1) -> Objective:
        e = _as_expr(self, expr)
        _check_boolean_args([e])
        return self.add_objective(e, weight=weight, origin="bool")

    def add_membership_constraint(
        self, expr, values: Iterable[int], mod: Optional[int] = None, weight: Rational = 1
    ) -> SetConstraint:
        """Constrain an integer-valued linear expression to a set of values."""
        e = _as_expr(self, expr)
        w = Fraction(weight)
        if w <= 0:
            raise ModelError("constraint weight must be positive")
        vals = tuple(sorted(set(int(v) for v in values)))
        if not vals:
            raise ModelError("membership constraint needs at least one value")
        if mod is not None:
            if mod < 2:
                raise ModelError("modulus must be >= 2")
            if not e.has_integer_coefficients():
                raise ModelError("modular constraints need integer coefficients")
            vals = tuple(sorted({v % mod for v in vals}))
            if len(vals) == mod:
                raise ModelError("membership covers every residue; constraint is constant")
        c = SetConstraint(e, vals, mod, w)
        self.constraints.append(c)
        return c

    # -- evaluation -----------------------------------------------------------

    def _assignment_map(self, assignment) -> dict:
        if isinstance(assignment, Mapping):
            amap = {
                (k.id if isinstance(k, IntVar) else int(k)): int(v) for k, v in assignment.items()
            }
        else:
            if len(assignment) != len(self.variables):
                raise ModelError(
                    f"expected {len(self.variables)} values, got {len(assignment)}"
                )
            amap = {v.id: int(x) for v, x in zip(self.variables, assignment)}
        for v in self.variables:
            if v.id not in amap:
                raise ModelError(f"no value for variable {v.name}")
            if not v.lower <= amap[v.id] <= v.upper:
                raise ModelError(
                    f"value {amap[v.id]} for {v.name} is outside [{v.lower}, {v.upper}]"
                )
        return amap

    def evaluate(self, assignment) -> "EvalResult":
        """Objective value, satisfied constraint weight and violated indices."""
        amap = self._assignment_map(assignment)
        objective = sum((o.weight * o.expr.value(amap) for o in self.objectives), Fraction(0))
        satisfied = Fraction(0)
        violated = []
        for idx, c in enumerate(self.constraints):
            if c.is_satisfied(amap):
                satisfied += c.weight
            else:
                violated.append(idx)
        return EvalResult(objective, satisfied, violated)

    def iter_assignments(self) -> Iterator[tuple]:
        """All in-bounds assignments as tuples in variable order."""
        ranges = [range(v.lower, v.upper + 1) for v in self.variables]
        return itertools.product(*ranges)

    def __repr__(self):
        return (
            f"ConstraintModel({len(self.variables)} vars, {len(self.objectives)} objectives, "
            f"{len(self.constraints)} constraints)"
        )


@dataclass
class EvalResult:
    objective: Fraction
    satisfied_weight: Fraction
    violated: list
