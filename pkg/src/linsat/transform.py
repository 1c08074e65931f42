"""The lowering pipeline from a ConstraintModel down to Max-LINSAT.

Pass 1 (lower_polynomials): polynomial objectives and constraints become
linear.  High-degree monomials over binary variables are split by balanced
halves into auxiliary product variables; each auxiliary definition a = u*v
is enforced by the penalty polynomial -(u*v - a)^2, which is maximal (zero)
exactly at equality.  The remaining low-degree pseudo-Boolean objective is
expanded into weighted parity constraints: writing the polynomial in the
+/-1 character basis, each nonzero coefficient c_S on a nonempty variable
set S yields one XOR constraint (parity target 0 for c_S > 0, else 1) with
weight 2|c_S|, and the satisfied weight of an assignment reconstructs the
polynomial up to the constant  c_empty - sum |c_S|.

Pass 2 (plan_prime + lower_to_modular): remaining linear constraints are
scaled to integer coefficients, a prime p is chosen by interval arithmetic
(equality/inequality targets must be recoverable from residues mod p) and
everything becomes set-inclusion constraints over GF(p).  Variables are
shifted so their lower bound maps to 0; range constraints pin each variable
to its box.  Range and auxiliary constraints receive a penalty weight larger
than the total user weight, so no optimum violates them.

Pass 3 (to_unweighted + repair_duplicates + equalize_set_sizes): the
weighted instance is duplicated into unit weights, duplicate rows are
repaired with pinned distance-gadget variables and member-set sizes are
equalized by splitting (optionally after padding sets with unattainable
values to raise the common divisor).

A TransformCertificate records the affine relation

    satisfied weight = scale * (model objective value) + offset

valid for every in-bounds assignment extended optimally over auxiliary
variables, provided all hard, range and auxiliary constraints are met.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import codes
from .errors import ModelError
from .gadgets import repair_duplicates
from .gf import is_prime
from .instance import LinsatInstance, to_unweighted
from .model import ConstraintModel, IntConstraint, Relation, SetConstraint

EDGE_CATEGORIES = {
    "boolean_to_polynomial": ("dependency_creating",),
    "polynomial_degree_split": ("aux_adding",),
    "nonlinear_constraint_term": ("aux_adding",),
    "fourier_expansion": ("constraint_increasing",),
    "binary_linear_objective": ("constraint_increasing",),
    "integer_linear_objective": ("constraint_increasing",),
    "equality_to_modular": ("favourable",),
    "inequality_to_modular": ("favourable",),
    "membership_to_modular": ("favourable",),
    "modular_reencoding": ("dependency_creating",),
    "weighted_to_unweighted": ("constraint_increasing", "dependency_creating"),
    "duplicate_repair": ("aux_adding",),
    "set_size_equalization": ("constraint_increasing", "dependency_creating"),
}


@dataclass
class TransformOptions:
    degree_threshold: int = 4
    penalty_weight: Optional[int] = None  # default: 1 + sum of integerized user weights
    merge: str = "scaled"
    equalize: bool = True
    pad_sets: bool = True
    round_to: Optional[int] = None
    dep_cap: int = 4
    analyze_dependencies: bool = True


@dataclass
class StageVar:
    id: int
    name: str
    lower: int
    upper: int
    origin: str = "model"  # "model" | "aux"
    aux_def: Optional[tuple] = None  # (vid_a, vid_b) for aux product variables

    @property
    def fixed(self) -> bool:
        return self.lower == self.upper

    @property
    def span(self) -> int:
        return self.upper - self.lower


@dataclass
class StageConstraint:
    coeffs: dict  # var id -> int coefficient (nonzero)
    const: int
    kind: str  # "eq" | "ne" | "ge" | "member" | "eqmod" | "nemod"
    modulus: Optional[int]
    members: Optional[tuple]
    weight: Fraction
    hard: bool
    penalty: bool
    provenance: tuple


@dataclass
class LinearStage:
    """Linear-only intermediate between the model and the field instance."""

    vars: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    objective_const: Fraction = Fraction(0)
    fourier_offset: Fraction = Fraction(0)
    penalty_offset: Fraction = Fraction(0)
    linear_terms: dict = field(default_factory=dict)  # vid -> Fraction coefficient
    linear_offset: Fraction = Fraction(0)
    aux_defs: list = field(default_factory=list)  # (aux_vid, vid_a, vid_b)
    edges: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    infeasible: list = field(default_factory=list)

    def bump(self, edge: str, count: int = 1):
        if count:
            self.edges[edge] = self.edges.get(edge, 0) + count


def _lcm_denominators(fractions) -> int:
    out = 1
    for f in fractions:
        out = out * f.denominator // math.gcd(out, f.denominator)
    return out


def walsh_parities(poly: dict) -> tuple:
    """Expand a multilinear polynomial over binary variables into parities.

    ``poly`` maps variable-id tuples to (Fraction coefficient, tag set).
    Returns (parities, offset) with parities a list of
    (var_ids, target_parity, weight, tags) and satisfied weight identity

        sum of satisfied parity weights = poly(x) - offset.
    """
    acc: dict = {}
    for mono, (coeff, tags) in poly.items():
        d = len(mono)
        base = Fraction(1, 2**d)
        for r in range(d + 1):
            sign = base if r % 2 == 0 else -base
            for sub in itertools.combinations(mono, r):
                cur = acc.setdefault(sub, [Fraction(0), set()])
                cur[0] += coeff * sign
                cur[1] |= tags
    offset = acc.get((), [Fraction(0), set()])[0]
    parities = []
    for sub in sorted(k for k in acc if k):
        c, tags = acc[sub]
        if c == 0:
            continue
        offset -= abs(c)
        parities.append((sub, 0 if c > 0 else 1, 2 * abs(c), tuple(sorted(tags))))
    return parities, offset


class _StageBuilder:
    def __init__(self, model: ConstraintModel, degree_threshold: int):
        if degree_threshold < 3:
            raise ModelError("degree threshold must be at least 3")
        self.model = model
        self.threshold = degree_threshold
        self.stage = LinearStage()
        for v in model.variables:
            self.stage.vars.append(StageVar(v.id, v.name, v.lower, v.upper))
        self._aux_cache: dict = {}
        self._penalty_polys: list = []

    def _is_binary(self, vid: int) -> bool:
        v = self.stage.vars[vid]
        return v.lower == 0 and v.upper == 1

    def _new_aux(self, a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        if key in self._aux_cache:
            return self._aux_cache[key]
        vid = len(self.stage.vars)
        sv = StageVar(vid, f"_aux{vid}", 0, 1, origin="aux", aux_def=key)
        self.stage.vars.append(sv)
        self._aux_cache[key] = vid
        self.stage.aux_defs.append((vid, key[0], key[1]))
        # penalty -(u*v - a)^2 == -u*v + 2*u*v*a - a  (multilinear over binaries)
        tag = f"penalty#{vid}"
        self._penalty_polys.append(
            {
                key: (Fraction(-1), {tag}),
                tuple(sorted(key + (vid,))): (Fraction(2), {tag}),
                (vid,): (Fraction(-1), {tag}),
            }
        )
        return vid

    def _product_var(self, vids: tuple) -> int:
        """Variable representing the product of the given binary variables."""
        if len(vids) == 1:
            return vids[0]
        half = (len(vids) + 1) // 2
        a = self._product_var(vids[:half])
        b = self._product_var(vids[half:])
        return self._new_aux(a, b)

    def _simplify_monomial(self, mono) -> tuple:
        """Substitute fixed variables; returns (remaining (vid, exp) tuple, factor)."""
        remaining = []
        factor = 1
        for vid, exp in mono.vars:
            sv = self.stage.vars[vid]
            if sv.fixed:
                factor *= sv.lower**exp
            else:
                remaining.append((vid, exp))
        return tuple(remaining), factor

    def _check_multilinear(self, remaining, context: str):
        for vid, exp in remaining:
            if exp > 1:
                v = self.stage.vars[vid]
                raise ModelError(
                    f"nonlinear term over non-binary variable {v.name} in {context}; "
                    "only binary variables may appear in products"
                )
        if len(remaining) > 1:
            for vid, _ in remaining:
                if not self._is_binary(vid):
                    v = self.stage.vars[vid]
                    raise ModelError(
                        f"nonlinear term over non-binary variable {v.name} in {context}; "
                        "only binary variables may appear in products"
                    )

    # -- objective --------------------------------------------------------

    def collect_objective(self) -> dict:
        poly: dict = {}
        bool_count = 0
        for oi, obj in enumerate(self.model.objectives):
            tag = f"{obj.origin}#{oi}"
            if obj.origin == "bool":
                bool_count += 1
            w = obj.weight
            self.stage.objective_const += w * obj.expr.const
            for mono, c in obj.expr.terms.items():
                remaining, factor = self._simplify_monomial(mono)
                coeff = w * c * factor
                if coeff == 0:
                    continue
                if not remaining:
                    self.stage.objective_const += coeff
                    continue
                self._check_multilinear(remaining, "the objective")
                key = tuple(vid for vid, _ in remaining)
                cur = poly.setdefault(key, [Fraction(0), set()])
                cur[0] += coeff
                cur[1].add(tag)
        self.stage.bump("boolean_to_polynomial", bool_count)
        return {k: (c, tags) for k, (c, tags) in poly.items() if c != 0}

    def split_high_degree(self, poly: dict) -> dict:
        out: dict = {}
        splits = 0
        for mono in sorted(poly):
            coeff, tags = poly[mono]
            if len(mono) >= self.threshold:
                half = (len(mono) + 1) // 2
                a = self._product_var(mono[:half])
                b = self._product_var(mono[half:])
                new = tuple(sorted((a, b)))
                splits += 1
            else:
                new = mono
            cur = out.setdefault(new, [Fraction(0), set()])
            cur[0] += coeff
            cur[1] |= tags
        self.stage.bump("polynomial_degree_split", splits)
        return {k: (c, t) for k, (c, t) in out.items() if c != 0}

    def route_objective(self, poly: dict):
        """Send binary monomials to the Fourier expansion and non-binary
        linear terms to the binary-expansion pass."""
        binary_poly: dict = {}
        for mono, (coeff, tags) in poly.items():
            if len(mono) == 1 and not self._is_binary(mono[0]):
                vid = mono[0]
                self.stage.linear_terms[vid] = (
                    self.stage.linear_terms.get(vid, Fraction(0)) + coeff
                )
            else:
                binary_poly[mono] = (coeff, tags)
        parities, offset = walsh_parities(binary_poly)
        self.stage.fourier_offset += offset
        count_linear = sum(1 for s, _, _, _ in parities if len(s) == 1)
        self.stage.bump("fourier_expansion", len(parities) - count_linear)
        self.stage.bump("binary_linear_objective", count_linear)
        for sub, target, weight, tags in parities:
            self.stage.constraints.append(
                StageConstraint(
                    coeffs={vid: 1 for vid in sub},
                    const=-target,
                    kind="eqmod",
                    modulus=2,
                    members=None,
                    weight=weight,
                    hard=False,
                    penalty=False,
                    provenance=tags or ("objective",),
                )
            )

    def emit_penalties(self):
        for poly in self._penalty_polys:
            parities, offset = walsh_parities(poly)
            self.stage.penalty_offset += offset
            for sub, target, weight, tags in parities:
                self.stage.constraints.append(
                    StageConstraint(
                        coeffs={vid: 1 for vid in sub},
                        const=-target,
                        kind="eqmod",
                        modulus=2,
                        members=None,
                        weight=weight,
                        hard=False,
                        penalty=True,
                        provenance=tags,
                    )
                )

    # -- constraints ------------------------------------------------------

    def linearize(self, expr, context: str) -> tuple:
        """Linear (coeffs, const) of an expression, creating product aux vars."""
        coeffs: dict = {}
        const = expr.const
        subst = 0
        for mono, c in expr.terms.items():
            remaining, factor = self._simplify_monomial(mono)
            coeff = c * factor
            if coeff == 0:
                continue
            if not remaining:
                const += coeff
                continue
            self._check_multilinear(remaining, context)
            if len(remaining) == 1:
                vid = remaining[0][0]
            else:
                vid = self._product_var(tuple(v for v, _ in remaining))
                subst += 1
            coeffs[vid] = coeffs.get(vid, Fraction(0)) + coeff
        self.stage.bump("nonlinear_constraint_term", subst)
        return {k: v for k, v in coeffs.items() if v != 0}, const

    def _scaled(self, coeffs: dict, const: Fraction, members=None) -> tuple:
        scale = _lcm_denominators(list(coeffs.values()) + [const])
        out = {k: int(v * scale) for k, v in coeffs.items()}
        c = int(const * scale)
        if members is not None:
            members = tuple(int(v) * scale for v in members)
        return out, c, members, scale

    def add_user_constraint(self, index: int, con):
        tag = (f"user#{index}",)
        if isinstance(con, SetConstraint):
            coeffs, const, members, scale = self._route_set(con)
            if not coeffs:
                self._constant_case(con.weight, const, "member", con.modulus, members, tag)
                return
            self.stage.constraints.append(
                StageConstraint(coeffs, const, "member", con.modulus, members, con.weight, True, False, tag)
            )
            self.stage.bump(
                "modular_reencoding" if con.modulus else "membership_to_modular"
            )
            return
        assert isinstance(con, IntConstraint)
        coeffs, const = self.linearize(con.expr, f"constraint {index}")
        if con.modulus is not None:
            assert all(v.denominator == 1 for v in coeffs.values()) and const.denominator == 1
            icoeffs = {k: int(v) for k, v in coeffs.items()}
            kind = "eqmod" if con.relation == Relation.EQUALS else "nemod"
            if not icoeffs:
               self._constant_case(con.weight, int(const), kind, con.modulus, None, tag)
               return
            self.stage.constraints.append(
                StageConstraint(icoeffs, int(const), kind, con.modulus, None, con.weight, True, False, tag)
            )
            self.stage.bump("modular_reencoding")
            return
        icoeffs, iconst, _, _ = self._scaled(coeffs, const)
        rel = con.relation
        if rel in (Relation.EQUALS, Relation.DOES_NOT_EQUAL):
            kind = "eq" if rel == Relation.EQUALS else "ne"
            self.stage.bump("equality_to_modular")
        else:
            # normalize orderings to expr >= 0 (strict: shift by one unit)
            if rel == Relation.GREATER_THAN:
                iconst -= 1
            elif rel == Relation.LESS_EQUAL:
                icoeffs = {k: -v for k, v in icoeffs.items()}
                iconst = -iconst
            elif rel == Relation.LESS_THAN:
                icoeffs = {k: -v for k, v in icoeffs.items()}
                iconst = -iconst - 1
            kind = "ge"
            self.stage.bump("inequality_to_modular")
        if not icoeffs:
            self._constant_case(con.weight, iconst, kind, None, None, tag)
            return
        self.stage.constraints.append(
            StageConstraint(icoeffs, iconst, kind, None, None, con.weight, True, False, tag)
        )

    def _route_set(self, con: SetConstraint) -> tuple:
        coeffs, const = self.linearize(con.expr, "membership constraint")
        if con.modulus is not None:
            assert all(v.denominator == 1 for v in coeffs.values()) and const.denominator == 1
            return {k: int(v) for k, v in coeffs.items()}, int(const), tuple(con.values), 1
        icoeffs, iconst, members, scale = self._scaled(coeffs, const, con.values)
        return icoeffs, iconst, members, scale

    def _constant_case(self, weight, const, kind, modulus, members, tag):
        """A constraint whose expression reduced to a constant."""
        if kind == "eq":
            ok = const == 0
        elif kind == "ne":
            ok = const != 0
        elif kind == "ge":
            ok = const >= 0
        elif kind == "eqmod":
            ok = const % modulus == 0
        elif kind == "nemod":
            ok = const % modulus != 0
        else:
            vals = members or ()
            ok = (const % modulus in {v % modulus for v in vals}) if modulus else const in vals
        if ok:
            self.stage.notes.append(f"{tag[0]}: constant constraint always satisfied")
            self.stage.constraints.append(
                StageConstraint({}, const, "true", None, None, weight, True, False, tag)
            )
        else:
            self.stage.infeasible.append(tag[0])
            self.stage.notes.append(f"{tag[0]}: constant constraint can never be satisfied")


def lower_polynomials(model: ConstraintModel, degree_threshold: int = 4) -> LinearStage:
    """Pass 1: polynomial objectives/constraints to a linear-only stage.

    Monomials of degree >= ``degree_threshold`` are split by balanced halves
    into auxiliary product variables; the pseudo-Boolean objective becomes
    weighted parity constraints; linear objective terms over non-binary
    variables are left in ``stage.linear_terms`` for lower_linear_objective.
    """
    b = _StageBuilder(model, degree_threshold)
    poly = b.collect_objective()
    poly = b.split_high_degree(poly)
    for index, con in enumerate(model.constraints):
        b.add_user_constraint(index, con)
    b.route_objective(poly)
    b.emit_penalties()
    return b.stage


def linear_objective_sets(a: Fraction, lower: int, upper: int) -> tuple:
    """Binary-expansion encoding of the objective term a*x for x in [lower, upper].

    Returns (constraints, offset) where constraints is a list of
    (member values, weight) pairs over x's integer values, emitted from the
    most significant bit down, and for every x in range

        sum of satisfied weights = a*x - offset.
    """
    a = Fraction(a)
    if upper - lower < 1:
        raise ModelError("variable span must be at least 1")
    if a == 0:
        return [], Fraction(0)
    span = upper - lower
    bits = span.bit_length()
    out = []
    for j in reversed(range(bits)):
        if a > 0:
            values = tuple(v for v in range(lower, upper + 1) if ((v - lower) >> j) & 1)
        else:
            values = tuple(v for v in range(lower, upper + 1) if ((upper - v) >> j) & 1)
        if values:
            out.append((values, abs(a) * 2**j))
    offset = a * lower if a > 0 else a * upper
    return out, offset


def lower_linear_objective(stage: LinearStage) -> LinearStage:
    """Emit weighted set constraints for non-binary linear objective terms."""
    for vid in sorted(stage.linear_terms):
        a = stage.linear_terms[vid]
        if a == 0:
            continue
        v = stage.vars[vid]
        sets, offset = linear_objective_sets(a, v.lower, v.upper)
        stage.linear_offset += offset
        for values, weight in sets:
            stage.constraints.append(
                StageConstraint(
                    coeffs={vid: 1},
                    const=0,
                    kind="member",
                    modulus=None,
                    members=values,
                    weight=weight,
                    hard=False,
                    penalty=False,
                    provenance=(f"linobj#{vid}",),
                )
            )
            stage.bump("integer_linear_objective")
    return stage


@dataclass
class PrimePlan:
    p: int
    bounds: list  # (L_i, U_i) per stage constraint
    var_spans: dict  # stage vid -> span


def plan_prime(stage: LinearStage) -> PrimePlan:
    """Choose the smallest prime under which every constraint stays faithful.

    Equality/inequality targets must be recoverable: for = and != the prime
    must exceed max |expr|, for orderings, memberships and re-encoded smaller
    moduli it must exceed U_i - L_i, and it must exceed every variable span.
    """
    bounds = []
    req = 1
    for c in stage.constraints:
        lo = hi = c.const
        for vid, coef in c.coeffs.items():
            v = stage.vars[vid]
            lo += coef * (v.lower if coef > 0 else v.upper)
            hi += coef * (v.upper if coef > 0 else v.lower)
        bounds.append((lo, hi))
        if c.kind in ("eq", "ne"):
            req = max(req, hi, -lo)
        elif c.kind in ("ge", "member") and c.modulus is None:
            req = max(req, hi - lo)
    spans = {}
    for v in stage.vars:
        if not v.fixed:
            spans[v.id] = v.span
            req = max(req, v.span)
    p = 2
    while True:
        if is_prime(p) and p > req:
            ok = True
            for c, (lo, hi) in zip(stage.constraints, bounds):
                if c.modulus is not None and c.modulus != p and not p > hi - lo:
                    ok = False
                    break
            if ok:
                return PrimePlan(p, bounds, spans)
        p += 1


@dataclass
class TransformCertificate:
    """Affine bookkeeping between model objective values and satisfied weight.

    For every in-bounds model assignment, extended optimally over auxiliary
    variables, with all hard/range/auxiliary constraints satisfied:

        instance satisfied weight = scale * objective value + offset
    """

    scale: Fraction
    offset: Fraction
    prime: int
    penalty_weight: int
    var_map: dict  # model vid -> (instance vid, lower shift)
    fixed_vars: dict  # model vid -> fixed value
    aux_defs: list  # (stage aux vid, vid_a, vid_b) in stage numbering
    stage_to_instance: dict  # stage vid -> instance vid
    stage_lowers: dict  # stage vid -> lower bound
    var_spans: dict  # instance vid -> span (upper - lower)
    fourier_offset: Fraction = Fraction(0)
    fourier_offset_integerized: Fraction = Fraction(0)
    weight_gcd: int = 1
    gadget_pins: int = 0
    infeasible_constraints: list = field(default_factory=list)

    def weighted_value(self, objective_value) -> Fraction:
        return self.scale * Fraction(objective_value) + self.offset

    def source_value(self, satisfied_weight) -> Fraction:
        return (Fraction(satisfied_weight) - self.offset) / self.scale

    def unweighted_count(self, satisfied_weight) -> Fraction:
        """Expected unweighted optimum for a weighted satisfied weight."""
        return Fraction(satisfied_weight, self.weight_gcd) + self.gadget_pins

    def decode(self, assignment) -> dict:
        """Map an instance assignment back to model variable values."""
        out = dict(self.fixed_vars)
        for mv, (iv, lower) in self.var_map.items():
            out[mv] = int(assignment[iv]) + lower
        return out

    def extend(self, model_assignment) -> list:
        """Instance assignment for a model assignment, auxiliaries optimal.

        Auxiliary product variables are set to the product they represent;
        variables are shifted by their lower bounds.  The model assignment
        may be a mapping keyed by variable id or a sequence in id order.
        """
        if not hasattr(model_assignment, "keys"):
            model_assignment = {i: v for i, v in enumerate(model_assignment)}
        stage_vals = dict(self.fixed_vars)
        for mv in self.var_map:
            stage_vals[mv] = int(model_assignment[mv])
        for aux, a, b in self.aux_defs:
            stage_vals[aux] = stage_vals[a] * stage_vals[b]
        out = [0] * len(self.stage_to_instance)
        for sv, iv in self.stage_to_instance.items():
            out[iv] = stage_vals[sv] - self.stage_lowers[sv]
        return out


def lower_to_modular(
    stage: LinearStage, plan: PrimePlan, options: Optional[TransformOptions] = None
) -> tuple:
    """Pass 2: linear stage constraints to a weighted instance over GF(p)."""
    options = options or TransformOptions()
    p = plan.p
    sigma = _lcm_denominators([c.weight for c in stage.constraints]) if stage.constraints else 1
    user_total = sum(int(c.weight * sigma) for c in stage.constraints if not c.penalty)
    lam = options.penalty_weight if options.penalty_weight is not None else 1 + user_total
    inst = LinsatInstance(p, merge=options.merge)
    stage_to_instance = {}
    stage_lowers = {}
    var_map = {}
    fixed_vars = {}
    for v in stage.vars:
        if v.fixed:
            if v.origin == "model":
                fixed_vars[v.id] = v.lower
            continue
        iv = inst.new_var(v.name)
        stage_to_instance[v.id] = iv.id
        stage_lowers[v.id] = v.lower
        if v.origin == "model":
            var_map[v.id] = (iv.id, v.lower)
    offset = -sigma * (stage.objective_const + stage.fourier_offset + stage.linear_offset)
    offset -= lam * sigma * stage.penalty_offset
    dropped = []
    for c, (lo, hi) in zip(stage.constraints, plan.bounds):
        w = int(c.weight * sigma) if not c.penalty else lam * int(c.weight * sigma)
        if c.kind == "true":
            offset += int(c.weight * sigma)
            continue
        shift = c.const
        coeffs = {}
        for vid, coef in c.coeffs.items():
            v = stage.vars[vid]
            shift += coef * v.lower
            cm = coef % p
            if cm == 0:
                raise ModelError(
                    f"coefficient {coef} vanishes mod {p}; the planned prime is too small"
                )
            coeffs[stage_to_instance[vid]] = cm
        members = _member_residues(c, lo, hi, shift, p)
        if members is None:
            # never satisfiable within the variable box
            dropped.append({"provenance": list(c.provenance), "reason": "infeasible"})
            if c.hard:
                stage.infeasible.append(c.provenance[0] if c.provenance else "?")
            continue
        if len(members) == p:
            dropped.append({"provenance": list(c.provenance), "reason": "always_satisfied"})
            offset += w if not c.penalty else 0
            continue
        inst.add_constraint(coeffs, {v: w for v in sorted(members)}, provenance=c.provenance)
        if c.hard:
            offset += w
    ranges = 0
    var_spans = {}
    for v in stage.vars:
        if v.fixed:
            continue
        iv = stage_to_instance[v.id]
        var_spans[iv] = v.span
        if v.span + 1 < p:
            inst.add_constraint(
                {iv: 1},
                {x: lam for x in range(v.span + 1)},
                provenance=(f"range#{v.name}",),
            )
            ranges += 1
    offset += lam * ranges
    offset = Fraction(offset)
    cert = TransformCertificate(
        scale=Fraction(sigma),
        offset=offset,
        prime=p,
        penalty_weight=lam,
        var_map=var_map,
        fixed_vars=fixed_vars,
        aux_defs=list(stage.aux_defs),
        stage_to_instance=stage_to_instance,
        stage_lowers=stage_lowers,
        var_spans=var_spans,
        fourier_offset=stage.fourier_offset,
        fourier_offset_integerized=stage.fourier_offset * sigma,
        infeasible_constraints=list(stage.infeasible),
    )
    stage.notes.extend(
        f"dropped {d['provenance']}: {d['reason']}" for d in dropped
    )
    return inst, cert


def _member_residues(c: StageConstraint, lo: int, hi: int, shift: int, p: int):
    """Residues of the shifted left-hand side that satisfy the constraint.

    Returns None when no integer value in [lo, hi] satisfies it.
    """
    if c.kind == "eq":
        targets = [0] if lo <= 0 <= hi else []
    elif c.kind == "ge":
        targets = list(range(max(0, lo), hi + 1))
    elif c.kind == "member":
        if c.modulus is not None:
            rs = {v % c.modulus for v in c.members}
            targets = [t for t in range(lo, hi + 1) if t % c.modulus in rs]
        else:
            targets = [v for v in c.members if lo <= v <= hi]
    elif c.kind == "eqmod":
        targets = [t for t in range(lo, hi + 1) if t % c.modulus == 0]
    elif c.kind in ("ne", "nemod"):
        if c.kind == "ne":
            bad = [0] if lo <= 0 <= hi else []
        else:
            bad = [t for t in range(lo, hi + 1) if t % c.modulus == 0]
        bad_res = {(t - shift) % p for t in bad}
        return tuple(v for v in range(p) if v not in bad_res)
    else:  # pragma: no cover
        raise ModelError(f"unknown constraint kind {c.kind!r}")
    if not targets:
        return None
    residues = tuple(sorted({(t - shift) % p for t in targets}))
    # distinct target values must stay distinguishable mod p, except when the
    # constraint's own modulus equals p (then collisions are by definition)
    if c.modulus != p and len(residues) != len(targets):
        raise ModelError("residues collide; the planned prime is too small")
    return residues


# -- weight rounding -----------------------------------------------------------


@dataclass
class RoundReport:
    d: int
    max_relative_error: Fraction
    changed: int


def round_weights(inst: LinsatInstance, d: int) -> tuple:
    """Round every member weight to the nearest positive multiple of d.

    Ties round up; results are floored at d so weights stay positive.  This
    changes the problem; the report carries the largest relative deviation.
    """
    if d < 1:
        raise ModelError("d must be a positive integer")
    out = LinsatInstance(inst.order, merge=inst.merge)
    out.variables = list(inst.variables)
    max_err = Fraction(0)
    changed = 0
    for c in inst.constraints:
        rhs = {}
        for v, w in c.rhs:
            rounded = max(d, (2 * w + d) // (2 * d) * d)
            if rounded != w:
                changed += 1
                max_err = max(max_err, Fraction(abs(rounded - w), w))
            rhs[v] = rounded
        out._insert(c.coeffs, tuple(sorted(rhs.items())), c.provenance)
    return out, RoundReport(d, max_err, changed)


# -- set size equalization -------------------------------------------------------


@dataclass
class EqualizeReport:
    target_size: int
    padded: dict  # constraint index -> values added
    split: int  # number of constraints that were split
    repair_pins: int = 0

    @property
    def changed(self) -> bool:
        return bool(self.padded) or self.split > 0


def _reachable_residues(coeffs: tuple, var_values: dict, p: int) -> set:
    vals = {0}
    for vid, coef in coeffs:
        allowed = var_values.get(vid, range(p))
        vals = {(v + coef * a) % p for v in vals for a in allowed}
        if len(vals) == p:
            return vals
    return vals


def equalize_set_sizes(
    inst: LinsatInstance,
    var_values: Optional[dict] = None,
    pad: bool = True,
) -> tuple:
    """Make every member set the same size d (the GCD of all set sizes).

    Sets are split into consecutive chunks of size d; duplicate left-hand
    sides created by splitting are repaired with distance gadgets.  When
    ``var_values`` supplies the attainable values per variable (from range
    constraints), sets may first be padded with unattainable residues,
    chosen smallest-first, whenever that raises the common divisor enough to
    reduce the final constraint count.
    """
    if not inst.is_unweighted():
        raise ModelError("equalize_set_sizes expects an unweighted instance")
    p = inst.p
    sizes = [len(c.rhs) for c in inst.constraints]
    if not sizes:
        return inst, EqualizeReport(0, {}, 0)
    d0 = math.gcd(*sizes)
    baseline = sum(s // d0 for s in sizes)
    padded: dict = {}
    if pad and var_values is not None:
        reach = [
            _reachable_residues(c.coeffs, var_values, p) for c in inst.constraints
        ]
        best = None
        for d_target in range(max(sizes), d0, -1):
            plan = {}
            new_sizes = []
            ok = True
            for i, c in enumerate(inst.constraints):
                s = sizes[i]
                need = (-s) % d_target
                if need:
                    current = {v for v, _ in c.rhs}
                    unattainable = sorted(set(range(p)) - reach[i] - current)
                    if len(unattainable) < need or s + need >= p:
                        ok = False
                        break
                    plan[i] = unattainable[:need]
                new_sizes.append(s + need)
            if not ok:
                continue
            d_new = math.gcd(*new_sizes)
            count = sum(s // d_new for s in new_sizes)
            if count < baseline and (best is None or (count, -d_new) < best[:2]):
                best = (count, -d_new, plan)
        if best is not None:
            padded = best[2]
    final_sizes = [s + len(padded.get(i, [])) for i, s in enumerate(sizes)]
    d = math.gcd(*final_sizes)
    if not padded and all(s == d for s in sizes):
        return inst, EqualizeReport(d, {}, 0)
    out = LinsatInstance(inst.order, merge="none")
    out.variables = list(inst.variables)
    split = 0
    for i, c in enumerate(inst.constraints):
        values = sorted([v for v, _ in c.rhs] + padded.get(i, []))
        if len(values) > d:
            split += 1
        for start in range(0, len(values), d):
            chunk = values[start : start + d]
            out._insert(c.coeffs, tuple((v, 1) for v in chunk), c.provenance)
    out, repair = repair_duplicates(out)
    return out, EqualizeReport(d, padded, split, repair.added)


# -- the full pipeline ------------------------------------------------------------


@dataclass
class PipelineResult:
    weighted: LinsatInstance
    unweighted: LinsatInstance
    certificate: TransformCertificate
    diagnostics: dict
    stage: LinearStage
    plan: PrimePlan


def full_pipeline(model: ConstraintModel, options: Optional[TransformOptions] = None) -> PipelineResult:
    """Model -> weighted instance -> unweighted, repaired, equalized instance."""
    options = options or TransformOptions()
    stage = lower_polynomials(model, options.degree_threshold)
    lower_linear_objective(stage)
    plan = plan_prime(stage)
    weighted, cert = lower_to_modular(stage, plan, options)
    rounding = None
    work = weighted
    if options.round_to is not None and options.round_to > 1:
        work, rr = round_weights(weighted, options.round_to)
        rounding = {"d": rr.d, "max_relative_error": str(rr.max_relative_error), "changed": rr.changed}
    unweighted, umap = to_unweighted(work)
    stage.bump("weighted_to_unweighted", max(0, unweighted.num_constraints - work.num_constraints))
    unweighted, repair = repair_duplicates(unweighted)
    stage.bump("duplicate_repair", repair.added)
    pins = repair.added
    eq_report = None
    if options.equalize:
        var_values = {}
        for iv, span in cert.var_spans.items():
            var_values[iv] = range(span + 1)
        for v in unweighted.variables:
            if v.id not in var_values:
                var_values[v.id] = (0,)  # repair pins hold their variable at 0
        unweighted, eq = equalize_set_sizes(
            unweighted, var_values=var_values if options.pad_sets else None, pad=options.pad_sets
        )
        pins += eq.repair_pins
        stage.bump("set_size_equalization", eq.split)
        stage.bump("duplicate_repair", eq.repair_pins)
        eq_report = {
            "target_size": eq.target_size,
            "padded": {str(k): v for k, v in sorted(eq.padded.items())},
            "split": eq.split,
            "repair_pins": eq.repair_pins,
        }
    cert.weight_gcd = umap.weight_gcd
    cert.gadget_pins = pins
    dep_report = None
    if options.analyze_dependencies:
        # keep the subset search affordable: shrink the cap until the number
        # of candidate subsets fits a fixed budget, skip entirely if even
        # pairs do not fit
        m = unweighted.num_constraints
        cap = options.dep_cap
        while cap >= 2 and sum(math.comb(m, d) for d in range(2, cap + 1)) > 2 * 10**6:
            cap -= 1
        if cap >= 2:
            report = codes.find_dependent_row_sets(unweighted, cap=cap)
            dep_report = {
                "cap": report.cap,
                "sets": [{"indices": list(s.indices), "pattern": s.pattern} for s in report.sets],
                "patterns": report.patterns(),
            }
            if cap < options.dep_cap:
                stage.notes.append(
                    f"dependency search cap reduced from {options.dep_cap} to {cap} "
                    f"({m} constraints)"
                )
        else:
            stage.notes.append(
                f"dependency search skipped: {m} constraints exceed the subset budget"
            )
    edges = [
        {"edge": name, "categories": list(EDGE_CATEGORIES[name]), "count": count}
        for name, count in sorted(stage.edges.items())
        if count
    ]
    diagnostics = {
        "prime": plan.p,
        "scale": str(cert.scale),
        "offset": str(cert.offset),
        "fourier_offset": str(cert.fourier_offset),
        "fourier_offset_integerized": str(cert.fourier_offset_integerized),
        "penalty_weight": cert.penalty_weight,
        "weight_gcd": cert.weight_gcd,
        "gadget_pins": cert.gadget_pins,
        "unweighted_relation": "unweighted optimum = weighted optimum / weight_gcd + gadget_pins",
        "weighted_constraints": weighted.num_constraints,
        "unweighted_constraints": unweighted.num_constraints,
        "variables": unweighted.num_vars,
        "edges": edges,
        "rounding": rounding,
        "equalization": eq_report,
        "dependencies": dep_report,
        "infeasible_constraints": cert.infeasible_constraints,
        "notes": list(stage.notes),
    }
    return PipelineResult(weighted, unweighted, cert, diagnostics, stage, plan)
