"""Reusable miniature Max-LINSAT templates ("gadgets").

A gadget maps n input variables (plus k fresh auxiliary variables) to a set
of weighted constraints.  For Boolean gadgets the inputs are meant to take
values 0/1 and the gadget's quality is described by two numbers:

* exact: maximizing over the auxiliary variables, every true row of the
  truth table reaches the same satisfied count s_yes and every false row
  reaches the same s_no < s_yes.
* approximate: true rows reach a common s_yes, false rows stay strictly
  below it (s_no records the best false-row value, i.e. an upper bound).

The module also provides the distance gadget (extend one constraint by k
pinned auxiliary variables, raising the length of any linear dependency
through it by k) and duplicate repair built on top of it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

from .errors import GuardExceeded, ModelError
from .gf import FieldOrder
from .instance import LinsatInstance, LinsatVar


@dataclass(frozen=True)
class Gadget:
    """A constraint template over ``arity`` input slots and ``aux_count`` slots."""

    name: str
    order: FieldOrder
    arity: int
    aux_count: int
    # ((coefficients over arity+aux slots), (member values), weight)
    constraints: tuple
    s_yes: int
    s_no: int
    kind: str  # "exact" | "approximate"

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def satisfied(self, values: Sequence[int]) -> int:
        """Weighted satisfied count for a full (inputs + aux) slot assignment."""
        p = self.order.p
        total = 0
        for coeffs, members, weight in self.constraints:
            v = sum(c * x for c, x in zip(coeffs, values)) % p
            if v in members:
                total += weight
        return total

    def best_over_aux(self, inputs: Sequence[int]) -> int:
        p = self.order.p
        if self.aux_count == 0:
            return self.satisfied(list(inputs))
        best = None
        for aux in itertools.product(range(p), repeat=self.aux_count):
            s = self.satisfied(list(inputs) + list(aux))
            if best is None or s > best:
                best = s
        return best


def verify_gadget(g: Gadget) -> tuple:
    """Exhaustively re-derive (s_yes, s_no) over 0/1 input rows.

    A gadget carries no truth table, so this checks internal consistency
    only: s_yes must be reached on at least one row and never exceeded.
    """
    rows = list(itertools.product((0, 1), repeat=g.arity))
    values = {row: g.best_over_aux(row) for row in rows}
    yes = max(values.values())
    no = max((v for v in values.values() if v < yes), default=yes)
    return yes, no


def check_gadget_against_table(g: Gadget, table) -> bool:
    """Does the gadget realize the given truth table under its declared kind?"""
    table = _normalize_table(table, g.arity)
    yes_values = []
    no_values = []
    for row, truth in table.items():
        v = g.best_over_aux(row)
        (yes_values if truth else no_values).append(v)
    if not yes_values or len(set(yes_values)) != 1:
        return False
    s_yes = yes_values[0]
    if s_yes != g.s_yes:
        return False
    if any(v >= s_yes for v in no_values):
        return False
    if g.kind == "exact":
        return len(set(no_values)) == 1 and no_values[0] == g.s_no
    return max(no_values, default=g.s_no) == g.s_no


def _normalize_table(table, n: Optional[int] = None) -> dict:
    """Accept a {row: bool} mapping or a sequence of 2**n booleans.

    Sequence index is the row read as a binary number with input 0 as the
    most significant bit.
    """
    if isinstance(table, dict):
        rows = {tuple(int(b) for b in k): bool(v) for k, v in table.items()}
        sizes = {len(k) for k in rows}
        if len(sizes) != 1:
            raise ModelError("truth table rows have mixed arity")
        arity = sizes.pop()
    else:
        bits = [bool(int(b)) for b in table]
        if len(bits) < 2 or len(bits) & (len(bits) - 1):
            raise ModelError("truth table length must be a power of two")
        arity = len(bits).bit_length() - 1
        rows = {}
        for idx, truth in enumerate(bits):
            row = tuple((idx >> (arity - 1 - j)) & 1 for j in range(arity))
            rows[row] = truth
    if n is not None and arity != n:
        raise ModelError(f"truth table arity {arity} does not match gadget arity {n}")
    if len(rows) != 2**arity:
        raise ModelError("truth table is missing rows")
    return rows


# -- shipped gadget library ---------------------------------------------------

_GF2 = FieldOrder(2)


def not_gadget() -> Gadget:
    return Gadget("not", _GF2, 1, 0, (((1,), (0,), 1),), s_yes=1, s_no=0, kind="exact")


def and_gadget(n: int = 2) -> Gadget:
    """All parity constraints b.x = |b| over nonzero b; yes count 2^n - 1."""
    cons = []
    for b in itertools.product((0, 1), repeat=n):
        if not any(b):
            continue
        cons.append((b, (sum(b) % 2,), 1))
    return Gadget(
        "and",
        _GF2,
        n,
        0,
        tuple(cons),
        s_yes=2**n - 1,
        s_no=2 ** (n - 1) - 1,
        kind="exact",
    )


def or_gadget(n: int = 2) -> Gadget:
    """Constraints b.x = 1 for all nonzero b; satisfied count is constant on
    every nonzero input row."""
    cons = []
    for b in itertools.product((0, 1), repeat=n):
        if not any(b):
            continue
        cons.append((b, (1,), 1))
    return Gadget(
        "or", _GF2, n, 0, tuple(cons), s_yes=2 ** (n - 1), s_no=0, kind="exact"
    )


def xor_gadget(n: int = 2) -> Gadget:
    coeffs = (1,) * n
    return Gadget("xor", _GF2, n, 0, ((coeffs, (1,), 1),), s_yes=1, s_no=0, kind="exact")


@lru_cache(maxsize=None)
def majority3_gadget() -> Gadget:
    """Three-bit majority, synthesized rather than hardcoded.

    Searched in approximate form first (smallest constraint count), widening
    the budget until a template is found.
    """
    table = [0, 0, 0, 1, 0, 1, 1, 1]
    for budget in (3, 4, 5):
        g = synthesize_gadget(table, _GF2, max_constraints=budget, kind="approximate")
        if g is not None:
            return Gadget(
                "majority3", g.order, g.arity, g.aux_count, g.constraints, g.s_yes, g.s_no, g.kind
            )
    raise ModelError("no majority-3 gadget found within budget")  # pragma: no cover


def library() -> dict:
    return {
        "not": not_gadget(),
        "and": and_gadget(),
        "or": or_gadget(),
        "xor": xor_gadget(),
        "majority3": majority3_gadget(),
    }


# -- instantiation -------------------------------------------------------------


def instantiate(
    g: Gadget,
    inst: LinsatInstance,
    inputs: Sequence[LinsatVar],
    weight_scale: int = 1,
    tag: Optional[str] = None,
) -> list:
    """Instantiate a gadget on concrete instance variables.

    Fresh auxiliary variables are created; template weights are multiplied by
    ``weight_scale``.  Returns the constraint indices that were touched.
    """
    if len(inputs) != g.arity:
        raise ModelError(f"gadget {g.name!r} expects {g.arity} inputs, got {len(inputs)}")
    if inst.order != g.order:
        raise ModelError("gadget and instance field orders differ")
    if weight_scale < 1:
        raise ModelError("weight scale must be a positive integer")
    if tag is None:
        tag = f"gadget:{g.name}#{inst.num_constraints}"
    slots = [v.id for v in inputs]
    for j in range(g.aux_count):
        slots.append(inst.new_var(f"_{g.name}_aux{len(inst.variables)}").id)
    indices = []
    for coeffs, members, weight in g.constraints:
        cmap: dict = {}
        for slot, c in zip(slots, coeffs):
            if c:
                cmap[slot] = cmap.get(slot, 0) + c
        cmap = {i: c % inst.p for i, c in cmap.items() if c % inst.p}
        if not cmap:
            raise ModelError("gadget constraint collapsed to a constant on these inputs")
        value_map = {v: weight * weight_scale for v in members}
        indices.append(inst.add_constraint(cmap, value_map, provenance=(tag,)))
    return indices


# -- synthesis ------------------------------------------------------------------


def _candidate_constraints(order: FieldOrder, slots: int) -> list:
    """All canonical candidate constraints: nonzero coefficient vectors with
    leading coefficient 1, paired with nonempty proper member subsets."""
    p = order.p
    vectors = []
    for vec in itertools.product(range(p), repeat=slots):
        nz = [v for v in vec if v]
        if not nz or nz[0] != 1:
            continue
        vectors.append(vec)
    members = []
    for size in range(1, p):
        members.extend(itertools.combinations(range(p), size))
    return [(vec, mem) for vec in vectors for mem in members]


def synthesize_gadget(
    table,
    order: FieldOrder,
    max_constraints: int,
    kind: str = "exact",
    aux_count: int = 0,
    candidate_cap: int = 10**7,
) -> Optional[Gadget]:
    """Exhaustive search for a gadget realizing a truth table.

    Searches subsets of candidate constraints in order of increasing size and
    then lexicographically, returning the first valid gadget (unit weights).
    Returns None if no gadget exists within the budget; raises GuardExceeded
    if the subset space is larger than ``candidate_cap``.
    """
    if kind not in ("exact", "approximate"):
        raise ModelError(f"unknown gadget kind {kind!r}")
    rows = _normalize_table(table)
    arity = len(next(iter(rows)))
    if not any(rows.values()) or all(rows.values()):
        return None  # no gap between yes and no cases can exist
    candidates = _candidate_constraints(order, arity + aux_count)
    space = sum(math.comb(len(candidates), j) for j in range(1, max_constraints + 1))
    if space > candidate_cap:
        raise GuardExceeded(
            f"gadget search space {space} exceeds cap {candidate_cap}"
        )
    p = order.p
    assignments = [
        row + aux
        for row in sorted(rows)
        for aux in itertools.product(range(p), repeat=aux_count)
    ]
    aux_block = p**aux_count
    # satisfaction profile of each candidate over all assignments
    profiles = []
    for vec, mem in candidates:
        mem_set = set(mem)
        profiles.append(
            tuple(
                int(sum(c * x for c, x in zip(vec, a)) % p in mem_set)
                for a in assignments
            )
        )
    sorted_rows = sorted(rows)
    for size in range(1, max_constraints + 1):
        for combo in itertools.combinations(range(len(candidates)), size):
            yes_vals = []
            no_vals = []
            for r, row in enumerate(sorted_rows):
                base = r * aux_block
                best = max(
                    sum(profiles[c][base + a] for c in combo) for a in range(aux_block)
                )
                (yes_vals if rows[row] else no_vals).append(best)
            if len(set(yes_vals)) != 1:
                continue
            s_yes = yes_vals[0]
            if any(v >= s_yes for v in no_vals):
                continue
            if kind == "exact" and len(set(no_vals)) != 1:
                continue
            cons = tuple((candidates[c][0], candidates[c][1], 1) for c in combo)
            return Gadget(
                "synth", order, arity, aux_count, cons, s_yes, max(no_vals), kind
            )
    return None


# -- distance gadget and duplicate repair ---------------------------------------


@dataclass
class RepairReport:
    """What repair/distance passes did: one entry per pinned auxiliary variable."""

    pins: list  # (host constraint index in the result, aux var id)

    @property
    def added(self) -> int:
        return len(self.pins)


def distance_gadget(
    inst: LinsatInstance, index: int, k: int, aux_weight: Optional[int] = None
) -> LinsatInstance:
    """Extend constraint ``index`` with k fresh pinned variables.

    The constraint's expression gains + y_1 + ... + y_k with unchanged
    right-hand side, and k constraints y_j in {0} are added.  With the
    default pin weight (the host's largest member weight) the new objective
    satisfies  max over y = k * pin_weight + old objective  for every x.
    """
    if not 0 <= index < inst.num_constraints:
        raise ModelError(f"no constraint with index {index}")
    if k < 0:
        raise ModelError("k must be non-negative")
    out = inst.copy(merge="none")
    if k == 0:
        return out
    host = out.constraints[index]
    if aux_weight is None:
        aux_weight = max(w for _, w in host.rhs)
    coeffs = dict(host.coeffs)
    pin_ids = []
    for _ in range(k):
        y = out.new_var(f"_y{len(out.variables)}")
        coeffs[y.id] = 1
        pin_ids.append(y.id)
    new_host = type(host)(tuple(sorted(coeffs.items())), host.rhs, host.provenance)
    out.constraints[index] = new_host
    for y_id in pin_ids:
        out._insert(((y_id, 1),), ((0, aux_weight),), (f"repair#{index}",))
    return out


def repair_duplicates(inst: LinsatInstance) -> tuple:
    """Apply the distance gadget (k=1) to all but one of each group of
    constraints sharing a left-hand side, so no duplicate rows remain.

    Expects an unweighted instance (run to_unweighted first).
    """
    if not inst.is_unweighted():
        raise ModelError("repair_duplicates expects an unweighted instance")
    out = inst.copy(merge="none")
    report = RepairReport(pins=[])
    groups: dict = {}
    for i, c in enumerate(out.constraints):
        groups.setdefault(c.coeffs, []).append(i)
    pins = []
    for key in sorted(groups, key=lambda k: groups[k][0]):
        members = groups[key]
        for i in members[1:]:
            host = out.constraints[i]
            y = out.new_var(f"_y{len(out.variables)}")
            coeffs = dict(host.coeffs)
            coeffs[y.id] = 1
            out.constraints[i] = type(host)(
                tuple(sorted(coeffs.items())), host.rhs, host.provenance
            )
            pins.append((i, y.id))
    for i, y_id in pins:
        out._insert(((y_id, 1),), ((0, 1),), (f"repair#{i}",))
        report.pins.append((i, y_id))
    seen = set()
    for c in out.constraints:
        if c.coeffs in seen:
            raise ModelError("internal error: duplicates remain after repair")
        seen.add(c.coeffs)
    return out, report
