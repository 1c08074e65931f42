"""Coding-theoretic analysis of a Max-LINSAT instance.

The dual code of an instance with constraint matrix B (m rows, n columns) is
C = {y in GF(p)^m : B^T y = 0}, i.e. the linear code whose parity-check
matrix is B^T.  Its minimum distance equals the smallest number of linearly
dependent rows of B, which is what bounds the polynomial degree a decoder
can support.

Two independent minimum-distance algorithms are kept on purpose (dependent
row-subset search, and full codeword enumeration) so each can serve as an
oracle for the other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import GuardExceeded, ModelError
from .gf import FieldMatrix, FieldOrder, kernel_basis, rank
from .instance import LinsatInstance

ENUM_GUARD = 2**22  # max q**k for codeword enumeration
SUBSET_CAP = 6  # default max dependent-set size for subset search


@dataclass(frozen=True)
class CodeView:
    """The dual code of an instance: parity check H = B^T (n x m)."""

    order: FieldOrder
    parity_check: FieldMatrix
    length: int  # m, number of constraints
    dim: int  # k = m - rank(H)

    @classmethod
    def from_instance(cls, inst: LinsatInstance) -> "CodeView":
        b = inst.constraint_matrix()
        h = b.transpose()
        return cls(inst.order, h, b.rows, b.rows - rank(h))

    @classmethod
    def from_parity_check(cls, h: FieldMatrix) -> "CodeView":
        return cls(h.order, h, h.cols, h.cols - rank(h))

    def syndrome(self, e: Sequence[int]) -> tuple:
        return self.parity_check.matvec(e)

    def codewords(self, guard: int = ENUM_GUARD) -> np.ndarray:
        """All q^k codewords as an array of shape (q^k, m); row 0 is zero."""
        q = self.order.p
        total = q**self.dim
        if total > guard:
            raise GuardExceeded(f"q^k = {total} exceeds enumeration guard {guard}")
        basis = kernel_basis(self.parity_check)  # (m, k)
        if self.dim == 0:
            return np.zeros((1, self.length), dtype=np.int64)
        bt = np.array(basis.transpose().int_rows(), dtype=np.int64)  # (k, m)
        grids = np.indices((q,) * self.dim).reshape(self.dim, -1).T  # (q^k, k)
        return grids @ bt % q


@dataclass
class MinDistanceResult:
    value: Optional[int]  # None means "> cap" (or no nonzero codeword at all)
    cap: Optional[int]
    method: str

    @property
    def exact(self) -> bool:
        return self.value is not None

    def __repr__(self):
        if self.value is None:
            bound = f"> {self.cap}" if self.cap is not None else "undefined (k = 0)"
            return f"d_min {bound} ({self.method})"
        return f"d_min = {self.value} ({self.method})"


def _rows_of(source) -> tuple:
    if isinstance(source, LinsatInstance):
        return source.constraint_matrix().int_rows(), source.order.p
    if isinstance(source, FieldMatrix):
        return source.int_rows(), source.order.p
    raise ModelError("expected a LinsatInstance or FieldMatrix")


def _subset_search(rows, p: int, cap: int) -> Optional[int]:
    m = len(rows)
    n = len(rows[0]) if rows else 0
    # d = 1: a zero row
    for r in rows:
        if all(v % p == 0 for v in r):
            return 1
    # d = 2: rows equal up to scaling; hash by canonical form
    seen = set()
    dup = False
    for r in rows:
        lead = next((v for v in r if v % p), None)
        inv = pow(lead, p - 2, p)
        key = tuple(v * inv % p for v in r)
        if key in seen:
            dup = True
            break
        seen.add(key)
    if dup:
        return 2 if cap >= 2 else None
    order = FieldOrder(p)
    for d in range(3, cap + 1):
        for combo in itertools.combinations(range(m), d):
            sub = FieldMatrix(order, [rows[i] for i in combo], cols=n)
            if rank(sub) < d:
                return d
    return None


def min_distance(
    view: CodeView,
    cap: int = SUBSET_CAP,
    method: str = "auto",
    enum_guard: int = ENUM_GUARD,
) -> MinDistanceResult:
    """Minimum distance of the dual code, or a "> cap" verdict.

    method "subset" searches for the smallest linearly dependent set of
    parity-check columns up to ``cap``; "enumeration" takes the minimum
    weight over all nonzero codewords (exact, needs q^k within the guard);
    "auto" enumerates when feasible and falls back to subset search.
    """
    q = view.order.p
    if method == "auto":
        method = "enumeration" if q**view.dim <= enum_guard else "subset"
    if method == "enumeration":
        cws = view.codewords(guard=enum_guard)
        if cws.shape[0] == 1:
            return MinDistanceResult(None, None, "enumeration")  # k=0: no nonzero codeword
        weights = np.count_nonzero(cws[1:], axis=1)
        return MinDistanceResult(int(weights.min()), None, "enumeration")
    if method != "subset":
        raise ModelError(f"unknown method {method!r}")
    rows = [list(r) for r in view.parity_check.transpose().int_rows()]
    if not rows:
        return MinDistanceResult(None, cap, "subset")
    return MinDistanceResult(_subset_search(rows, q, cap), cap, "subset")


def weight_enumerator(view: CodeView, guard: int = ENUM_GUARD) -> dict:
    """Exact histogram {codeword weight: count}; always contains {0: 1}."""
    cws = view.codewords(guard=guard)
    weights = np.count_nonzero(cws, axis=1)
    hist = np.bincount(weights, minlength=1)
    return {int(w): int(c) for w, c in enumerate(hist) if c}


@dataclass
class DependentSet:
    indices: tuple
    pattern: str  # duplicate | and_or_gadget | cycle | other


@dataclass
class DependencyReport:
    cap: int
    sets: list = field(default_factory=list)

    def patterns(self) -> dict:
        out: dict = {}
        for s in self.sets:
            out[s.pattern] = out.get(s.pattern, 0) + 1
        return out


def _classify(indices, rows, provenance) -> str:
    if len(indices) == 2:
        return "duplicate"
    if len(indices) == 3 and provenance:
        tags = None
        for i in indices:
            t = set(provenance[i]) if i < len(provenance) else set()
            tags = t if tags is None else tags & t
        if tags:
            return "and_or_gadget"
    if all(sum(1 for v in rows[i] if v) == 2 for i in indices):
        return "cycle"
    return "other"


def find_dependent_row_sets(
    source: Union[LinsatInstance, FieldMatrix],
    cap: int = SUBSET_CAP,
    provenance: Optional[Sequence] = None,
) -> DependencyReport:
    """All minimal linearly dependent row sets of B up to size ``cap``.

    A set is minimal when removing any element leaves independent rows,
    equivalently the left null space of the selected rows has dimension one
    and its basis vector has no zero entry.  Supersets of found minimal sets
    are pruned (they cannot be minimal).
    """
    rows, p = _rows_of(source)
    if provenance is None and isinstance(source, LinsatInstance):
        provenance = [c.provenance for c in source.constraints]
    order = FieldOrder(p)
    n = len(rows[0]) if rows else 0
    report = DependencyReport(cap=cap)
    found: list = []
    for d in range(1, cap + 1):
        for combo in itertools.combinations(range(len(rows)), d):
            if any(set(f) <= set(combo) for f in found):
                continue
            sub = FieldMatrix(order, [rows[i] for i in combo], cols=n)
            left_kernel = kernel_basis(sub.transpose())
            if left_kernel.cols != 1:
                continue
            coeffs = left_kernel.column(0)
            if any(c % p == 0 for c in coeffs):
                continue
            found.append(combo)
            report.sets.append(DependentSet(combo, _classify(combo, rows, provenance)))
    return report


@dataclass
class AnalysisReport:
    """Bundle returned by ``analyze`` and serialized by the CLI."""

    length: int
    dim: int
    num_vars: int
    d_min: MinDistanceResult
    dependencies: DependencyReport
    weights: Optional[dict] = None


def analyze(
    inst: LinsatInstance,
    dmin_cap: int = SUBSET_CAP,
    dep_cap: int = SUBSET_CAP,
    enumerate_weights: bool = False,
    enum_guard: int = ENUM_GUARD,
) -> AnalysisReport:
    view = CodeView.from_instance(inst)
    hist = None
    if enumerate_weights and view.order.p**view.dim <= enum_guard:
        hist = weight_enumerator(view, guard=enum_guard)
    return AnalysisReport(
        length=view.length,
        dim=view.dim,
        num_vars=inst.num_vars,
        d_min=min_distance(view, cap=dmin_cap, enum_guard=enum_guard),
        dependencies=find_dependent_row_sets(inst, cap=dep_cap),
        weights=hist,
    )
