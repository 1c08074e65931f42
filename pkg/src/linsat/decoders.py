"""Syndrome decoders for the dual code of a Max-LINSAT instance.

Every decoder is built once from a CodeView (precomputation allowed) and is
then a pure function syndrome -> error vector.  A returned error e always
satisfies H e = syndrome exactly; decoders re-verify this before returning.

* LookupDecoder: full coset-leader table; complete (corrects every pattern
  that is the unique minimum-weight element of its coset).
* NearestDecoder: exhaustive nearest-codeword search; complete.
* PrangeDecoder: randomized information-set decoding; heuristic.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .codes import CodeView
from .errors import GuardExceeded, ModelError
from .gf import FieldMatrix, rank, solve

LOOKUP_GUARD = 2**18  # max number of syndromes in a lookup table
LOOKUP_SCAN_CAP = 10**7  # max error patterns scanned while filling the table
NEAREST_GUARD = 2**22  # max q**k for codeword enumeration
ISD_DEFAULT_ITERATIONS = 200


def _verify(view: CodeView, e: Sequence[int], syndrome: Sequence[int]) -> tuple:
    e = tuple(int(v) % view.order.p for v in e)
    if view.syndrome(e) != tuple(syndrome):
        raise ModelError("internal error: decoder produced H e != syndrome")
    return e


def error_patterns(m: int, q: int, weight: int):
    """Weight-``weight`` error vectors in (support, values) enumeration order."""
    for support in itertools.combinations(range(m), weight):
        for values in itertools.product(range(1, q), repeat=weight):
            e = [0] * m
            for pos, val in zip(support, values):
                e[pos] = val
            yield tuple(e)


def build_lookup(view: CodeView, guard: int = LOOKUP_GUARD, scan_cap: int = LOOKUP_SCAN_CAP) -> dict:
    """Coset-leader table: syndrome -> minimum-weight error in its coset.

    Leaders are found by scanning error patterns in order of increasing
    weight (ties broken by the deterministic pattern enumeration order), so
    each stored leader has minimum weight within its coset.
    """
    q = view.order.p
    r = rank(view.parity_check)
    size = q**r
    if size > guard:
        raise GuardExceeded(f"lookup table would have q^rank = {size} entries (guard {guard})")
    table: dict = {}
    scanned = 0
    for w in range(view.length + 1):
        for e in error_patterns(view.length, q, w):
            scanned += 1
            if scanned > scan_cap:
                raise GuardExceeded(f"lookup construction scanned over {scan_cap} patterns")
            s = view.syndrome(e)
            if s not in table:
                table[s] = e
                if len(table) == size:
                    return table
    return table


class LookupDecoder:
    name = "lookup"
    complete = True

    def __init__(self, view: CodeView, guard: int = LOOKUP_GUARD):
        self.view = view
        self.table = build_lookup(view, guard=guard)

    def decode(self, syndrome: Sequence[int]) -> Optional[tuple]:
        e = self.table.get(tuple(int(v) % self.view.order.p for v in syndrome))
        if e is None:
            return None
        return _verify(self.view, e, syndrome)


def nearest_codeword(view: CodeView, word: Sequence[int], guard: int = NEAREST_GUARD) -> tuple:
    """Codeword at minimum Hamming distance from ``word``.

    Ties are broken by picking the lexicographically smallest codeword.
    """
    cws = view.codewords(guard=guard)
    w = np.array([int(v) % view.order.p for v in word], dtype=np.int64)
    if w.shape[0] != view.length:
        raise ModelError(f"expected a word of length {view.length}")
    dists = np.count_nonzero(cws != w, axis=1)
    best = int(dists.min())
    candidates = [tuple(int(x) for x in cws[i]) for i in np.flatnonzero(dists == best)]
    return min(candidates)


class NearestDecoder:
    name = "nearest"
    complete = True

    def __init__(self, view: CodeView, guard: int = NEAREST_GUARD):
        q = view.order.p
        if q**view.dim > guard:
            raise GuardExceeded(f"q^k = {q**view.dim} exceeds guard {guard}")
        self.view = view
        self._codewords = view.codewords(guard=guard)

    def decode(self, syndrome: Sequence[int]) -> Optional[tuple]:
        view = self.view
        x0 = solve(view.parity_check, list(syndrome))
        if x0 is None:
            return None
        w = np.array([int(v) for v in x0], dtype=np.int64)
        dists = np.count_nonzero(self._codewords != w, axis=1)
        best = int(dists.min())
        candidates = [
            tuple(int(x) for x in self._codewords[i]) for i in np.flatnonzero(dists == best)
        ]
        c = min(candidates)
        p = view.order.p
        e = tuple((int(a) - int(b)) % p for a, b in zip(w, c))
        return _verify(view, e, syndrome)


class PrangeDecoder:
    """Information-set decoding: repeatedly guess an error-free coordinate
    set, solve for the error on the complement, keep the lightest solution.

    Heuristic: may return a non-minimal error or fail; deterministic for a
    fixed seed (the per-syndrome generator is derived from seed + syndrome,
    so results do not depend on call order).
    """

    name = "isd"
    complete = False

    def __init__(self, view: CodeView, iterations: int = ISD_DEFAULT_ITERATIONS, seed: int = 0):
        if iterations < 1:
            raise ModelError("iterations must be >= 1")
        self.view = view
        self.iterations = iterations
        self.seed = seed
        self._rank = rank(view.parity_check)
        self._columns = [view.parity_check.column(j) for j in range(view.length)]

    def decode(self, syndrome: Sequence[int]) -> Optional[tuple]:
        view = self.view
        p = view.order.p
        s = [int(v) % p for v in syndrome]
        rng = random.Random(f"isd:{self.seed}:{','.join(map(str, s))}")
        m = view.length
        best = None
        for _ in range(self.iterations):
            perm = rng.sample(range(m), m)
            chosen = _greedy_independent(self._columns, perm, p, self._rank)
            if len(chosen) < self._rank:
                continue
            sub = FieldMatrix(view.order, [[self._columns[j][i] for j in chosen] for i in range(view.parity_check.rows)], cols=len(chosen))
            sol = solve(sub, s)
            if sol is None:
                continue
            e = [0] * m
            for j, val in zip(chosen, sol):
                e[j] = int(val)
            weight = sum(1 for v in e if v)
            cand = (weight, tuple(e))
            if best is None or cand < best:
                best = cand
        if best is None:
            return None
        return _verify(view, best[1], s)


def _greedy_independent(columns, perm, p: int, target: int) -> list:
    """First ``target`` indices of ``perm`` whose columns are independent."""
    basis: list = []  # rows of the reduced basis, with pivot positions
    pivots: list = []
    chosen: list = []
    for j in perm:
        vec = list(columns[j])
        for piv, row in zip(pivots, basis):
            f = vec[piv]
            if f:
                vec = [(a - f * b) % p for a, b in zip(vec, row)]
        piv = next((i for i, v in enumerate(vec) if v), None)
        if piv is None:
            continue
        inv = pow(vec[piv], p - 2, p)
        basis.append([v * inv % p for v in vec])
        pivots.append(piv)
        chosen.append(j)
        if len(chosen) == target:
            break
    return chosen


def get_decoder(name: str, view: CodeView, seed: int = 0, iterations: int = ISD_DEFAULT_ITERATIONS, **kwargs):
    if name == "lookup":
        return LookupDecoder(view, **kwargs)
    if name == "nearest":
        return NearestDecoder(view, **kwargs)
    if name == "isd":
        return PrangeDecoder(view, iterations=iterations, seed=seed)
    raise ModelError(f"unknown decoder {name!r} (expected lookup, nearest or isd)")
