"""Desk-scale DQI performance estimation.

The ideal DQI state for an instance with objective f and a degree-l
polynomial P assigns each assignment x the amplitude P(f(x)) (normalized).
At desk scale we build this state by direct enumeration, so the expected
satisfied weight of a measurement,

    E = sum_x |P(f(x))|^2 f(x) / sum_x |P(f(x))|^2,

is exact.  Over the coefficient vector c of P this is a Rayleigh quotient
(c^T A c)/(c^T M c) with moment matrices A[j,k] = sum_x f(x)^(j+k+1) and
M[j,k] = sum_x f(x)^(j+k); the optimal polynomial is the top eigenvector of
the generalized symmetric eigenproblem A c = lambda M c.

Whether DQI can actually prepare the state is governed by the dual code:
the fraction of error patterns of weight <= l the chosen decoder corrects.
Feasibility 1.0 means the state is exactly preparable; anything less is
reported as an approximate regime, where the ideal-state expectation is an
upper-bound proxy rather than an achieved value.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from . import codes as codes_mod
from .codes import CodeView
from .decoders import LookupDecoder, PrangeDecoder, error_patterns
from .errors import GuardExceeded, ModelError
from .instance import ASSIGNMENT_GUARD, LinsatInstance

STATE_GUARD = 2**20  # max q**n for state construction
FEASIBILITY_GUARD = 2**16  # max number of error patterns in exact mode
LOOKUP_AUTO_GUARD = 2**16  # auto decoder selection threshold


@dataclass(frozen=True)
class DqiPolynomial:
    """Real polynomial c0 + c1 t + ... + cl t^l."""

    coefficients: tuple

    def __post_init__(self):
        if not self.coefficients or not any(self.coefficients):
            raise ModelError("polynomial must have a nonzero coefficient")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(t, np.asarray(self.coefficients, dtype=float))


def uniform_polynomial() -> DqiPolynomial:
    return DqiPolynomial((1.0,))


def build_dqi_state(
    inst: LinsatInstance, poly: DqiPolynomial, guard: int = STATE_GUARD
) -> np.ndarray:
    """Normalized amplitude vector P(f(x)) over all q^n assignments.

    Index order matches LinsatInstance.evaluate_all (variable 0 is the most
    significant base-q digit).
    """
    f = inst.evaluate_all(guard=guard)
    amps = poly(f.astype(float))
    norm = float(np.sqrt(np.sum(amps * amps)))
    if norm == 0.0:
        raise ModelError("polynomial annihilates every objective value; state is zero")
    return amps / norm


def expected_satisfied(state: np.ndarray, inst: LinsatInstance, guard: int = STATE_GUARD) -> float:
    """Expected satisfied weight when measuring the given state."""
    f = inst.evaluate_all(guard=guard)
    if state.shape != f.shape:
        raise ModelError("state does not match the instance's assignment space")
    return float(np.sum(state * state * f))


def _moments(f: np.ndarray, degree: int) -> tuple:
    """Scaled moment matrices (A, M, fmax) using t = f/fmax for conditioning."""
    fmax = float(f.max()) if f.size and f.max() > 0 else 1.0
    t = f.astype(float) / fmax
    powers = [np.sum(t**i) for i in range(2 * degree + 2)]
    m = np.array([[powers[j + k] for k in range(degree + 1)] for j in range(degree + 1)])
    a = np.array(
        [[np.sum(t ** (j + k + 1)) for k in range(degree + 1)] for j in range(degree + 1)]
    )
    return a, m, fmax


def rayleigh_quotient(inst_or_f, poly: DqiPolynomial, guard: int = STATE_GUARD) -> float:
    """Expected satisfied weight of the (normalized) state built from poly."""
    f = inst_or_f if isinstance(inst_or_f, np.ndarray) else inst_or_f.evaluate_all(guard=guard)
    amps = poly(f.astype(float))
    denom = float(np.sum(amps * amps))
    if denom == 0.0:
        raise ModelError("polynomial annihilates every objective value")
    return float(np.sum(amps * amps * f) / denom)


def optimal_polynomial(
    inst: LinsatInstance, degree: int, guard: int = STATE_GUARD
) -> DqiPolynomial:
    """Degree-<=degree polynomial maximizing the expected satisfied weight.

    Solved as a generalized symmetric eigenproblem on the moment matrices.
    When f takes fewer than degree+1 distinct values, the effective degree is
    reduced (the extra coefficients cannot change the state).
    """
    if degree < 0:
        raise ModelError("degree must be non-negative")
    f = inst.evaluate_all(guard=guard)
    distinct = int(np.unique(f).size)
    eff = min(degree, distinct - 1)
    if eff <= 0:
        return uniform_polynomial()
    a, m, fmax = _moments(f, eff)
    vals, vecs = scipy.linalg.eigh(a, m)
    c = vecs[:, -1]
    nz = np.flatnonzero(np.abs(c) > 1e-14)
    if nz.size and c[nz[0]] < 0:
        c = -c
    coeffs = tuple(float(c[j]) / fmax**j for j in range(eff + 1))
    return DqiPolynomial(coeffs)


def _ball_sizes(m: int, q: int, radius: int) -> list:
    return [math.comb(m, w) * (q - 1) ** w for w in range(radius + 1)]


def decoder_feasibility(
    view: CodeView,
    degree: int,
    decoder,
    samples: Optional[int] = None,
    seed: int = 0,
    guard: int = FEASIBILITY_GUARD,
) -> tuple:
    """Fraction of weight-<=degree error patterns the decoder corrects.

    Exact mode (samples None) enumerates the whole ball; sampled mode draws
    patterns uniformly over the ball: first a weight w with probability
    proportional to C(m, w)(q-1)^w, then a uniform pattern of that weight.
    Returns (fraction, details dict).
    """
    q = view.order.p
    m = view.length
    if degree < 0:
        raise ModelError("degree must be non-negative")
    sizes = _ball_sizes(m, q, degree)
    total = sum(sizes)
    if samples is None:
        if total > guard:
            raise GuardExceeded(
                f"{total} error patterns exceed the exact-mode guard {guard}; use sampling"
            )
        good = 0
        for w in range(degree + 1):
            for e in error_patterns(m, q, w):
                if decoder.decode(view.syndrome(e)) == e:
                    good += 1
        return good / total, {"mode": "exact", "patterns": total, "correct": good}
    rng = random.Random(f"feas:{seed}")
    cumulative = list(itertools.accumulate(sizes))
    good = 0
    for _ in range(samples):
        r = rng.randrange(total)
        w = next(i for i, c in enumerate(cumulative) if r < c)
        support = sorted(rng.sample(range(m), w))
        e = [0] * m
        for pos in support:
            e[pos] = rng.randrange(1, q)
        e = tuple(e)
        if decoder.decode(view.syndrome(e)) == e:
            good += 1
    return good / samples, {"mode": "sampled", "samples": samples, "seed": seed, "correct": good}


@dataclass
class DqiEstimate:
    """Expected satisfied weight of the ideal DQI state plus preparability."""

    expected: float
    normalization: float
    degree: int
    polynomial: DqiPolynomial
    regime: str  # "exact_preparable" | "approximate"
    feasibility: float
    feasibility_mode: str
    samples: Optional[int]
    seed: Optional[int]
    decoder: str
    d_min: Optional[int]
    total_weight: int

    def to_dict(self) -> dict:
        return {
            "l": self.degree,
            "coefficients": [float(c) for c in self.polynomial.coefficients],
            "expected": self.expected,
            "total_weight": self.total_weight,
            "feasibility": self.feasibility,
            "mode": self.feasibility_mode,
            "samples": self.samples,
            "seed": self.seed,
            "decoder": self.decoder,
            "d_min": self.d_min,
            "regime": self.regime,
        }


def estimate(
    inst: LinsatInstance,
    degree: Optional[int] = None,
    decoder=None,
    samples: Optional[int] = None,
    seed: int = 0,
    state_guard: int = STATE_GUARD,
    feasibility_guard: int = FEASIBILITY_GUARD,
    dmin_cap: int = codes_mod.SUBSET_CAP,
) -> DqiEstimate:
    """One-stop DQI report: optimal polynomial, expectation, preparability.

    Requires an unweighted instance (run to_unweighted/repair first).  With
    ``degree`` unset, l = floor((d_min - 1) / 2); with ``decoder`` unset, a
    lookup decoder is used when its table fits the guard and information-set
    decoding otherwise.  In the approximate regime (feasibility < 1) the
    reported expectation is an upper-bound proxy for achievable performance.
    """
    if not inst.is_unweighted():
        raise ModelError(
            "DQI estimation needs an unweighted instance; use to_unweighted plus "
            "repair_duplicates/equalize_set_sizes first"
        )
    view = CodeView.from_instance(inst)
    dmin = codes_mod.min_distance(view, cap=dmin_cap)
    if degree is None:
        if dmin.value is not None:
            degree = max(0, (dmin.value - 1) // 2)
        else:
            degree = dmin_cap // 2  # d_min exceeds the search cap; stay conservative
    if degree >= inst.num_constraints:
        raise ModelError(f"polynomial degree {degree} must be below m = {inst.num_constraints}")
    decoder_name = None
    if decoder is None:
        q = view.order.p
        r = view.length - view.dim
        if q**r <= LOOKUP_AUTO_GUARD:
            decoder = LookupDecoder(view)
        else:
            decoder = PrangeDecoder(view, seed=seed)
    decoder_name = getattr(decoder, "name", type(decoder).__name__)
    if samples is None and sum(_ball_sizes(view.length, view.order.p, degree)) > feasibility_guard:
        samples = 1000
    feasibility, details = decoder_feasibility(
        view, degree, decoder, samples=samples, seed=seed, guard=feasibility_guard
    )
    poly = optimal_polynomial(inst, degree, guard=state_guard)
    state = build_dqi_state(inst, poly, guard=state_guard)
    expected = expected_satisfied(state, inst, guard=state_guard)
    return DqiEstimate(
        expected=expected,
        normalization=float(np.sum(state * state)),
        degree=degree,
        polynomial=poly,
        regime="exact_preparable" if feasibility == 1.0 else "approximate",
        feasibility=feasibility,
        feasibility_mode=details["mode"],
        samples=details.get("samples"),
        seed=details.get("seed"),
        decoder=decoder_name,
        d_min=dmin.value,
        total_weight=inst.total_weight(),
    )
