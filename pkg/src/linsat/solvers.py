"""Classical Max-LINSAT baselines: brute force, simulated annealing and
Prange's algorithm.

Every result re-verifies its satisfied weight through the instance before it
is returned.  Randomized solvers require an explicit seed and are
deterministic for a fixed seed; restarts derive per-restart seeds from one
master generator and reduce by (weight, assignment) so the outcome does not
depend on scheduling.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GuardExceeded, ModelError
from .gf import FieldMatrix, solve
from .instance import ASSIGNMENT_GUARD, LinsatInstance


@dataclass
class SolveResult:
    assignment: tuple
    weight: int
    solver: str
    wall_time: float
    seed: Optional[int] = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "assignment": list(self.assignment),
            "weight": self.weight,
            "solver": self.solver,
            "wall_time": self.wall_time,
            "seed": self.seed,
            "diagnostics": self.diagnostics,
        }


def _result(inst, assignment, solver, started, seed=None, diagnostics=None) -> SolveResult:
    assignment = tuple(int(v) % inst.p for v in assignment)
    weight = inst.evaluate(assignment)  # re-verify: the result carries this value
    return SolveResult(
        assignment, weight, solver, time.perf_counter() - started, seed, diagnostics or {}
    )


def brute_force(inst: LinsatInstance, guard: int = ASSIGNMENT_GUARD) -> SolveResult:
    """Global optimum by full enumeration; ties resolve to the
    lexicographically smallest assignment."""
    started = time.perf_counter()
    f = inst.evaluate_all(guard=guard)
    idx = int(np.argmax(f))  # first maximum = lexicographically smallest
    return _result(inst, inst.assignment_from_index(idx), "brute", started)


@dataclass
class AnnealSchedule:
    initial_temp: Optional[float] = None  # default: total instance weight
    cooling: float = 0.97
    stages: int = 200
    moves_per_stage: Optional[int] = None  # default: n * q


def simulated_annealing(
    inst: LinsatInstance,
    seed: int,
    schedule: Optional[AnnealSchedule] = None,
    restarts: int = 1,
) -> SolveResult:
    """Single-variable-move Metropolis annealing with geometric cooling."""
    if restarts < 1:
        raise ModelError("restarts must be >= 1")
    started = time.perf_counter()
    schedule = schedule or AnnealSchedule()
    master = random.Random(f"anneal:{seed}")
    best = None
    for _ in range(restarts):
        chain_seed = master.randrange(2**63)
        cand = _anneal_chain(inst, chain_seed, schedule)
        if best is None or (-cand[0], cand[1]) < (-best[0], best[1]):
            best = cand
    return _result(inst, best[1], "anneal", started, seed=seed)


def _anneal_chain(inst: LinsatInstance, chain_seed: int, schedule: AnnealSchedule) -> tuple:
    rng = random.Random(chain_seed)
    n, p = inst.num_vars, inst.p
    if n == 0:
        return inst.evaluate(()), ()
    temp = schedule.initial_temp if schedule.initial_temp is not None else float(
        max(1, inst.total_weight())
    )
    moves = schedule.moves_per_stage if schedule.moves_per_stage is not None else n * p
    x = [rng.randrange(p) for _ in range(n)]
    # incremental bookkeeping: value of each constraint's left-hand side
    cons = inst.constraints
    touch = [[] for _ in range(n)]
    for ci, c in enumerate(cons):
        for vid, coef in c.coeffs:
            touch[vid].append((ci, coef))
    values = [c.value_at(x, p) for c in cons]
    rhs_maps = [c.rhs_map() for c in cons]
    weight = sum(rhs_maps[ci].get(values[ci], 0) for ci in range(len(cons)))
    best_w, best_x = weight, tuple(x)
    for _ in range(schedule.stages):
        for _ in range(moves):
            j = rng.randrange(n)
            old = x[j]
            new = rng.randrange(p - 1)
            if new >= old:
                new += 1
            delta = 0
            for ci, coef in touch[j]:
                v_old = values[ci]
                v_new = (v_old + coef * (new - old)) % p
                delta += rhs_maps[ci].get(v_new, 0) - rhs_maps[ci].get(v_old, 0)
            if delta >= 0 or rng.random() < math.exp(delta / max(temp, 1e-12)):
                x[j] = new
                weight += delta
                for ci, coef in touch[j]:
                    values[ci] = (values[ci] + coef * (new - old)) % p
                if weight > best_w or (weight == best_w and tuple(x) < best_x):
                    best_w, best_x = weight, tuple(x)
        temp *= schedule.cooling
    return best_w, best_x


def prange_solve(inst: LinsatInstance, seed: int, restarts: int = 32) -> SolveResult:
    """Prange's algorithm as a solver: satisfy a maximal independent subset
    of constraints exactly by Gaussian elimination, leave the rest to chance.

    Each restart picks a random constraint order and a random target member
    value per selected constraint; the best assignment over restarts wins.
    On uniformly random instances one run satisfies about n + (m - n)/q
    constraints on average.
    """
    if restarts < 1:
        raise ModelError("restarts must be >= 1")
    started = time.perf_counter()
    n, p, m = inst.num_vars, inst.p, inst.num_constraints
    if n == 0 or m == 0:
        assignment = tuple([0] * n)
        return _result(inst, assignment, "prange", started, seed=seed)
    rows = []
    for c in inst.constraints:
        row = [0] * n
        for vid, coef in c.coeffs:
            row[vid] = coef
        rows.append(row)
    members = [sorted(v for v, _ in c.rhs) for c in inst.constraints]
    rng = random.Random(f"prange:{seed}")
    rank_seen = None
    best = None
    for _ in range(restarts):
        order = rng.sample(range(m), m)
        picked, targets = [], []
        basis, pivots = [], []
        for ci in order:
            vec = list(rows[ci])
            for piv, brow in zip(pivots, basis):
                f = vec[piv]
                if f:
                    vec = [(a - f * b) % p for a, b in zip(vec, brow)]
            piv = next((i for i, v in enumerate(vec) if v), None)
            if piv is None:
                continue
            inv = pow(vec[piv], p - 2, p)
            basis.append([v * inv % p for v in vec])
            pivots.append(piv)
            picked.append(ci)
            targets.append(rng.choice(members[ci]))
            if len(picked) == n:
                break
        rank_seen = len(picked)
        sub = FieldMatrix(inst.order, [rows[ci] for ci in picked], cols=n)
        sol = solve(sub, targets)
        if sol is None:  # cannot happen for an independent subset
            continue
        x = tuple(int(v) for v in sol)
        w = inst.evaluate(x)
        cand = (-w, x)
        if best is None or cand < best:
            best = cand
    diagnostics = {}
    if rank_seen is not None and rank_seen < n:
        diagnostics["rank_deficit"] = n - rank_seen
        diagnostics["note"] = "constraint matrix rank below n; free variables fixed to 0"
    return _result(inst, best[1], "prange", started, seed=seed, diagnostics=diagnostics)


def get_solver(name: str):
    if name in ("brute", "brute_force"):
        return lambda inst, seed=None, **kw: brute_force(inst, **kw)
    if name in ("anneal", "annealing"):
        return lambda inst, seed=0, **kw: simulated_annealing(inst, seed=seed, **kw)
    if name == "prange":
        return lambda inst, seed=0, **kw: prange_solve(inst, seed=seed, **kw)
    raise ModelError(f"unknown solver {name!r} (expected brute, anneal or prange)")
