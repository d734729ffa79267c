"""Consistency-radius minimization on encoded problems.

Two problems are solved:

* constrained -- every ``N_n`` must hold a global section. Sections are
  parameterized by the initial states and one control per vertex and step;
  the remaining values follow from the dynamics and the objectives. Small
  finite parameter spaces are searched exhaustively, larger or continuous
  ones by seeded multi-start coordinate descent.
* relaxed -- every stalk value is free. Coordinate descent over elements,
  exact on finite stalks and on maximal real stalks, pattern search
  elsewhere.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .encode import EncodedProblem
from .errors import BudgetExhausted, InfeasibleProblem
from .sheaf import Sheaf, assignment_distance, consistency_radius, is_global_section
from .space import Space, as_point

__all__ = [
    "SolveRequest",
    "SolveResult",
    "GapRow",
    "Parameter",
    "section_parameters",
    "solve",
    "solve_constrained",
    "solve_relaxed",
    "relaxation_gap",
    "minimize_consistency_radius",
]

CONSTRAINED = "constrained"
RELAXED = "relaxed"


@dataclass
class SolveRequest:
    """Settings of one solve.

    ``budget`` caps objective evaluations (constrained) or local cost
    evaluations (relaxed). ``reference`` is a constrained result used as
    warm start and as the section in the relaxation certificate.
    """

    encoded: EncodedProblem
    mode: str = CONSTRAINED
    budget: int = 20000
    seed: int = 0
    tolerance: float = 1e-6
    starts: int = 8
    exhaustive_limit: int = 4096
    threads: int = 1
    reference: SolveResult | None = None
    strict: bool = False

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.mode not in (CONSTRAINED, RELAXED):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.starts < 1:
            raise ValueError("at least one start is required")


@dataclass
class GapRow:
    step: int
    c_N: float
    d_N: float
    d_M: float
    section_ok: bool
    distance_ok: bool

    @property
    def bound(self) -> float:
        return 2.0 * self.d_N

    @property
    def passed(self) -> bool:
        return self.section_ok and self.distance_ok

    def as_dict(self) -> dict:
        return {"step": self.step, "c_N": self.c_N, "d_N": self.d_N, "bound": self.bound,
                "d_M": self.d_M, "section_ok": self.section_ok, "distance_ok": self.distance_ok}


@dataclass
class SolveResult:
    mode: str
    assignment: dict
    objective: float
    local_cr_N: list
    converged: bool
    exhaustive: bool
    evaluations: int
    candidates: int | None = None
    trace: list = field(default_factory=list)
    gap: list | None = None
    controls: list | None = None
    initial_state: dict | None = None


# -- constrained ---------------------------------------------------------------

@dataclass
class Parameter:
    """One free quantity of the section parameterization.

    ``options`` lists the admissible values of a finite parameter;
    continuous parameters carry a box (``lo``/``hi`` may be infinite).
    """

    kind: str  # "initial" or "control"
    vertex: str
    step: int
    options: list | None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    @property
    def finite(self) -> bool:
        return self.options is not None


def _box(space: Space, dim: int):
    b = space.box()
    if b is None:
        return np.full(dim, -np.inf), np.full(dim, np.inf)
    return np.asarray(b[0], dtype=float), np.asarray(b[1], dtype=float)


def section_parameters(enc: EncodedProblem) -> list:
    """Initial states (unless fixed) then controls step by step, vertices in order."""
    p = enc.problem
    params = []
    if p.initial_state is None:
        for v in p.vertices:
            opts = p.state_options(v)
            lo, hi = _box(p.S[v], p.S[v].dim) if opts is None else (None, None)
            params.append(Parameter("initial", v, 0, opts, lo, hi))
    for n in range(p.horizon):
        for v in p.vertices:
            opts = p.control_options(v)
            lo, hi = _box(p.C[v], p.C[v].dim) if opts is None else (None, None)
            params.append(Parameter("control", v, n, opts, lo, hi))
    return params


def _candidate_count(params) -> int | None:
    if not all(q.finite for q in params):
        return None
    return math.prod(len(q.options) for q in params)


class _Evaluator:
    def __init__(self, enc: EncodedProblem, params: list, budget: int):
        self.enc = enc
        self.params = params
        self.budget = budget
        self.count = 0

    def decode(self, values):
        p = self.enc.problem
        initial = dict(p.initial_state) if p.initial_state is not None else {}
        controls = [{} for _ in range(p.horizon)]
        for q, val in zip(self.params, values):
            if q.kind == "initial":
                initial[q.vertex] = val
            else:
                controls[q.step][q.vertex] = val
        return initial, controls

    def assignment(self, values):
        initial, controls = self.decode(values)
        return self.enc.trajectory_assignment(initial, controls)

    def __call__(self, values) -> float:
        self.count += 1
        a, ok = self.assignment(values)
        if not ok:
            return math.inf
        return consistency_radius(self.enc.S, a)

    @property
    def exhausted(self) -> bool:
        return self.count >= self.budget


def _initial_values(params, rng, k: int):
    """Start ``k``: 0 -> midpoints/largest options, 1 -> zeros/smallest options, then random."""
    out = []
    for q in params:
        if q.finite:
            if k == 0:
                out.append(max(q.options, key=lambda o: tuple(o)))
            elif k == 1:
                out.append(min(q.options, key=lambda o: tuple(o)))
            else:
                out.append(q.options[int(rng.integers(len(q.options)))])
        else:
            lo, hi = q.lo, q.hi
            mid = np.where(np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi), 0.0)
            mid = np.clip(mid, lo, hi)
            if k == 0:
                out.append(mid)
            elif k == 1:
                out.append(np.clip(np.zeros_like(mid), lo, hi))
            else:
                width = np.where(np.isfinite(hi - lo), hi - lo, 2.0)
                out.append(np.clip(mid + (rng.random(mid.shape) - 0.5) * width, lo, hi))
    return out


def _descend(ev: _Evaluator, values: list, tolerance: float):
    """Coordinate descent from ``values``: full scans of finite parameters,
    compass search with halving steps on continuous ones."""
    params = ev.params
    values = [np.array(v, dtype=float) for v in values]
    best = ev(values)
    steps = []
    for q in params:
        if q.finite:
            steps.append(None)
        else:
            width = np.where(np.isfinite(q.hi - q.lo), q.hi - q.lo, 1.0)
            steps.append(0.5 * np.maximum(1.0, width))
    while not ev.exhausted:
        improved = False
        for i, q in enumerate(params):
            if ev.exhausted:
                break
            if q.finite:
                for opt in q.options:
                    if np.array_equal(opt, values[i]):
                        continue
                    trial = values[:i] + [opt] + values[i + 1:]
                    val = ev(trial)
                    if val < best:
                        best, values, improved = val, trial, True
                    if ev.exhausted:
                        break
            else:
                for c in range(len(values[i])):
                    h = steps[i][c]
                    if h < tolerance:
                        continue
                    moved = False
                    for sign in (1.0, -1.0):
                        cand = values[i].copy()
                        cand[c] = np.clip(cand[c] + sign * h, q.lo[c], q.hi[c])
                        if cand[c] == values[i][c]:
                            continue
                        trial = values[:i] + [cand] + values[i + 1:]
                        val = ev(trial)
                        if val < best:
                            best, values, improved, moved = val, trial, True, True
                            break
                    if not moved:
                        steps[i][c] = 0.5 * h
                    if ev.exhausted:
                        break
        continuous_done = all(s is None or np.all(s < tolerance) for s in steps)
        if not improved and continuous_done:
            return values, best, True
        if not improved and all(s is None for s in steps):
            return values, best, True
    return values, best, False


def solve_constrained(req: SolveRequest) -> SolveResult:
    """Minimize the consistency radius of ``S`` over sections of every ``N_n``.

    Exhaustive (and globally optimal) when all parameters are finite and
    their product is at most ``exhaustive_limit``; ties go to the first
    candidate in lexicographic parameter order. Otherwise seeded multi-start
    coordinate descent, a heuristic.

    Raises
    ------
    InfeasibleProblem
        If no candidate yields a feasible trajectory.
    BudgetExhausted
        Only when ``req.strict`` is set and the budget ran out.
    """
    enc = req.encoded
    params = section_parameters(enc)
    count = _candidate_count(params)
    trace = []
    if count is not None and count <= req.exhaustive_limit:
        ev = _Evaluator(enc, params, budget=count + 1)
        best, best_vals = math.inf, None
        for combo in itertools.product(*(q.options for q in params)):
            val = ev(list(combo))
            if val < best:
                best, best_vals = val, list(combo)
                trace.append((ev.count, best))
        converged, exhaustive = True, True
    else:
        results = _multistart(lambda k: _constrained_start(enc, params, req, k), req.starts, req.threads)
        best_vals, best, converged, evals = None, math.inf, True, 0
        for k, (vals, val, conv, used) in enumerate(results):
            trace.append((k, val))
            evals += used
            converged = converged and conv
            if val < best:
                best, best_vals = val, vals
        ev = _Evaluator(enc, params, req.budget)
        ev.count = evals
        exhaustive = False
    if best_vals is None or not math.isfinite(best):
        raise InfeasibleProblem("no feasible trajectory found")
    a, _ = ev.assignment(best_vals)
    initial, controls = ev.decode(best_vals)
    res = SolveResult(CONSTRAINED, a, consistency_radius(enc.S, a), _local(enc, a), converged, exhaustive,
                      ev.count, count, trace, controls=controls, initial_state=initial)
    if req.strict and not converged:
        raise BudgetExhausted("evaluation budget exhausted", res)
    return res


def _constrained_start(enc, params, req, k):
    rng = np.random.default_rng([req.seed, k])
    ev = _Evaluator(enc, params, max(1, req.budget // req.starts))
    vals, best, conv = _descend(ev, _initial_values(params, rng, k), req.tolerance)
    return vals, best, conv, ev.count


def _multistart(run, starts: int, threads: int) -> list:
    ks = list(range(starts))
    if threads > 1 and len(ks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, ks))
    return [run(k) for k in ks]


def _local(enc: EncodedProblem, a: Mapping) -> list:
    return [consistency_radius(enc.N[n], a) for n in range(enc.horizon)]


# -- relaxed -------------------------------------------------------------------

class _ElementSearch:
    """Local moves on one sheaf, counting local cost evaluations."""

    def __init__(self, sheaf: Sheaf, budget: int, tolerance: float):
        self.sheaf = sheaf
        self.budget = budget
        self.tolerance = tolerance
        self.count = 0
        self.maximal = {x: all(pair[1] == x for pair in sheaf.incident_pairs(x)) for x in sheaf.base.elements}

    def local_cost(self, a, x) -> float:
        self.count += 1
        total = 0.0
        for u, w in self.sheaf.incident_pairs(x):
            r = self.sheaf.residual(a, u, w)
            total += r * r
        return total

    def update(self, a, x, step) -> bool:
        """Improve ``a[x]`` in place; True when the local cost dropped."""
        stalk = self.sheaf.stalks[x]
        if stalk.dim == 0 or not self.sheaf.incident_pairs(x):
            return False
        old = a[x]
        base = self.local_cost(a, x)
        if stalk.is_finite:
            best, best_val = base, old
            for pt in stalk.points:
                if np.array_equal(pt, old):
                    continue
                a[x] = pt
                c = self.local_cost(a, x)
                if c < best:
                    best, best_val = c, pt
            a[x] = best_val
            return best < base
        if self.maximal[x] and stalk.predicate is None and stalk.sampler is None:
            incoming = [self.sheaf.restrictions[(u, x)](a[u]) for u, _ in self.sheaf.incident_pairs(x)]
            cand = np.mean(incoming, axis=0)
            if stalk.bounds is not None:
                cand = np.clip(cand, stalk.bounds[0], stalk.bounds[1])
            a[x] = cand
            c = self.local_cost(a, x)
            if c < base:
                return True
            a[x] = old
            return False
        # compass search on continuous stalks
        improved = False
        cur = np.array(old, dtype=float)
        for c in range(stalk.dim):
            h = step[x][c]
            if h < self.tolerance:
                continue
            moved = False
            for sign in (1.0, -1.0):
                cand = cur.copy()
                cand[c] += sign * h
                if not stalk.contains(cand):
                    continue
                a[x] = cand
                val = self.local_cost(a, x)
                if val < base:
                    base, cur, moved, improved = val, cand, True, True
                    break
            a[x] = cur
            if not moved:
                step[x][c] = 0.5 * h
        return improved


def _start_assignment(sheaf: Sheaf, rng, k: int) -> dict:
    a = {}
    for x in sheaf.base.elements:
        st = sheaf.stalks[x]
        if st.dim == 0:
            a[x] = np.zeros(0)
            continue
        if st.is_finite:
            if k in (0, 1):
                target = np.full(st.dim, 1.0 if k == 0 else 0.0)
                a[x] = min(st.points, key=lambda pt: (float(np.dot(pt - target, pt - target)), tuple(pt)))
            else:
                a[x] = st.sample(rng)
            continue
        box = st.box()
        if k == 0:
            v = np.zeros(st.dim) if box is None else 0.5 * (box[0] + box[1])
        elif k == 1:
            v = np.zeros(st.dim) if box is None else np.clip(np.zeros(st.dim), box[0], box[1])
        else:
            v = st.sample(rng)
        if not st.contains(v):
            v = st.sample(rng)
        a[x] = as_point(v)
    return a


def minimize_consistency_radius(sheaf: Sheaf, start: Mapping | None = None, seed: int = 0, starts: int = 8,
                                budget: int = 200000, tolerance: float = 1e-6, threads: int = 1,
                                fixed: Sequence = ()):
    """Unconstrained minimization of the consistency radius of ``sheaf``.

    Starts: ``start`` (when given), then middle/all-ones points, zeros, and
    seeded random assignments, ``starts`` in total. Each start runs
    element-wise coordinate descent in canonical order until a sweep makes
    no move and every continuous step has shrunk below ``tolerance``.
    Elements in ``fixed`` are left untouched.

    Returns ``(assignment, objective, converged, evaluations, trace)``.
    The merge keeps the smallest objective, ties to the earlier start.
    """
    fixed = set(fixed)
    per_start = max(1, budget // starts)
    offset = 0 if start is None else 1

    def run(k):
        rng = np.random.default_rng([seed, k])
        if start is not None and k == 0:
            a = {x: as_point(start[x]) if sheaf.stalks[x].dim else np.zeros(0) for x in sheaf.base.elements}
        else:
            a = _start_assignment(sheaf, rng, k - offset)
        if start is not None:
            for x in fixed:
                a[x] = as_point(start[x]) if sheaf.stalks[x].dim else np.zeros(0)
        search = _ElementSearch(sheaf, per_start, tolerance)
        step = {}
        for x in sheaf.base.elements:
            st = sheaf.stalks[x]
            box = st.box()
            width = np.ones(st.dim) if box is None else np.where(np.isfinite(box[1] - box[0]), box[1] - box[0], 1.0)
            step[x] = 0.5 * np.maximum(1.0, width)
        converged = False
        while search.count < per_start:
            moved = False
            for x in sheaf.base.elements:
                if x in fixed:
                    continue
                if search.update(a, x, step):
                    moved = True
                if search.count >= per_start:
                    break
            small = all(x in fixed or sheaf.stalks[x].is_finite or np.all(step[x] < tolerance) or search.maximal[x]
                        for x in sheaf.base.elements)
            if not moved and small:
                converged = True
                break
        return a, consistency_radius(sheaf, a), converged, search.count

    results = _multistart(run, starts, threads)
    best_k = min(range(len(results)), key=lambda k: (results[k][1], k))
    a, obj, _, _ = results[best_k]
    trace = [(k, r[1]) for k, r in enumerate(results)]
    return a, obj, all(r[2] for r in results), sum(r[3] for r in results), trace


def solve_relaxed(req: SolveRequest) -> SolveResult:
    """Minimize the consistency radius of ``S`` with every value free.

    When ``req.reference`` holds a constrained result it is used as the
    first start, so the relaxed objective never exceeds it, and the gap
    certificate against it is attached.
    """
    enc = req.encoded
    warm = req.reference.assignment if req.reference is not None else None
    a, obj, converged, evals, trace = minimize_consistency_radius(
        enc.S, start=warm, seed=req.seed, starts=req.starts, budget=req.budget,
        tolerance=req.tolerance, threads=req.threads)
    res = SolveResult(RELAXED, a, consistency_radius(enc.S, a), _local(enc, a), converged, False, evals, None, trace)
    if req.reference is not None:
        res.gap = relaxation_gap(enc, req.reference, res)
    if req.strict and not converged:
        raise BudgetExhausted("evaluation budget exhausted", res)
    return res


def solve(req: SolveRequest) -> SolveResult:
    return solve_constrained(req) if req.mode == CONSTRAINED else solve_relaxed(req)


def relaxation_gap(enc: EncodedProblem, constrained: SolveResult, relaxed: SolveResult, slack: float = 1e-9) -> list:
    """Per-step certificate comparing a relaxed solution ``b`` with a constrained one ``a``.

    For each step: the local consistency radius of ``b`` on ``N_n``, the
    distance between ``a`` and ``b`` on ``N_n`` and on ``N_n`` with its
    objective layer, and flags for ``c_N(b) <= 2 d_N(a, b) <= 2 d_M(a, b)``.
    """
    a, b = constrained.assignment, relaxed.assignment
    rows = []
    for n in range(enc.horizon):
        N = enc.N[n]
        if not is_global_section(N, a):
            raise ValueError(f"constrained assignment is not a section of step {n}")
        c = consistency_radius(N, b)
        d_n = assignment_distance(N, a, b, N.base.elements)
        d_m = assignment_distance(enc.S, a, b, enc.step_elements(n))
        rows.append(GapRow(n, c, d_n, d_m, c <= 2.0 * d_n + slack, 2.0 * d_n <= 2.0 * d_m + slack))
    return rows
