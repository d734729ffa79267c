"""Brute-force reference computations used by the tests.

Everything here works from the raw problem data (graph edges, feasible
points, vertex callables) and avoids the package's sheaf machinery.
"""

import itertools
import math

import numpy as np


def neighbors(p, v):
    """Vertices with an edge into ``v``: ``v`` first, the rest sorted."""
    into = {a for a, b in p.graph.edges if b == v}
    return [v] + sorted(into - {v})


def feasible_points(p, v):
    return [np.asarray(x, dtype=float) for x in p.F[v].points]


def feasible_labelings(p):
    """All choices of one feasible tuple per vertex whose shared states agree."""
    verts = list(p.vertices)
    out = []
    for choice in itertools.product(*(feasible_points(p, v) for v in verts)):
        seen, ok = {}, True
        for v, x in zip(verts, choice):
            for i, w in enumerate(neighbors(p, v)):
                s = float(x[1 + i])
                if seen.setdefault(w, s) != s:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out.append(dict(zip(verts, choice)))
    return out


def step_cost(p, tuples):
    """Sum of squared objective values of one step, tuples keyed by vertex."""
    total = 0.0
    for v in p.vertices:
        x = tuples[v]
        js = float(p.models[v].objective_state(x[1:2])[0]) if p.models[v].objective_state else 0.0
        jc = float(p.models[v].objective_control(x)[0]) if p.models[v].objective_control else 0.0
        total += js * js + jc * jc
    return total


def brute_force_optimum(p):
    """``(best, count)``: the minimal objective over every feasible trajectory and the number of candidates.

    Candidates are one initial state per vertex (fixed when the problem
    fixes it) and one control per vertex and step, drawn from the values
    that occur in the feasible sets. The objective is the root of the summed
    squared objective values over all steps.
    """
    verts = list(p.vertices)
    pts = {v: feasible_points(p, v) for v in verts}
    ctl = {v: sorted({float(x[0]) for x in pts[v]}) for v in verts}
    if p.initial_state is not None:
        inits = [tuple(float(p.initial_state[v][0]) for v in verts)]
    else:
        inits = list(itertools.product(*(sorted({float(x[1]) for x in pts[v]}) for v in verts)))
    step_choices = list(itertools.product(*(ctl[v] for v in verts)))
    feasible = {v: {tuple(x) for x in pts[v]} for v in verts}
    best, count = math.inf, 0
    for init in inits:
        for seq in itertools.product(step_choices, repeat=p.horizon):
            count += 1
            state = dict(zip(verts, init))
            total, ok = 0.0, True
            for u in seq:
                cu = dict(zip(verts, u))
                tuples = {v: np.array([cu[v]] + [state[w] for w in neighbors(p, v)]) for v in verts}
                if any(tuple(tuples[v]) not in feasible[v] for v in verts):
                    ok = False
                    break
                total += step_cost(p, tuples)
                state = {v: float(p.models[v].dynamics(tuples[v])[0]) for v in verts}
            if ok:
                best = min(best, math.sqrt(total))
    return best, count


def trajectory_cost(p, initial, controls):
    """Objective of one control sequence, or None when it leaves the feasible sets."""
    verts = list(p.vertices)
    feasible = {v: {tuple(x) for x in feasible_points(p, v)} for v in verts}
    state = {v: float(initial[v][0]) for v in verts}
    total = 0.0
    for u in controls:
        tuples = {v: np.array([float(u[v][0])] + [state[w] for w in neighbors(p, v)]) for v in verts}
        if any(tuple(tuples[v]) not in feasible[v] for v in verts):
            return None
        total += step_cost(p, tuples)
        state = {v: float(p.models[v].dynamics(tuples[v])[0]) for v in verts}
    return math.sqrt(total)
