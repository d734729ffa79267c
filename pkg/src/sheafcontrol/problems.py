"""Bundled problems and seeded random instance generators."""

from __future__ import annotations

import itertools
from importlib import resources

import numpy as np

from .affine import AffineDynamics, NominalStates, dynamics_component, nominal_problem
from .netmodel import DirectedGraph, NetworkProblem, VertexModel, neighborhood
from .poset import Poset
from .problemfile import LoadedProblem, load
from .sheaf import Sheaf
from .space import Space, StalkMap

__all__ = [
    "BUNDLED",
    "bundled_path",
    "load_bundled",
    "diamond_sheaf",
    "random_graph",
    "random_finite_problem",
    "random_affine_instance",
    "random_threshold_instance",
]

BUNDLED = ("lighting", "ups", "idle")


def bundled_path(name: str):
    if name not in BUNDLED:
        raise KeyError(f"no bundled problem {name!r}; choose from {BUNDLED}")
    return resources.files("sheafcontrol") / "data" / f"{name}.json"


def load_bundled(name: str) -> LoadedProblem:
    with resources.as_file(bundled_path(name)) as path:
        return load(path)


def diamond_sheaf() -> Sheaf:
    """Real line on ``a <= b, c <= d`` with identity restrictions."""
    base = Poset("abcd", [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")])
    line = Space.real(1)
    ident = StalkMap.identity(line)
    return Sheaf(base, {x: line for x in "abcd"}, {e: ident for e in base.hasse_edges}, name="diamond")


def random_graph(rng: np.random.Generator, n_vertices: int, density: float = 0.4) -> DirectedGraph:
    names = [f"v{i}" for i in range(n_vertices)]
    edges = [(a, b) for a in names for b in names if a != b and rng.random() < density]
    return DirectedGraph.with_self_edges(names, edges)


def _abs_objective(target, weight, index=0):
    return lambda x: np.array([weight * abs(float(x[index]) - target)])


def random_finite_problem(rng: np.random.Generator, n_vertices: int, horizon: int = 1, n_states: int = 2,
                          n_controls: int = 2, keep: float = 0.7, fixed_initial: bool = False) -> NetworkProblem:
    """Finite problem with random feasible subsets and table-driven dynamics.

    States are ``0 .. n_states-1``, controls ``0 .. n_controls-1``. For each
    combination of neighborhood states every control is kept with
    probability ``keep``, and at least one always is, so every state
    configuration admits a feasible control and every horizon is feasible.
    Each feasible tuple updates to a random state. Objectives are weighted
    distances to random targets.
    """
    g = random_graph(rng, n_vertices)
    states = [[float(s)] for s in range(n_states)]
    controls = [[float(c)] for c in range(n_controls)]
    models = {}
    for v in g.vertices:
        nb = neighborhood(g, v)
        feasible = []
        for s in itertools.product(range(n_states), repeat=len(nb)):
            mask = rng.random(n_controls) < keep
            if not mask.any():
                mask[int(rng.integers(n_controls))] = True
            feasible += [np.array([c] + list(s), dtype=float) for c in range(n_controls) if mask[c]]
        table = {tuple(t): float(rng.integers(n_states)) for t in feasible}
        models[v] = VertexModel(
            Space.finite(states), Space.finite(controls),
            lambda x, table=table: np.array([table[tuple(float(c) for c in x)]]),
            objective_state=_abs_objective(float(rng.integers(n_states)), float(rng.uniform(0.1, 2.0))),
            objective_control=_abs_objective(0.0, float(rng.uniform(0.0, 1.0))),
            feasible=feasible,
        )
    init = None
    if fixed_initial:
        init = {v: [float(rng.integers(n_states))] for v in g.vertices}
    return NetworkProblem(g, models, horizon, init, name="random-finite")


def _random_nominal(rng, names, min_gap: float = 1.0) -> NominalStates:
    n = len(names)
    s_phi = rng.uniform(-2.0, 1.0, n)
    s_omega = s_phi + rng.uniform(min_gap, 3.0, n)
    eta = s_phi + rng.uniform(0.05, 1.0, n) * (s_omega - s_phi)
    c0 = rng.uniform(-1.0, 1.0, n)
    c1 = c0 + rng.choice([-1.0, 1.0], n) * rng.uniform(0.5, 2.0, n)
    return NominalStates(names, s_phi, s_omega, eta, c0, c1)


def _random_affine(rng, g: DirectedGraph) -> AffineDynamics:
    names = list(g.vertices)
    pos = {v: i for i, v in enumerate(names)}
    A = np.zeros((len(names), len(names)))
    for w, v in g.edges:
        A[pos[v], pos[w]] = rng.normal()
    return AffineDynamics(names, A, rng.normal(size=len(names)), rng.normal(size=len(names)))


def random_affine_instance(rng: np.random.Generator, n_vertices: int, horizon: int = 1):
    """``(problem, nominal, dynamics)`` with random edge-respecting affine dynamics.

    The dynamics need not keep nominal states nominal; these instances
    exercise the thresholding identities, not the modeling assumptions.
    """
    g = random_graph(rng, n_vertices)
    n = _random_nominal(rng, list(g.vertices))
    d = _random_affine(rng, g)
    objs = {v: _abs_objective(n.states(v)[1], float(rng.uniform(0.1, 1.0))) for v in g.vertices}
    p = nominal_problem(g, n, d, horizon, objective_state=objs, name="random-affine")
    return p, n, d


def random_threshold_instance(rng: np.random.Generator, n_vertices: int = 2, horizon: int = 1):
    """``(problem, nominal, dynamics)`` with nonlinear, invariance-respecting dynamics.

    Each vertex jumps to its operational nominal state when an affine
    pre-activation reaches a random cut, otherwise to its failed state.
    The Boolean dynamics of the affine part threshold at ``eta`` instead,
    so the discretization error is generally positive.
    """
    g = random_graph(rng, n_vertices, density=0.6)
    n = _random_nominal(rng, list(g.vertices))
    d = _random_affine(rng, g)
    cuts = {v: float(n.eta[n.index(v)] + rng.normal(scale=0.5)) for v in g.vertices}
    models = {}
    for v in g.vertices:
        nb = neighborhood(g, v)
        lo, hi = n.states(v)
        S = Space.finite([[lo], [hi]])
        C = Space.finite([[c] for c in n.controls(v)])

        def f(x, v=v, nb=nb, lo=lo, hi=hi):
            return np.array([hi if dynamics_component(v, d, x, nb) >= cuts[v] else lo])

        models[v] = VertexModel(S, C, f, objective_state=_abs_objective(hi, float(rng.uniform(0.1, 1.0))),
                                objective_control=_abs_objective(n.controls(v)[0], float(rng.uniform(0.0, 0.5))))
    return NetworkProblem(g, models, horizon, name="random-threshold"), n, d
