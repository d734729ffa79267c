"""Discrete-time network dynamical systems: graph, per-vertex spaces, feasible sets, dynamics and objectives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, MissingValue, UnknownVertex
from .space import Space, StalkMap, as_point, product, projection

__all__ = [
    "DirectedGraph",
    "VertexModel",
    "NetworkProblem",
    "Violation",
    "neighborhood",
    "validate",
    "assemble_state",
    "simulate",
]


@dataclass(frozen=True)
class DirectedGraph:
    """Vertices in a fixed order and a set of directed edges ``(source, target)``."""

    vertices: tuple
    edges: frozenset

    def __init__(self, vertices: Sequence[str], edges):
        vertices = tuple(vertices)
        if len(set(vertices)) != len(vertices):
            raise ValueError("duplicate vertex names")
        edges = frozenset((str(a), str(b)) for a, b in edges)
        known = set(vertices)
        for a, b in edges:
            if a not in known:
                raise UnknownVertex(a)
            if b not in known:
                raise UnknownVertex(b)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def with_self_edges(cls, vertices: Sequence[str], edges=()) -> DirectedGraph:
        return cls(vertices, set(edges) | {(v, v) for v in vertices})

    def has_self_edge(self, v) -> bool:
        return (v, v) in self.edges


def neighborhood(g: DirectedGraph, v: str) -> list:
    """In-neighborhood of ``v``: ``v`` first (when it has a self-edge), the rest sorted by name."""
    if v not in g.vertices:
        raise UnknownVertex(v)
    others = sorted(w for w, u in g.edges if u == v and w != v)
    return ([v] if (v, v) in g.edges else []) + others


@dataclass(frozen=True, eq=False)
class VertexModel:
    """Spaces, feasible set, dynamics and objectives of one vertex.

    The dynamics and the control objective act on tuples
    ``(c_v, s_v, s_w1, ...)`` in the canonical neighbor order; the state
    objective acts on ``s_v``. Plain callables are accepted and wrapped.

    Parameters
    ----------
    state_space, control_space : Space
    dynamics : callable or StalkMap
        Tuple -> next state of this vertex.
    objective_state : callable or StalkMap, optional
        State -> nonnegative scalar. Defaults to zero.
    objective_control : callable or StalkMap, optional
        Tuple -> nonnegative scalar. Defaults to zero.
    feasible : Space or sequence of points, optional
        Feasible tuples. Defaults to the full product space.
    dynamics_lipschitz : float, optional
        Declared exact Lipschitz constant of a callable ``dynamics``.
    """

    state_space: Space
    control_space: Space
    dynamics: Callable
    objective_state: Callable | None = None
    objective_control: Callable | None = None
    feasible: object = None
    dynamics_lipschitz: float | None = None
    objective_state_lipschitz: float | None = None
    objective_control_lipschitz: float | None = None
    meta: dict = field(default_factory=dict)


@dataclass
class Violation:
    kind: str
    vertex: str
    detail: str
    witness: tuple | None = None

    def as_dict(self) -> dict:
        return {"kind": self.kind, "vertex": self.vertex, "detail": self.detail,
                "witness": None if self.witness is None else [float(c) for c in self.witness]}

    def __str__(self):
        w = "" if self.witness is None else f" at {list(np.round(self.witness, 12))}"
        return f"{self.kind} [{self.vertex}]: {self.detail}{w}"


def _wrap(fn, domain: Space, codomain: Space, lipschitz, name) -> StalkMap:
    if fn is None:
        return StalkMap.constant(domain, codomain, np.zeros(codomain.dim))
    if isinstance(fn, StalkMap):
        return StalkMap(domain, codomain, fn.fn, fn.lipschitz if lipschitz is None else lipschitz, fn.name or name)
    return StalkMap(domain, codomain, fn, lipschitz, name)


class NetworkProblem:
    """A network optimal-control problem over a finite horizon.

    Attributes built at construction (all keyed by vertex):
    ``neighborhoods``, ``R`` (full tuple space), ``F`` (feasible tuples),
    ``f`` (dynamics on ``F``), ``J`` (state objective), ``Jc`` (control
    objective on ``F``), ``slices`` (coordinate ranges inside a tuple).

    Construction never rejects a problem on modeling grounds; use
    :func:`validate` for the standing assumptions.
    """

    def __init__(self, graph: DirectedGraph, models: Mapping[str, VertexModel], horizon: int = 1,
                 initial_state: Mapping | None = None, name: str = ""):
        if horizon < 1:
            raise ValueError("horizon must be at least 1")
        for v in graph.vertices:
            if v not in models:
                raise MissingValue(f"no model for vertex {v!r}")
        self.graph = graph
        self.models = {v: models[v] for v in graph.vertices}
        self.horizon = int(horizon)
        self.name = name
        self.vertices = graph.vertices
        self.neighborhoods = {v: neighborhood(graph, v) for v in graph.vertices}
        self.S = {v: m.state_space for v, m in self.models.items()}
        self.C = {v: m.control_space for v, m in self.models.items()}
        self.R, self.F, self.f, self.J, self.Jc, self.slices = {}, {}, {}, {}, {}, {}
        unit = Space.real(1, name="R")
        for v in graph.vertices:
            m = self.models[v]
            nb = self.neighborhoods[v]
            parts = [m.control_space] + [self.S[w] for w in nb]
            self.R[v] = product(parts, name=f"R_{v}")
            cuts = np.cumsum([0] + [p.dim for p in parts])
            sl = {"control": slice(int(cuts[0]), int(cuts[1]))}
            for i, w in enumerate(nb):
                sl[w] = slice(int(cuts[i + 1]), int(cuts[i + 2]))
            self.slices[v] = sl
            self.F[v] = self._feasible(v, m)
            self.f[v] = _wrap(m.dynamics, self.F[v], self.S[v], m.dynamics_lipschitz, f"f_{v}")
            self.J[v] = _wrap(m.objective_state, self.S[v], unit, m.objective_state_lipschitz, f"J_{v}")
            self.Jc[v] = _wrap(m.objective_control, self.F[v], unit, m.objective_control_lipschitz, f"J'_{v}")
        self.initial_state = None
        if initial_state is not None:
            self.initial_state = {v: as_point(initial_state[v]) for v in graph.vertices if v in initial_state}
            missing = [v for v in graph.vertices if v not in self.initial_state]
            if missing:
                raise MissingValue(f"initial state misses vertex {missing[0]!r}")

    def _feasible(self, v, m: VertexModel) -> Space:
        R = self.R[v]
        if m.feasible is None:
            return R
        if isinstance(m.feasible, Space):
            if m.feasible.dim != R.dim:
                raise DimensionMismatch(f"feasible set of {v!r} has dimension {m.feasible.dim}, expected {R.dim}")
            return m.feasible
        pts = [as_point(x) for x in m.feasible]
        for x in pts:
            if x.shape != (R.dim,):
                raise DimensionMismatch(f"feasible point of {v!r} has shape {x.shape}, expected ({R.dim},)")
        return Space(R.signature, points=tuple(pts), name=f"F_{v}")

    def __repr__(self):
        return f"NetworkProblem({self.name or 'anon'}, {len(self.vertices)} vertices, horizon {self.horizon})"

    # -- tuple helpers -----------------------------------------------------
    def control_of(self, v, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[self.slices[v]["control"]]

    def state_of(self, v, x, w=None) -> np.ndarray:
        """The coordinates of ``w``'s state (default ``v``) inside a tuple of ``v``."""
        w = v if w is None else w
        return np.asarray(x, dtype=float)[self.slices[v][w]]

    def state_projection(self, v, w=None) -> StalkMap:
        w = v if w is None else w
        sl = self.slices[v][w]
        return projection(self.F[v], range(sl.start, sl.stop), self.S[w])

    def control_projection(self, v) -> StalkMap:
        sl = self.slices[v]["control"]
        return projection(self.F[v], range(sl.start, sl.stop), self.C[v])

    def state_options(self, v) -> list | None:
        """Distinct values of ``v``'s own state over ``F_v`` (None when ``F_v`` is infinite)."""
        return _distinct(self.F[v], self.slices[v][v])

    def control_options(self, v) -> list | None:
        return _distinct(self.F[v], self.slices[v]["control"])


def _distinct(space: Space, sl: slice) -> list | None:
    if not space.is_finite:
        return None
    seen, out = set(), []
    for x in space.points:
        y = x[sl]
        k = tuple(y)
        if k not in seen:
            seen.add(k)
            out.append(y.copy())
    return out


def assemble_state(p: NetworkProblem, v: str, controls: Mapping, states: Mapping) -> np.ndarray:
    """The tuple ``(c_v, s_v, s_w1, ...)`` in the canonical order of ``v``'s neighborhood."""
    if v not in p.models:
        raise UnknownVertex(v)
    if v not in controls:
        raise MissingValue(f"no control for {v!r}")
    parts = [np.atleast_1d(np.asarray(controls[v], dtype=float))]
    for w in p.neighborhoods[v]:
        if w not in states:
            raise MissingValue(f"no state for {w!r}")
        parts.append(np.atleast_1d(np.asarray(states[w], dtype=float)))
    return np.concatenate(parts)


def simulate(p: NetworkProblem, initial: Mapping, controls: Sequence[Mapping]):
    """Propagate states through the dynamics.

    Returns ``(states, tuples, feasible)`` where ``states`` has one dict per
    time step (``len(controls) + 1`` of them), ``tuples`` one dict of
    assembled tuples per control step, and ``feasible`` is False as soon as
    an assembled tuple leaves its feasible set (propagation stops there).
    """
    states = [{v: as_point(initial[v]) for v in p.vertices}]
    tuples = []
    for u in controls:
        cur = states[-1]
        xs = {v: assemble_state(p, v, u, cur) for v in p.vertices}
        tuples.append(xs)
        if not all(p.F[v].contains(xs[v]) for v in p.vertices):
            return states, tuples, False
        states.append({v: p.f[v](xs[v]) for v in p.vertices})
    return states, tuples, True


def validate(p: NetworkProblem, samples: int = 500, seed: int = 0) -> list:
    """Check the standing assumptions of a network problem.

    Returns a list of :class:`Violation`; an empty list means the problem
    is valid. Finite feasible sets are checked exhaustively, others on
    ``samples`` seeded draws.
    """
    out = []
    rng = np.random.default_rng(seed)
    for v in p.vertices:
        if not p.graph.has_self_edge(v):
            out.append(Violation("self-edge", v, f"vertex {v} has no self-edge"))
    for v in p.vertices:
        if not p.graph.has_self_edge(v):
            continue
        F, S = p.F[v], p.S[v]
        if F.is_finite:
            if not F.points:
                out.append(Violation("feasible-set", v, "feasible set is empty"))
                continue
            pts = list(F.points)
        else:
            pts = [F.sample(rng) for _ in range(samples)]
        bad = next((x for x in pts if not p.R[v].contains(x)), None)
        if bad is not None:
            out.append(Violation("feasible-set", v, "feasible tuple outside the tuple space", tuple(bad)))
            continue
        options = p.state_options(v)
        allowed = None if options is None else {tuple(s) for s in options}
        for x in pts:
            y = p.f[v](x)
            if y.shape != (S.dim,) or not np.all(np.isfinite(y)):
                out.append(Violation("dynamics", v, "dynamics output has the wrong shape or is not finite", tuple(x)))
                break
            ok = S.contains(y) and (allowed is None or tuple(y) in allowed)
            if not ok:
                out.append(Violation("invariance", v,
                                     f"dynamics maps a feasible tuple to {list(y)}, outside the feasible states", tuple(x)))
                break
        for x in pts:
            j = p.Jc[v](x)
            if j.shape != (1,) or not (j[0] >= 0.0) or not math.isfinite(j[0]):
                out.append(Violation("objective", v, f"control objective {list(j)} is not a finite nonnegative scalar", tuple(x)))
                break
        state_pts = options if options is not None else [p.state_of(v, x) for x in pts]
        for s in state_pts:
            j = p.J[v](s)
            if j.shape != (1,) or not (j[0] >= 0.0) or not math.isfinite(j[0]):
                out.append(Violation("objective", v, f"state objective {list(j)} is not a finite nonnegative scalar", tuple(s)))
                break
    if p.initial_state is not None:
        for v in p.vertices:
            s = p.initial_state[v]
            options = p.state_options(v) if p.graph.has_self_edge(v) else None
            inside = p.S[v].contains(s) and (options is None or any(np.array_equal(s, o) for o in options))
            if not inside:
                out.append(Violation("initial-state", v, "initial state is not a feasible state", tuple(s)))
    return out
