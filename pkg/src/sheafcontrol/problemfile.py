"""JSON problem files (schema version 1).

Layout::

    {
      "schema_version": 1,
      "name": "lighting",
      "vertices": ["grid", "breaker", "light"],
      "edges": [["grid", "grid"], ["grid", "breaker"], ...],
      "horizon": 3,
      "vertex_models": {
        "<vertex>": {
          "controls": [0, 1],              # or "control_bounds": [lo, hi]
          "states": [0, 120],              # or "state_bounds": [lo, hi]
          "dynamics": {"form": "affine", "A": {"<neighbor>": weight}, "B": b, "h": h},
          "objective_state": {"form": "abs", "target": t, "weight": w},
          "objective_control": {"form": "zero"}
        }
      },
      "nominal": {"<vertex>": {"s_phi": 0, "s_omega": 120, "eta": 40}},
      "initial_state": {"<vertex>": 120},
      "solver": {"mode": "constrained", "budget": 20000, "seed": 0, "tolerance": 1e-6, "starts": 8}
    }

States and controls are one-dimensional. Edges are listed explicitly,
self-edges included. Dynamics forms are ``affine`` and
``saturating-affine`` (the affine value clipped to ``[lo, hi]``). Objective
forms are ``zero`` and ``abs`` (``weight * |value - target|``, applied to
the state or to the control). The optional ``nominal`` block enables the
Boolean scheme; its control values default to the two listed controls.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .affine import AffineDynamics, NominalStates, dynamics_component, dynamics_lipschitz
from .errors import ParseError
from .netmodel import DirectedGraph, NetworkProblem, VertexModel, Violation, neighborhood
from .space import Space

__all__ = ["LoadedProblem", "load", "loads", "parse"]

SCHEMA_VERSION = 1
DYNAMICS_FORMS = ("affine", "saturating-affine")
OBJECTIVE_FORMS = ("zero", "abs")
SOLVER_KEYS = {"mode", "budget", "seed", "tolerance", "starts"}


@dataclass(eq=False)
class LoadedProblem:
    """A parsed problem file.

    ``dynamics`` is the affine part of every vertex update, ``clamp`` the
    clipping intervals of saturating vertices, ``nominal`` the Boolean
    scheme data (None when absent) and ``violations`` the file-level
    modeling problems (weights on non-neighbors).
    """

    problem: NetworkProblem
    dynamics: AffineDynamics
    nominal: NominalStates | None
    clamp: dict
    solver: dict
    violations: list = field(default_factory=list)
    source: dict = field(default_factory=dict)

    @property
    def is_affine(self) -> bool:
        return not self.clamp


def load(path) -> LoadedProblem:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return loads(text)


def loads(text: str) -> LoadedProblem:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    return parse(data)


def _need(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"missing {key!r} in {where}")
    return obj[key]


def _num(x, where) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"{where} must be a number")
    return float(x)


def _values(block, key, bounds_key, where):
    if key in block:
        vals = block[key]
        if not isinstance(vals, list) or not vals:
            raise ParseError(f"{where}.{key} must be a nonempty list")
        return [_num(x, f"{where}.{key}") for x in vals], None
    if bounds_key in block:
        b = block[bounds_key]
        if not isinstance(b, list) or len(b) != 2:
            raise ParseError(f"{where}.{bounds_key} must be [lo, hi]")
        lo, hi = _num(b[0], where), _num(b[1], where)
        if not lo <= hi:
            raise ParseError(f"{where}.{bounds_key} has lo > hi")
        return None, (lo, hi)
    raise ParseError(f"{where} needs {key!r} or {bounds_key!r}")


def _space(values, bounds, name) -> Space:
    if values is not None:
        return Space.finite([[x] for x in values], name=name)
    return Space.real(1, bounds=([bounds[0]], [bounds[1]]), name=name)


def _objective(block, where, index: int):
    """``(callable or None, lipschitz)`` for an objective block acting on coordinate ``index``."""
    if block is None:
        return None, 0.0
    form = _need(block, "form", where)
    if form not in OBJECTIVE_FORMS:
        raise ParseError(f"{where}: unknown objective form {form!r}")
    if form == "zero":
        return None, 0.0
    target = _num(block.get("target", 0.0), f"{where}.target")
    weight = _num(block.get("weight", 1.0), f"{where}.weight")
    if weight < 0:
        raise ParseError(f"{where}.weight must be nonnegative")

    def fn(x):
        return np.array([weight * abs(float(x[index]) - target)])

    return fn, weight


def parse(data) -> LoadedProblem:
    if not isinstance(data, dict):
        raise ParseError("problem file must hold a JSON object")
    version = _need(data, "schema_version", "problem")
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version!r}")
    vertices = _need(data, "vertices", "problem")
    if not isinstance(vertices, list) or not vertices or not all(isinstance(v, str) for v in vertices):
        raise ParseError("vertices must be a nonempty list of names")
    if len(set(vertices)) != len(vertices):
        raise ParseError("duplicate vertex names")
    edges = _need(data, "edges", "problem")
    if not isinstance(edges, list):
        raise ParseError("edges must be a list of [source, target] pairs")
    pairs = []
    for e in edges:
        if not isinstance(e, list) or len(e) != 2 or not all(isinstance(x, str) for x in e):
            raise ParseError(f"bad edge {e!r}")
        for x in e:
            if x not in vertices:
                raise ParseError(f"edge {e!r} names unknown vertex {x!r}")
        pairs.append((e[0], e[1]))
    graph = DirectedGraph(vertices, pairs)
    horizon = _need(data, "horizon", "problem")
    if isinstance(horizon, bool) or not isinstance(horizon, int) or horizon < 1:
        raise ParseError("horizon must be a positive integer")
    blocks = _need(data, "vertex_models", "problem")
    if not isinstance(blocks, dict):
        raise ParseError("vertex_models must be an object")
    for k in blocks:
        if k not in vertices:
            raise ParseError(f"vertex_models names unknown vertex {k!r}")

    n = len(vertices)
    pos = {v: i for i, v in enumerate(vertices)}
    A, B, h = np.zeros((n, n)), np.zeros(n), np.zeros(n)
    clamp, spaces, objectives, violations = {}, {}, {}, []
    for v in vertices:
        where = f"vertex_models.{v}"
        blk = _need(blocks, v, "vertex_models")
        cvals, cb = _values(blk, "controls", "control_bounds", where)
        svals, sb = _values(blk, "states", "state_bounds", where)
        spaces[v] = (_space(svals, sb, f"S_{v}"), _space(cvals, cb, f"C_{v}"), cvals)
        dyn = _need(blk, "dynamics", where)
        form = _need(dyn, "form", f"{where}.dynamics")
        if form not in DYNAMICS_FORMS:
            raise ParseError(f"{where}: unknown dynamics form {form!r}")
        weights = dyn.get("A", {})
        if not isinstance(weights, dict):
            raise ParseError(f"{where}.dynamics.A must map vertex names to weights")
        for w, a in weights.items():
            if w not in pos:
                raise ParseError(f"{where}.dynamics.A names unknown vertex {w!r}")
            A[pos[v], pos[w]] = _num(a, f"{where}.dynamics.A.{w}")
            if A[pos[v], pos[w]] != 0.0 and (w, v) not in graph.edges:
                violations.append(Violation("sparsity", v, f"state of {w} enters the update of {v} without an edge {w} -> {v}"))
        B[pos[v]] = _num(dyn.get("B", 0.0), f"{where}.dynamics.B")
        h[pos[v]] = _num(dyn.get("h", 0.0), f"{where}.dynamics.h")
        if form == "saturating-affine":
            lo = _num(_need(dyn, "lo", f"{where}.dynamics"), f"{where}.dynamics.lo")
            hi = _num(_need(dyn, "hi", f"{where}.dynamics"), f"{where}.dynamics.hi")
            if not lo <= hi:
                raise ParseError(f"{where}.dynamics has lo > hi")
            clamp[v] = (lo, hi)
        objectives[v] = (_objective(blk.get("objective_state"), f"{where}.objective_state", 0),
                         _objective(blk.get("objective_control"), f"{where}.objective_control", 0))
    d = AffineDynamics(vertices, A, B, h)

    models = {}
    for v in vertices:
        S, C, _ = spaces[v]
        nb = neighborhood(graph, v)
        if v in clamp:
            lo, hi = clamp[v]

            def f(x, v=v, nb=nb, lo=lo, hi=hi):
                return np.array([min(max(dynamics_component(v, d, x, nb), lo), hi)])
        else:
            def f(x, v=v, nb=nb):
                return np.array([dynamics_component(v, d, x, nb)])
        (js, ks), (jc, kc) = objectives[v]
        models[v] = VertexModel(S, C, f, js, jc, dynamics_lipschitz=dynamics_lipschitz(v, d, nb),
                                objective_state_lipschitz=ks, objective_control_lipschitz=kc)

    initial = data.get("initial_state")
    if initial is not None:
        if not isinstance(initial, dict) or set(initial) != set(vertices):
            raise ParseError("initial_state must give one value per vertex")
        initial = {v: [_num(initial[v], f"initial_state.{v}")] for v in vertices}
    problem = NetworkProblem(graph, models, horizon, initial, name=str(data.get("name", "")))

    nominal = None
    if data.get("nominal") is not None:
        nb_block = data["nominal"]
        if not isinstance(nb_block, dict) or set(nb_block) != set(vertices):
            raise ParseError("nominal must give one block per vertex")
        cols = {k: [] for k in ("s_phi", "s_omega", "eta", "c0", "c1")}
        for v in vertices:
            blk = nb_block[v]
            where = f"nominal.{v}"
            for k in ("s_phi", "s_omega", "eta"):
                cols[k].append(_num(_need(blk, k, where), f"{where}.{k}"))
            cvals = spaces[v][2]
            if "c0" in blk or "c1" in blk:
                cols["c0"].append(_num(_need(blk, "c0", where), f"{where}.c0"))
                cols["c1"].append(_num(_need(blk, "c1", where), f"{where}.c1"))
            elif cvals is not None and len(cvals) == 2:
                cols["c0"].append(cvals[0])
                cols["c1"].append(cvals[1])
            else:
                raise ParseError(f"{where} needs c0/c1 unless the vertex lists exactly two controls")
        try:
            nominal = NominalStates(vertices, **{k: np.array(x) for k, x in cols.items()})
        except ValueError as exc:
            raise ParseError(str(exc)) from None

    solver = data.get("solver", {})
    if not isinstance(solver, dict) or not set(solver) <= SOLVER_KEYS:
        raise ParseError(f"solver block accepts only {sorted(SOLVER_KEYS)}")
    if "mode" in solver and solver["mode"] not in ("constrained", "relaxed", "both"):
        raise ParseError(f"unknown solver mode {solver['mode']!r}")
    return LoadedProblem(problem, d, nominal, clamp, dict(solver), violations, data)
