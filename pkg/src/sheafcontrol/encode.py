"""Sheaf encodings of a network problem.

Five sheaves are built from a :class:`NetworkProblem`:

* ``N`` -- one time step: feasible tuples on neighborhoods, states on vertices.
* ``L`` -- propagation targets, one state per neighborhood.
* ``M`` -- ``N`` plus an objective layer: a real stalk per element of ``N``
  fed by the objectives, and a zero-dimensional stalk feeding each real one
  through the zero map.
* ``T`` -- the horizon unrolled: ``N_0 .. N_{H-1}`` and ``L_0 .. L_H`` with
  projection edges ``N_n -> L_n`` and dynamics edges ``N_n -> L_{n+1}``.
* ``S`` -- ``T`` with the objective layer attached to every ``N_n``.

Everything is flattened into a single poset per sheaf. Element names are
``t<k>/N/U:v``, ``t<k>/N/v:v``, ``t<k>/L/U:v``, ``t<k>/R/<elt>`` and
``t<k>/Z/<elt>``, where ``<elt>`` is the name of the ``N`` element fed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import MissingSelfEdge, UnknownElement
from .netmodel import NetworkProblem, simulate
from .poset import OrderMap, Poset, face_poset, neighborhood_element, vertex_element
from .sheaf import Sheaf, SheafMorphism
from .space import Space, StalkMap, as_point

__all__ = [
    "ElementInfo",
    "EncodedProblem",
    "element_name",
    "parse_element",
    "build_N",
    "build_L",
    "build_M",
    "build_T",
    "build_S",
    "objective_terms",
]

REAL1 = Space.real(1, name="R")
ZERO = Space.zero()


@dataclass(frozen=True)
class ElementInfo:
    """Where a poset element comes from.

    ``layer`` is one of ``"N"``, ``"L"``, ``"R"``, ``"Z"``; ``kind`` is
    ``"neighborhood"`` or ``"vertex"`` (for ``R``/``Z`` it is the kind of
    the ``N`` element being fed) and ``vertex`` the network vertex.
    """

    step: int
    layer: str
    kind: str
    vertex: str


def element_name(step: int, layer: str, kind: str, vertex: str) -> str:
    local = neighborhood_element(vertex) if kind == "neighborhood" else vertex_element(vertex)
    return f"t{step}/{layer}/{local}"


def parse_element(name: str) -> ElementInfo:
    try:
        t, layer, local = name.split("/", 2)
        tag, vertex = local.split(":", 1)
        step = int(t[1:])
    except ValueError:
        raise UnknownElement(name) from None
    if not t.startswith("t") or layer not in ("N", "L", "R", "Z") or tag not in ("U", "v"):
        raise UnknownElement(name)
    return ElementInfo(step, layer, "neighborhood" if tag == "U" else "vertex", vertex)


def _face(p: NetworkProblem):
    missing = [v for v in p.vertices if not p.graph.has_self_edge(v)]
    if missing:
        raise MissingSelfEdge(missing[0])
    return face_poset(p.graph)


def _n_parts(p: NetworkProblem, step: int):
    """Elements, stalks and Hasse restrictions of one copy of ``N``."""
    _face(p)
    elements, stalks, maps = [], {}, {}
    for v in p.vertices:
        x = element_name(step, "N", "neighborhood", v)
        elements.append(x)
        stalks[x] = p.F[v]
    for v in p.vertices:
        x = element_name(step, "N", "vertex", v)
        elements.append(x)
        stalks[x] = p.S[v]
    for v in p.vertices:
        lo = element_name(step, "N", "neighborhood", v)
        for w in p.neighborhoods[v]:
            maps[(lo, element_name(step, "N", "vertex", w))] = p.state_projection(v, w)
    return elements, stalks, maps


def _l_parts(p: NetworkProblem, step: int):
    elements = [element_name(step, "L", "neighborhood", v) for v in p.vertices]
    return elements, {x: p.S[v] for x, v in zip(elements, p.vertices)}


def _objective_parts(p: NetworkProblem, step: int):
    """Objective layer on top of ``N_step``: real and zero stalks with their edges."""
    elements, stalks, maps = [], {}, {}
    for kind in ("neighborhood", "vertex"):
        for v in p.vertices:
            x = element_name(step, "N", kind, v)
            r = element_name(step, "R", kind, v)
            z = element_name(step, "Z", kind, v)
            elements += [r, z]
            stalks[r] = REAL1
            stalks[z] = ZERO
            maps[(x, r)] = p.Jc[v] if kind == "neighborhood" else p.J[v]
            maps[(z, r)] = StalkMap.constant(ZERO, REAL1, 0.0)
    return elements, stalks, maps


def _sheaf(elements, stalks, maps, name) -> Sheaf:
    return Sheaf(Poset(elements, list(maps)), stalks, maps, name=name)


def build_N(p: NetworkProblem, step: int = 0) -> Sheaf:
    """One time step: ``F_v`` on ``U:v``, ``S_w`` on ``v:w``, projections between."""
    elements, stalks, maps = _n_parts(p, step)
    return _sheaf(elements, stalks, maps, f"N{step}")


def build_L(p: NetworkProblem, step: int = 0) -> Sheaf:
    elements, stalks = _l_parts(p, step)
    return Sheaf(Poset(elements), stalks, {}, name=f"L{step}")


def _discrete(elements, stalks, name) -> Sheaf:
    return Sheaf(Poset(elements), stalks, {}, name=name)


def _objective_morphisms(p: NetworkProblem, N: Sheaf, step: int):
    """``J: N -> Rhat`` and ``zero: Zhat -> Rhat`` as standalone morphisms."""
    r_el, z_el, j_comp, z_comp, j_map, z_map = [], [], {}, {}, {}, {}
    for kind in ("neighborhood", "vertex"):
        for v in p.vertices:
            x = element_name(step, "N", kind, v)
            r = element_name(step, "R", kind, v)
            z = element_name(step, "Z", kind, v)
            r_el.append(r)
            z_el.append(z)
            j_comp[r] = p.Jc[v] if kind == "neighborhood" else p.J[v]
            j_map[r] = x
            z_comp[r] = StalkMap.constant(ZERO, REAL1, 0.0)
            z_map[r] = z
    Rhat = _discrete(r_el, {r: REAL1 for r in r_el}, f"Rhat{step}")
    Zhat = _discrete(z_el, {z: ZERO for z in z_el}, f"Zhat{step}")
    J = SheafMorphism(N, Rhat, OrderMap(Rhat.base, N.base, j_map), j_comp, name=f"J{step}")
    Z = SheafMorphism(Zhat, Rhat, OrderMap(Rhat.base, Zhat.base, z_map), z_comp, name=f"zero{step}")
    return Rhat, Zhat, J, Z


def build_M(p: NetworkProblem):
    """``N`` with its objective layer, plus the ``J`` and zero morphisms.

    Returns ``(M, J, zero)``.
    """
    n_el, n_st, n_maps = _n_parts(p, 0)
    o_el, o_st, o_maps = _objective_parts(p, 0)
    M = _sheaf(n_el + o_el, {**n_st, **o_st}, {**n_maps, **o_maps}, "M")
    N = build_N(p, 0)
    _, _, J, Z = _objective_morphisms(p, N, 0)
    return M, J, Z


def _propagation_morphisms(p: NetworkProblem, N: Sheaf, L_now: Sheaf, L_next: Sheaf, step: int):
    pm, fm, pc, fc = {}, {}, {}, {}
    for v in p.vertices:
        x = element_name(step, "N", "neighborhood", v)
        a = element_name(step, "L", "neighborhood", v)
        b = element_name(step + 1, "L", "neighborhood", v)
        pm[a], pc[a] = x, p.state_projection(v)
        fm[b], fc[b] = x, p.f[v]
    P = SheafMorphism(N, L_now, OrderMap(L_now.base, N.base, pm), pc, name=f"p{step}")
    F = SheafMorphism(N, L_next, OrderMap(L_next.base, N.base, fm), fc, name=f"f{step}")
    return P, F


def _unrolled_parts(p: NetworkProblem, with_objectives: bool):
    elements, stalks, maps = [], {}, {}
    H = p.horizon
    for n in range(H):
        e, s, m = _n_parts(p, n)
        elements += e
        stalks.update(s)
        maps.update(m)
    for n in range(H + 1):
        e, s = _l_parts(p, n)
        elements += e
        stalks.update(s)
    for n in range(H):
        for v in p.vertices:
            x = element_name(n, "N", "neighborhood", v)
            maps[(x, element_name(n, "L", "neighborhood", v))] = p.state_projection(v)
            maps[(x, element_name(n + 1, "L", "neighborhood", v))] = p.f[v]
    if with_objectives:
        for n in range(H):
            e, s, m = _objective_parts(p, n)
            elements += e
            stalks.update(s)
            maps.update(m)
    return elements, stalks, maps


def build_T(p: NetworkProblem):
    """The unrolled trajectory sheaf with its ``p`` and ``f`` morphisms.

    Returns ``(T, p_morphisms, f_morphisms)``; entry ``n`` of each list
    starts at ``N_n``.
    """
    e, s, m = _unrolled_parts(p, with_objectives=False)
    T = _sheaf(e, s, m, "T")
    Ns = [build_N(p, n) for n in range(p.horizon)]
    Ls = [build_L(p, n) for n in range(p.horizon + 1)]
    ps, fs = [], []
    for n in range(p.horizon):
        P, F = _propagation_morphisms(p, Ns[n], Ls[n], Ls[n + 1], n)
        ps.append(P)
        fs.append(F)
    return T, ps, fs


@dataclass(eq=False)
class EncodedProblem:
    """All sheaves and morphisms of a problem, with an element index.

    ``N[n]`` and ``L[n]`` are the per-step sheaves; their element names are
    the same as inside ``T`` and ``S``, so a global assignment of ``S`` can
    be handed to any of them directly.
    """

    problem: NetworkProblem
    N: list
    L: list
    M: Sheaf
    T: Sheaf
    S: Sheaf
    morphisms: dict
    index: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.problem.horizon

    def elements(self, step: int | None = None, layers: Sequence[str] = ("N", "L", "R", "Z")) -> list:
        """Elements of ``S`` filtered by time step and layer, in canonical order."""
        return [x for x in self.S.base.elements
                if self.index[x].layer in layers and (step is None or self.index[x].step == step)]

    def step_elements(self, step: int) -> list:
        """Elements of ``N_step`` together with its objective layer."""
        return self.elements(step, ("N", "R", "Z"))

    def trajectory_assignment(self, initial: Mapping, controls: Sequence[Mapping]):
        """Assignment of ``S`` induced by a control sequence.

        ``N`` copies hold the assembled tuples and states, ``L`` copies the
        propagated states, real stalks the objective values and zero stalks
        the empty vector. Returns ``(assignment, feasible)``; when a tuple
        leaves its feasible set the assignment is ``None``.
        """
        p = self.problem
        if len(controls) != p.horizon:
            raise ValueError(f"expected {p.horizon} control steps, got {len(controls)}")
        states, tuples, ok = simulate(p, initial, controls)
        if not ok:
            return None, False
        return self.assignment_from_trajectory(states, tuples), True

    def assignment_from_trajectory(self, states: Sequence[Mapping], tuples: Sequence[Mapping]) -> dict:
        p = self.problem
        a = {}
        for n in range(p.horizon):
            for v in p.vertices:
                x = tuples[n][v]
                s = states[n][v]
                a[element_name(n, "N", "neighborhood", v)] = x
                a[element_name(n, "N", "vertex", v)] = s
                a[element_name(n, "L", "neighborhood", v)] = s
                a[element_name(n, "R", "neighborhood", v)] = p.Jc[v](x)
                a[element_name(n, "R", "vertex", v)] = p.J[v](s)
                a[element_name(n, "Z", "neighborhood", v)] = np.zeros(0)
                a[element_name(n, "Z", "vertex", v)] = np.zeros(0)
        for v in p.vertices:
            a[element_name(p.horizon, "L", "neighborhood", v)] = as_point(states[p.horizon][v])
        return {x: a[x] for x in self.S.base.elements}

    def section_assignment(self, n_sections: Sequence[Mapping]) -> dict:
        """Assignment of ``S`` from one section of ``N_n`` per step.

        ``L`` copies take the projected state of the step they follow
        (``L_0`` the state of ``N_0``, ``L_H`` the dynamics image of
        ``N_{H-1}``); real stalks take the objective values.
        """
        p = self.problem
        a = {}
        for n, sec in enumerate(n_sections):
            for v in p.vertices:
                xn = element_name(n, "N", "neighborhood", v)
                xv = element_name(n, "N", "vertex", v)
                a[xn], a[xv] = sec[xn], sec[xv]
                a[element_name(n, "L", "neighborhood", v)] = p.state_of(v, sec[xn])
                a[element_name(n, "R", "neighborhood", v)] = p.Jc[v](sec[xn])
                a[element_name(n, "R", "vertex", v)] = p.J[v](sec[xv])
                a[element_name(n, "Z", "neighborhood", v)] = np.zeros(0)
                a[element_name(n, "Z", "vertex", v)] = np.zeros(0)
        last = n_sections[-1]
        for v in p.vertices:
            x = last[element_name(p.horizon - 1, "N", "neighborhood", v)]
            a[element_name(p.horizon, "L", "neighborhood", v)] = p.f[v](x)
        return {x: a[x] for x in self.S.base.elements}

    def controls_of(self, a: Mapping) -> list:
        p = self.problem
        return [{v: p.control_of(v, a[element_name(n, "N", "neighborhood", v)]) for v in p.vertices}
                for n in range(p.horizon)]

    def states_of(self, a: Mapping) -> list:
        p = self.problem
        out = [{v: as_point(a[element_name(n, "N", "vertex", v)]) for v in p.vertices} for n in range(p.horizon)]
        out.append({v: as_point(a[element_name(p.horizon, "L", "neighborhood", v)]) for v in p.vertices})
        return out


def build_S(p: NetworkProblem) -> EncodedProblem:
    """The full diagram, the per-step sheaves and every connecting morphism."""
    e, s, m = _unrolled_parts(p, with_objectives=True)
    S = _sheaf(e, s, m, "S")
    T, _, _ = build_T(p)
    M, _, _ = build_M(p)
    Ns = [build_N(p, n) for n in range(p.horizon)]
    Ls = [build_L(p, n) for n in range(p.horizon + 1)]
    ps, fs, js, zs = [], [], [], []
    for n in range(p.horizon):
        P, F = _propagation_morphisms(p, Ns[n], Ls[n], Ls[n + 1], n)
        _, _, J, Z = _objective_morphisms(p, Ns[n], n)
        ps.append(P)
        fs.append(F)
        js.append(J)
        zs.append(Z)
    index = {x: parse_element(x) for x in S.base.elements}
    return EncodedProblem(p, Ns, Ls, M, T, S, {"p": ps, "f": fs, "J": js, "zero": zs}, index)


def objective_terms(p: NetworkProblem, states: Sequence[Mapping], tuples: Sequence[Mapping]) -> list:
    """Per-step objective aggregates ``j_n``, the root-sum-square of all objective values at step ``n``."""
    out = []
    for n in range(p.horizon):
        total = 0.0
        for v in p.vertices:
            a = float(p.J[v](states[n][v])[0])
            b = float(p.Jc[v](tuples[n][v])[0])
            total += a * a + b * b
        out.append(math.sqrt(total))
    return out
