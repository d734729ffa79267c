"""Boolean state control with affine dynamics.

Every vertex has a one-dimensional state with two nominal values, failed
and operational, separated by a threshold ``eta``, and a control taking
one of two values ``c0``/``c1``. States are thresholded with the Heaviside
step at ``eta`` and lifted back to the nominal values; controls are
rescaled to ``{0, 1}``.

The matrix convention is ``x_next = A @ x + B * u + h``: ``A[i, j]`` is the
weight of vertex ``j``'s state in vertex ``i``'s update, so it may be
nonzero only when there is an edge from vertex ``j`` to vertex ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .boolrelax import ThresholdingScheme, VertexScheme, build_sigma
from .errors import DimensionMismatch, InconsistentDynamics, SchemeInvalid
from .netmodel import DirectedGraph, NetworkProblem, VertexModel, neighborhood
from .space import Space, StalkMap

__all__ = [
    "HEAVISIDE_GUARD",
    "NominalStates",
    "AffineDynamics",
    "VectorizedBooleanDynamics",
    "heaviside",
    "heaviside_tau",
    "lift_rho",
    "control_chi",
    "control_chi_inv",
    "dynamics_component",
    "boolean_dynamics_component",
    "vectorized_boolean_dynamics",
    "gamma_vectorized",
    "tau_vectorized",
    "nominal_problem",
    "build_boolean_scheme",
]

# arguments within this distance below zero still count as zero
HEAVISIDE_GUARD = 1e-12


def heaviside(x):
    """Unit step with ``H(0) = 1``, elementwise on arrays."""
    x = np.asarray(x, dtype=float)
    out = (x >= -HEAVISIDE_GUARD).astype(float)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class NominalStates:
    """Per-vertex nominal states, thresholds and control values.

    Parameters
    ----------
    vertices : tuple of str
    s_phi, s_omega : array
        Failed and operational nominal states.
    eta : array
        Thresholds, with ``s_phi < eta <= s_omega``.
    c0, c1 : array
        The two control values of each vertex.
    """

    vertices: tuple
    s_phi: np.ndarray
    s_omega: np.ndarray
    eta: np.ndarray
    c0: np.ndarray
    c1: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        n = len(self.vertices)
        for name in ("s_phi", "s_omega", "eta", "c0", "c1"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (n,)).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for i, v in enumerate(self.vertices):
            if not self.s_phi[i] < self.eta[i] <= self.s_omega[i]:
                raise ValueError(f"nominal states of {v!r} must satisfy s_phi < eta <= s_omega")
            if self.c0[i] == self.c1[i]:
                raise ValueError(f"control values of {v!r} coincide")
        object.__setattr__(self, "_pos", {v: i for i, v in enumerate(self.vertices)})

    def index(self, v) -> int:
        return self._pos[v]

    def of(self, v) -> dict:
        i = self._pos[v]
        return {"s_phi": float(self.s_phi[i]), "s_omega": float(self.s_omega[i]), "eta": float(self.eta[i]),
                "c0": float(self.c0[i]), "c1": float(self.c1[i])}

    def states(self, v) -> tuple:
        i = self._pos[v]
        return float(self.s_phi[i]), float(self.s_omega[i])

    def controls(self, v) -> tuple:
        i = self._pos[v]
        return float(self.c0[i]), float(self.c1[i])


@dataclass(frozen=True)
class AffineDynamics:
    """``x_next = A @ x + B * u + h`` with ``B`` stored as its diagonal."""

    vertices: tuple
    A: np.ndarray
    B: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        n = len(self.vertices)
        object.__setattr__(self, "vertices", tuple(self.vertices))
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 2:
            if np.any(B != np.diag(np.diag(B))):
                raise DimensionMismatch("control matrix must be diagonal")
            B = np.diag(B).copy()
        h = np.broadcast_to(np.asarray(self.h, dtype=float), (n,)).copy()
        if A.shape != (n, n) or B.shape != (n,):
            raise DimensionMismatch(f"expected A of shape ({n}, {n}) and B of length {n}")
        for arr in (A, B, h):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "_pos", {v: i for i, v in enumerate(self.vertices)})

    def index(self, v) -> int:
        return self._pos[v]

    def sparsity_violations(self, graph: DirectedGraph) -> list:
        """Pairs ``(v, w)`` with a nonzero weight of ``w`` on ``v`` but no edge ``w -> v``."""
        out = []
        for i, v in enumerate(self.vertices):
            for j, w in enumerate(self.vertices):
                if self.A[i, j] != 0.0 and (w, v) not in graph.edges:
                    out.append((v, w))
        return out

    def __call__(self, x, u) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float) + self.B * np.asarray(u, dtype=float) + self.h


def dynamics_component(v: str, d: AffineDynamics, x, neighbors: Sequence[str]) -> float:
    """Update of vertex ``v`` from its tuple ``(c_v, s_v, s_w1, ...)``.

    Summation order: neighbor terms in tuple order, then the control term,
    then the offset.
    """
    i = d.index(v)
    x = np.asarray(x, dtype=float)
    total = 0.0
    for k, w in enumerate(neighbors):
        total += d.A[i, d.index(w)] * x[1 + k]
    total += d.B[i] * x[0]
    total += d.h[i]
    return total


def dynamics_lipschitz(v: str, d: AffineDynamics, neighbors: Sequence[str]) -> float:
    i = d.index(v)
    row = np.array([d.B[i]] + [d.A[i, d.index(w)] for w in neighbors])
    return float(np.linalg.norm(row))


def heaviside_tau(v: str, n: NominalStates, s) -> float:
    """1 when the state reaches the threshold of ``v``, else 0."""
    return heaviside(float(np.asarray(s, dtype=float).ravel()[0]) - n.eta[n.index(v)])


def lift_rho(v: str, n: NominalStates, b) -> float:
    """Nominal state of a Boolean state: operational for 1, failed for 0.

    Exact Boolean inputs take the table value; others use the affine
    interpolation through both nominal states.
    """
    i = n.index(v)
    b = float(np.asarray(b, dtype=float).ravel()[0])
    if b == 1.0:
        return float(n.s_omega[i])
    if b == 0.0:
        return float(n.s_phi[i])
    return float((n.s_omega[i] - n.s_phi[i]) * b + n.s_phi[i])


def control_chi(v: str, n: NominalStates, c) -> float:
    i = n.index(v)
    c = float(np.asarray(c, dtype=float).ravel()[0])
    if c == n.c0[i]:
        return 0.0
    if c == n.c1[i]:
        return 1.0
    return float((c - n.c0[i]) / (n.c1[i] - n.c0[i]))


def control_chi_inv(v: str, n: NominalStates, b) -> float:
    i = n.index(v)
    b = float(np.asarray(b, dtype=float).ravel()[0])
    if b == 0.0:
        return float(n.c0[i])
    if b == 1.0:
        return float(n.c1[i])
    return float((n.c1[i] - n.c0[i]) * b + n.c0[i])


def boolean_dynamics_component(v: str, d: AffineDynamics, n: NominalStates, xt, neighbors: Sequence[str]) -> float:
    """Thresholded affine update of ``v`` evaluated on lifted Boolean inputs.

    Uses the same summation order as :func:`dynamics_component`, so it
    agrees bit for bit with thresholding the lifted real update.
    """
    i = d.index(v)
    xt = np.asarray(xt, dtype=float)
    total = 0.0
    for k, w in enumerate(neighbors):
        total += d.A[i, d.index(w)] * lift_rho(w, n, xt[1 + k])
    total += d.B[i] * control_chi_inv(v, n, xt[0])
    total += d.h[i]
    return heaviside(total - n.eta[i])


@dataclass(frozen=True)
class VectorizedBooleanDynamics:
    """System-level Boolean dynamics ``H(M1 @ x + M2 @ u + y)``.

    ``M1 = A @ D_s`` and ``M2 = diag(B) @ D_c`` with ``D_s``/``D_c`` the
    diagonal nominal-state and control spans, and
    ``y = A @ h_s + diag(B) @ c0 + h - eta`` with ``h_s`` the failed states.
    """

    M1: np.ndarray
    M2: np.ndarray
    y: np.ndarray
    D_s: np.ndarray
    D_c: np.ndarray
    h_s: np.ndarray
    eta: np.ndarray

    @classmethod
    def from_affine(cls, d: AffineDynamics, n: NominalStates) -> VectorizedBooleanDynamics:
        if tuple(d.vertices) != tuple(n.vertices):
            raise DimensionMismatch("dynamics and nominal states list different vertices")
        D_s = np.diag(n.s_omega - n.s_phi)
        D_c = np.diag(n.c1 - n.c0)
        Bm = np.diag(d.B)
        h_s = np.array(n.s_phi)
        M1 = d.A @ D_s
        M2 = Bm @ D_c
        y = d.A @ h_s + Bm @ n.c0 + d.h - n.eta
        return cls(M1, M2, y, D_s, D_c, h_s, np.array(n.eta))


def vectorized_boolean_dynamics(vbd: VectorizedBooleanDynamics, xt, ut) -> np.ndarray:
    xt = np.asarray(xt, dtype=float)
    ut = np.asarray(ut, dtype=float)
    k = vbd.M1.shape[0]
    if xt.shape != (k,) or ut.shape != (k,):
        raise DimensionMismatch(f"expected Boolean vectors of length {k}")
    return heaviside(vbd.M1 @ xt + vbd.M2 @ ut + vbd.y)


def gamma_vectorized(n: NominalStates, xt, ut) -> tuple[np.ndarray, np.ndarray]:
    """System-level lift: (nominal states, control values) of Boolean state and control vectors.

    Unlike the per-vertex tuple lift this acts on whole-network vectors;
    entry ``v`` of the pair holds the lifted state and control of ``v``.
    """
    xt = np.asarray(xt, dtype=float)
    ut = np.asarray(ut, dtype=float)
    x = np.array([lift_rho(v, n, xt[i]) for i, v in enumerate(n.vertices)])
    u = np.array([control_chi_inv(v, n, ut[i]) for i, v in enumerate(n.vertices)])
    return x, u


def tau_vectorized(n: NominalStates, x) -> np.ndarray:
    return heaviside(np.asarray(x, dtype=float) - n.eta)


def _neighbors(graph: DirectedGraph, v) -> list:
    return neighborhood(graph, v)


def nominal_problem(graph: DirectedGraph, n: NominalStates, d: AffineDynamics, horizon: int = 1,
                    objective_state: Mapping[str, Callable] | None = None,
                    objective_control: Mapping[str, Callable] | None = None,
                    objective_lipschitz: Mapping[str, tuple] | None = None,
                    initial_state: Mapping | None = None, clamp: Mapping[str, tuple] | None = None,
                    name: str = "") -> NetworkProblem:
    """Network problem on nominal states with affine (optionally clamped) dynamics.

    Every vertex's state space is its two nominal states, its control space
    its two control values, and its feasible set the full product of its
    controls with the nominal states of its neighborhood. ``clamp[v] =
    (lo, hi)`` clips the affine update of ``v``.
    """
    if tuple(graph.vertices) != tuple(d.vertices) or tuple(graph.vertices) != tuple(n.vertices):
        raise DimensionMismatch("graph, dynamics and nominal states must list the same vertices in the same order")
    bad = d.sparsity_violations(graph)
    if bad:
        v, w = bad[0]
        raise DimensionMismatch(f"weight of {w!r} on {v!r} without an edge {w} -> {v}")
    objective_state = objective_state or {}
    objective_control = objective_control or {}
    objective_lipschitz = objective_lipschitz or {}
    clamp = clamp or {}
    models = {}
    for v in graph.vertices:
        nb = _neighbors(graph, v)
        S = Space.finite([[s] for s in n.states(v)], name=f"S_{v}")
        C = Space.finite([[c] for c in n.controls(v)], name=f"C_{v}")
        lo, hi = clamp.get(v, (-np.inf, np.inf))
        if v in clamp:
            def f(x, v=v, nb=nb, lo=lo, hi=hi):
                return np.array([min(max(dynamics_component(v, d, x, nb), lo), hi)])
        else:
            def f(x, v=v, nb=nb):
                return np.array([dynamics_component(v, d, x, nb)])
        ks, kc = objective_lipschitz.get(v, (None, None))
        models[v] = VertexModel(S, C, f, objective_state.get(v), objective_control.get(v),
                                dynamics_lipschitz=dynamics_lipschitz(v, d, nb),
                                objective_state_lipschitz=ks, objective_control_lipschitz=kc)
    return NetworkProblem(graph, models, horizon, initial_state, name=name)


def build_boolean_scheme(p: NetworkProblem, n: NominalStates, d: AffineDynamics, strict: bool = True) -> ThresholdingScheme:
    """Heaviside thresholding scheme with nominal lifts and Boolean affine dynamics.

    With ``strict`` the problem's dynamics must coincide with the affine
    update on every feasible tuple; without it, the Boolean dynamics of
    ``d`` are paired with whatever dynamics the problem has (the error
    budget then measures the mismatch).

    Raises
    ------
    InconsistentDynamics
        In strict mode, when some feasible tuple updates differently.
    SchemeInvalid
        When a state or control is not one-dimensional, or the resulting
        maps break feasibility.
    """
    B1 = Space.boolean(1)
    schemes = {}
    taus, chis, rhos = {}, {}, {}
    for v in p.vertices:
        if p.S[v].dim != 1 or p.C[v].dim != 1:
            raise SchemeInvalid(f"vertex {v!r} needs one-dimensional state and control")
        i = n.index(v)
        span = float(abs(n.s_omega[i] - n.s_phi[i]))
        cspan = float(abs(n.c1[i] - n.c0[i]))
        taus[v] = StalkMap(p.S[v], B1, lambda s, v=v: np.array([heaviside_tau(v, n, s)]), name=f"tau_{v}")
        chis[v] = StalkMap(p.C[v], B1, lambda c, v=v: np.array([control_chi(v, n, c)]), lipschitz=1.0 / cspan,
                           name=f"chi_{v}")
        rhos[v] = StalkMap(B1, p.S[v], lambda b, v=v: np.array([lift_rho(v, n, b)]), lipschitz=span, name=f"rho_{v}")
    for v in p.vertices:
        nb = p.neighborhoods[v]
        if strict:
            for x in p.F[v].domain_points(4096)[0]:
                want = dynamics_component(v, d, x, nb)
                got = float(p.f[v](x)[0])
                if got != want:
                    raise InconsistentDynamics(f"dynamics of {v!r} differ from the affine update at {list(x)}: {got} != {want}")
        sigma = build_sigma(p, v, taus, chis[v])
        Ft_pts = [sigma(x) for x in p.F[v].domain_points(65536)[0]]
        Rt = Space.boolean(1 + len(nb))
        Ft = Space.finite(Ft_pts, Rt.signature, name=f"F~_{v}")
        lip = max([float(abs(n.c1[n.index(v)] - n.c0[n.index(v)]))] +
                  [float(abs(n.s_omega[n.index(w)] - n.s_phi[n.index(w)])) for w in nb])

        def gamma(xt, v=v, nb=nb):
            return np.array([control_chi_inv(v, n, xt[0])] + [lift_rho(w, n, xt[1 + k]) for k, w in enumerate(nb)])

        def f_tilde(xt, v=v, nb=nb):
            return np.array([boolean_dynamics_component(v, d, n, xt, nb)])

        schemes[v] = VertexScheme(
            tau=taus[v], chi=chis[v], rho=rhos[v],
            gamma=StalkMap(Rt, p.R[v], gamma, lipschitz=lip, name=f"gamma_{v}"),
            f_tilde=StalkMap(Rt, B1, f_tilde, name=f"f~_{v}"),
            feasible_tilde=Ft,
        )
    return ThresholdingScheme(p, schemes, name=f"{p.name} heaviside", meta={"nominal": n, "dynamics": d})
