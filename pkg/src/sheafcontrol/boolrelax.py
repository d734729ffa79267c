"""Boolean discretization of a network problem and its error bounds.

A thresholding scheme gives, for every vertex, maps to and from Boolean
spaces: ``tau`` (states), ``chi`` (controls), the tuple map ``sigma`` built
from them, a state lift ``rho``, a tuple lift ``gamma``, Boolean dynamics
``f_tilde`` and a finite Boolean feasible set. From these come a Boolean
network problem, its sheaves, the comparison morphisms between the real
and Boolean sheaves, and the discretization error quantities.

All function norms are suprema of the Euclidean norm over the stated
finite domain; domains above 65536 points are sampled with a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .encode import EncodedProblem, build_S, element_name
from .errors import DegenerateDomain, NotASection, SchemeInvalid, SignatureMismatch
from .netmodel import NetworkProblem, VertexModel
from .poset import OrderMap
from .sheaf import (
    SECTION_TOL,
    Sheaf,
    SheafMorphism,
    apply_morphism,
    assignment_distance,
    consistency_radius,
    is_global_section,
    morphism_defect,
)
from .space import Space, StalkMap, distance, estimate_lipschitz, product

__all__ = [
    "VertexScheme",
    "ThresholdingScheme",
    "VertexBudget",
    "ErrorBudget",
    "ThresholdedSystem",
    "BoundTriple",
    "build_sigma",
    "scheme_violations",
    "omega1",
    "omega2",
    "thresholding_error_bound",
    "lipschitz_constant",
    "error_budget",
    "build_thresholded_sheaves",
    "theorem_bound",
]

DEFAULT_SAMPLES = 4096


@dataclass(frozen=True, eq=False)
class VertexScheme:
    """Per-vertex thresholding and lifting data.

    Parameters
    ----------
    tau : StalkMap
        States to Boolean states.
    chi : StalkMap
        Controls to Boolean controls.
    rho : StalkMap
        Boolean states back to states.
    gamma : StalkMap
        Boolean tuples back to feasible tuples.
    f_tilde : StalkMap
        Boolean dynamics on Boolean tuples.
    feasible_tilde : Space
        Finite set of feasible Boolean tuples.
    """

    tau: StalkMap
    chi: StalkMap
    rho: StalkMap
    gamma: StalkMap
    f_tilde: StalkMap
    feasible_tilde: Space


def build_sigma(p: NetworkProblem, v: str, taus: Mapping[str, StalkMap], chi: StalkMap,
                codomain: Space | None = None) -> StalkMap:
    """Componentwise tuple threshold ``(c, s_v, s_w1, ...) -> (chi(c), tau_v(s_v), tau_w1(s_w1), ...)``."""
    sl = p.slices[v]
    nb = p.neighborhoods[v]
    if chi.domain.dim != sl["control"].stop - sl["control"].start:
        raise SignatureMismatch(f"control threshold of {v!r} has the wrong input dimension")
    for w in nb:
        if taus[w].domain.dim != sl[w].stop - sl[w].start:
            raise SignatureMismatch(f"state threshold of {w!r} has the wrong input dimension")
    parts = [(sl["control"], chi)] + [(sl[w], taus[w]) for w in nb]
    if codomain is None:
        codomain = product([chi.codomain] + [taus[w].codomain for w in nb])

    def fn(x):
        return np.concatenate([np.atleast_1d(m(x[s])) for s, m in parts])

    return StalkMap(p.F[v], codomain, fn, name=f"sigma_{v}")


class ThresholdingScheme:
    """Thresholding and lifting maps for every vertex of a problem.

    ``check=True`` raises :class:`SchemeInvalid` when any feasibility
    condition fails (see :func:`scheme_violations`).
    """

    def __init__(self, problem: NetworkProblem, vertices: Mapping[str, VertexScheme], check: bool = True,
                 name: str = "", meta: dict | None = None):
        missing = [v for v in problem.vertices if v not in vertices]
        if missing:
            raise SchemeInvalid(f"no scheme for vertex {missing[0]!r}")
        self.problem = problem
        self.name = name
        self.meta = dict(meta or {})
        self.vertex = {v: vertices[v] for v in problem.vertices}
        self.tau = {v: s.tau for v, s in self.vertex.items()}
        self.chi = {v: s.chi for v, s in self.vertex.items()}
        self.rho = {v: s.rho for v, s in self.vertex.items()}
        self.F_tilde = {v: s.feasible_tilde for v, s in self.vertex.items()}
        for v, F in self.F_tilde.items():
            if not F.is_finite:
                raise SchemeInvalid(f"Boolean feasible set of {v!r} is not finite")
        self.gamma = {v: s.gamma.restrict(self.F_tilde[v]) for v, s in self.vertex.items()}
        self.f_tilde = {v: s.f_tilde.restrict(self.F_tilde[v]) for v, s in self.vertex.items()}
        self.sigma = {v: build_sigma(problem, v, self.tau, self.chi[v]) for v in problem.vertices}
        if check:
            bad = scheme_violations(self)
            if bad:
                raise SchemeInvalid("; ".join(bad))
        self._boolean = None

    def boolean_problem(self) -> NetworkProblem:
        """The Boolean network problem.

        Same graph and horizon; Boolean spaces and feasible sets; dynamics
        ``f_tilde``; objectives pulled back along the lifts, ``J_v o rho_v``
        on states and ``J'_v o gamma_v`` on tuples; initial state thresholded.
        """
        if self._boolean is not None:
            return self._boolean
        p = self.problem
        models = {}
        for v in p.vertices:
            sch = self.vertex[v]
            models[v] = VertexModel(
                state_space=sch.tau.codomain,
                control_space=sch.chi.codomain,
                dynamics=self.f_tilde[v],
                objective_state=self.rho[v].then(p.J[v]),
                objective_control=self.gamma[v].then(p.Jc[v]),
                feasible=self.F_tilde[v],
            )
        init = None
        if p.initial_state is not None:
            init = {v: self.tau[v](p.initial_state[v]) for v in p.vertices}
        self._boolean = NetworkProblem(p.graph, models, p.horizon, init, name=f"{p.name}~")
        return self._boolean


def _points(space: Space, samples: int, seed: int):
    pts, exhaustive = space.domain_points(samples, seed)
    if not pts:
        raise DegenerateDomain(f"empty domain {space!r}")
    return pts, exhaustive


def _projections(points, sl) -> set:
    return {tuple(np.asarray(x)[sl]) for x in points}


def scheme_violations(s: ThresholdingScheme, samples: int = DEFAULT_SAMPLES, seed: int = 0) -> list:
    """Feasibility conditions a thresholding scheme must meet.

    Thresholded feasible states and controls must be feasible Boolean
    states and controls, lifts of feasible Boolean tuples must be feasible
    tuples, and the Boolean dynamics must keep Boolean states feasible.
    """
    p = s.problem
    out = []
    for v in p.vertices:
        Ft = s.F_tilde[v]
        tsl = _tilde_slices(s, v)
        states_t = _projections(Ft.points, tsl[v])
        controls_t = _projections(Ft.points, tsl["control"])
        pts, _ = _points(p.F[v], samples, seed)
        for x in pts:
            if tuple(s.tau[v](p.state_of(v, x))) not in states_t:
                out.append(f"{v}: thresholded feasible state is not a feasible Boolean state")
                break
        for x in pts:
            if tuple(s.chi[v](p.control_of(v, x))) not in controls_t:
                out.append(f"{v}: thresholded feasible control is not a feasible Boolean control")
                break
        for xt in Ft.points:
            if not p.F[v].contains(s.gamma[v](xt)):
                out.append(f"{v}: lift of a feasible Boolean tuple is not feasible")
                break
        for xt in Ft.points:
            if tuple(s.f_tilde[v](xt)) not in states_t:
                out.append(f"{v}: Boolean dynamics leave the feasible Boolean states")
                break
    return out


def _tilde_slices(s: ThresholdingScheme, v) -> dict:
    p = s.problem
    dims = [s.chi[v].codomain.dim] + [s.tau[w].codomain.dim for w in p.neighborhoods[v]]
    cuts = np.cumsum([0] + dims)
    out = {"control": slice(int(cuts[0]), int(cuts[1]))}
    for i, w in enumerate(p.neighborhoods[v]):
        out[w] = slice(int(cuts[i + 1]), int(cuts[i + 2]))
    return out


def _sup(fn, pts) -> float:
    return max(float(fn(x)) for x in pts)


def omega1(v: str, s: ThresholdingScheme, samples: int = DEFAULT_SAMPLES, seed: int = 0):
    """Sup over Boolean feasible tuples of ``|f_tilde(x) - tau(f(gamma(x)))|``.

    Returns ``(value, exhaustive, count)``.
    """
    p = s.problem
    pts, ex = _points(s.F_tilde[v], samples, seed)
    val = _sup(lambda xt: distance(s.f_tilde[v](xt), s.tau[v](p.f[v](s.gamma[v](xt)))), pts)
    return val, ex, len(pts)


def omega2(v: str, s: ThresholdingScheme, samples: int = DEFAULT_SAMPLES, seed: int = 0):
    """Sup over feasible tuples of ``|gamma(sigma(x)) - x|``; returns ``(value, exhaustive, count)``."""
    p = s.problem
    pts, ex = _points(p.F[v], samples, seed)
    val = _sup(lambda x: distance(s.gamma[v](s.sigma[v](x)), x), pts)
    return val, ex, len(pts)


def thresholding_error_bound(v: str, s: ThresholdingScheme, samples: int = DEFAULT_SAMPLES, seed: int = 0):
    """``(lhs, rhs)``: sup of ``|f_tilde(sigma(x)) - tau(f(x))|`` over ``F_v`` and the vertex error ``eps_v``."""
    b = _vertex_budget(v, s, samples, seed)
    return b.lhs, b.eps_v


@dataclass
class VertexBudget:
    vertex: str
    omega1: float
    omega2: float
    norm_sigma: float
    norm_tau_f: float
    eps_v: float
    lhs: float
    exhaustive: bool
    count: int

    def as_dict(self) -> dict:
        return {"vertex": self.vertex, "omega1": self.omega1, "omega2": self.omega2,
                "norm_sigma": self.norm_sigma, "norm_tau_f": self.norm_tau_f, "eps_v": self.eps_v,
                "lhs": self.lhs, "passed": self.lhs <= self.eps_v + 1e-12,
                "evaluation": "exhaustive" if self.exhaustive else f"sampled({self.count})"}


def _vertex_budget(v, s: ThresholdingScheme, samples, seed) -> VertexBudget:
    p = s.problem
    w1, ex1, n1 = omega1(v, s, samples, seed)
    w2, ex2, n2 = omega2(v, s, samples, seed)
    pts, ex3 = _points(p.F[v], samples, seed)
    sig = _sup(lambda x: float(np.linalg.norm(s.sigma[v](x))), pts)
    tf = _sup(lambda x: float(np.linalg.norm(s.tau[v](p.f[v](x)))), pts)
    lhs = _sup(lambda x: distance(s.f_tilde[v](s.sigma[v](x)), s.tau[v](p.f[v](x))), pts)
    return VertexBudget(v, w1, w2, sig, tf, w1 * sig + w2 * tf, lhs, ex1 and ex2 and ex3, max(n1, n2, len(pts)))


def lipschitz_constant(s: ThresholdingScheme, sample_pairs: int = 2000) -> tuple[float, dict]:
    """Largest Lipschitz constant among the lifts, dynamics and objectives.

    Declared constants are used as they are; others are computed over
    all pairs of a finite domain, or estimated from seeded pairs. Returns
    ``(K, per_map)`` with ``per_map[name] = (value, provenance)``.
    """
    p = s.problem
    per = {}

    def add(name, m, dom):
        try:
            if m.lipschitz is not None:
                per[name] = (float(m.lipschitz), "declared")
                return
            k = estimate_lipschitz(m, sample_pairs, dom)
            exact = dom.is_finite and len(dom.points) * (len(dom.points) - 1) // 2 <= max(sample_pairs, 20000)
            per[name] = (k, "exhaustive" if exact else "sampled")
        except DegenerateDomain:
            per[name] = (0.0, "single point")

    for v in p.vertices:
        add(f"gamma_{v}", s.gamma[v], s.F_tilde[v])
        add(f"rho_{v}", s.rho[v], s.rho[v].domain)
        add(f"f_{v}", p.f[v], p.F[v])
        add(f"J_{v}", p.J[v], p.S[v])
        add(f"J'_{v}", p.Jc[v], p.F[v])
    return max(k for k, _ in per.values()), per


@dataclass
class ErrorBudget:
    vertices: dict
    eps: float
    C: float
    K: float
    K_sources: dict
    evaluation_mode: str
    samples: int
    seed: int

    def as_dict(self) -> dict:
        return {"vertices": [b.as_dict() for b in self.vertices.values()], "eps": self.eps, "C": self.C,
                "K": self.K, "K_sources": {k: {"value": v, "provenance": pr} for k, (v, pr) in self.K_sources.items()},
                "evaluation_mode": self.evaluation_mode, "samples": self.samples, "seed": self.seed}


def error_budget(s: ThresholdingScheme, samples: int = DEFAULT_SAMPLES, seed: int = 0, threads: int = 1) -> ErrorBudget:
    """Per-vertex error quantities, their maximum ``eps``, and the constants ``C`` and ``K``.

    ``C`` squared counts the related pairs (reflexive included) of one time step's ``N``.
    """
    p = s.problem
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda v: _vertex_budget(v, s, samples, seed), p.vertices))
    else:
        rows = [_vertex_budget(v, s, samples, seed) for v in p.vertices]
    per = {b.vertex: b for b in rows}
    eps = max(b.eps_v for b in rows)
    K, sources = lipschitz_constant(s)
    C = math.sqrt(_n_relations(p))
    exhaustive = all(b.exhaustive for b in rows)
    mode = "exhaustive" if exhaustive else f"sampled({samples}, seed={seed})"
    return ErrorBudget(per, eps, C, K, sources, mode, samples, seed)


def _n_relations(p: NetworkProblem) -> int:
    # one step of N: a reflexive pair per element plus one pair per (U_v, w in U_v)
    return 2 * len(p.vertices) + sum(len(p.neighborhoods[v]) for v in p.vertices)


@dataclass(eq=False)
class ThresholdedSystem:
    """Real and Boolean encodings with the comparison morphisms between them.

    ``Sigma[n]``: ``N_n -> N~_n`` (``sigma_v`` on neighborhoods, ``tau_w`` on
    vertices); ``Gamma[n]``: ``N~_n -> N_n`` (``gamma_v`` and ``rho_w``);
    ``T[n]``: ``L_n -> L~_n`` (``tau_v``); ``SigmaT``: the trajectory sheaf
    to its Boolean counterpart, combining ``Sigma`` and ``T``.
    """

    scheme: ThresholdingScheme
    encoded: EncodedProblem
    boolean: EncodedProblem
    Sigma: list
    Gamma: list
    T: list
    SigmaT: SheafMorphism
    defects: dict = field(default_factory=dict)


def _identity_map(src: Sheaf, dst: Sheaf) -> OrderMap:
    """Order map from ``dst``'s base to ``src``'s base matching element names."""
    return OrderMap(dst.base, src.base, {x: x for x in dst.base.elements})


def build_thresholded_sheaves(enc: EncodedProblem, s: ThresholdingScheme, samples: int = 256,
                              seed: int = 0) -> ThresholdedSystem:
    """Boolean sheaves of the scheme's Boolean problem and the morphisms ``Sigma``, ``Gamma``, ``T``.

    Each returned morphism carries its measured commutativity defect.
    """
    p = enc.problem
    if s.problem is not p:
        raise SchemeInvalid("scheme belongs to a different problem")
    bp = s.boolean_problem()
    benc = build_S(bp)
    sig, gam, tee = [], [], []
    defects = {}
    for n in range(p.horizon):
        N, Nt = enc.N[n], benc.N[n]
        comp_s, comp_g = {}, {}
        for v in p.vertices:
            u = element_name(n, "N", "neighborhood", v)
            x = element_name(n, "N", "vertex", v)
            comp_s[u], comp_s[x] = s.sigma[v].restrict(p.F[v]), s.tau[v]
            comp_g[u], comp_g[x] = s.gamma[v], s.rho[v]
        m = SheafMorphism(N, Nt, _identity_map(N, Nt), _fit(comp_s, Nt), name=f"Sigma{n}")
        sig.append(m.with_defect(morphism_defect(m, samples, seed)))
        m = SheafMorphism(Nt, N, _identity_map(Nt, N), _fit(comp_g, N), name=f"Gamma{n}")
        gam.append(m.with_defect(morphism_defect(m, samples, seed)))
    for n in range(p.horizon + 1):
        L, Lt = enc.L[n], benc.L[n]
        comp = {element_name(n, "L", "neighborhood", v): s.tau[v] for v in p.vertices}
        m = SheafMorphism(L, Lt, _identity_map(L, Lt), _fit(comp, Lt), name=f"T{n}")
        tee.append(m.with_defect(morphism_defect(m, samples, seed)))
    comp = {}
    for m in sig + tee:
        comp.update(m.components)
    m = SheafMorphism(enc.T, benc.T, _identity_map(enc.T, benc.T), _fit(comp, benc.T), name="SigmaT")
    sigma_t = m.with_defect(morphism_defect(m, samples, seed))
    for m in sig + gam + tee + [sigma_t]:
        defects[m.name] = m.defect_bound
    return ThresholdedSystem(s, enc, benc, sig, gam, tee, sigma_t, defects)


def _fit(components: dict, target: Sheaf) -> dict:
    """Retarget component codomains onto the target stalks (same rule and constant)."""
    out = {}
    for x, m in components.items():
        out[x] = StalkMap(m.domain, target.stalks[x], m.fn, m.lipschitz, m.name)
    return out


@dataclass
class BoundTriple:
    step: int
    lhs: float
    mid: float
    rhs: float
    slack: float = 1e-9

    @property
    def lhs_ok(self) -> bool:
        return self.lhs <= self.mid + self.slack

    @property
    def rhs_ok(self) -> bool:
        return self.mid <= self.rhs + self.slack

    @property
    def passed(self) -> bool:
        return self.lhs_ok and self.rhs_ok

    def as_dict(self) -> dict:
        return {"step": self.step, "lhs": self.lhs, "mid": self.mid, "rhs": self.rhs,
                "lhs_le_mid": self.lhs_ok, "mid_le_rhs": self.rhs_ok}


def theorem_bound(r: Mapping, s: Mapping, system: ThresholdedSystem, budget: ErrorBudget,
                  slack: float = 1e-9) -> list:
    """Per-step triples comparing a Boolean assignment ``r`` with a real one ``s``.

    For each step ``n``: ``lhs = c(r on N~_n)``, ``mid = K c(Gamma(r) on N_n) + C eps``
    and ``rhs = 2 K d(s, Gamma(r)) + C eps`` with the distance taken over ``N_n``.

    Raises
    ------
    NotASection
        If ``s`` fails to be a section of some ``N_n``.
    """
    enc = system.encoded
    out = []
    K, C, eps = budget.K, budget.C, budget.eps
    for n in range(enc.horizon):
        N, Nt = enc.N[n], system.boolean.N[n]
        if not is_global_section(N, s, SECTION_TOL):
            raise NotASection(f"reference assignment is not a section at step {n}")
        g = apply_morphism(system.Gamma[n], r)
        lhs = consistency_radius(Nt, r)
        mid = K * consistency_radius(N, g) + C * eps
        rhs = 2.0 * K * assignment_distance(N, s, g, N.base.elements) + C * eps
        out.append(BoundTriple(n, lhs, mid, rhs, slack))
    return out
