import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sheafcontrol.affine import build_boolean_scheme, heaviside
from sheafcontrol.boolrelax import (
    ThresholdingScheme,
    VertexScheme,
    build_sigma,
    build_thresholded_sheaves,
    error_budget,
    omega1,
    omega2,
    scheme_violations,
    theorem_bound,
    thresholding_error_bound,
)
from sheafcontrol.encode import build_S
from sheafcontrol.errors import NotASection, SchemeInvalid
from sheafcontrol.netmodel import DirectedGraph, NetworkProblem, VertexModel
from sheafcontrol.optimize import SolveRequest, solve_constrained
from sheafcontrol.problems import random_threshold_instance
from sheafcontrol.sheaf import (
    apply_morphism,
    assignment_distance,
    consistency_radius,
    is_global_section,
    random_assignment,
    sections,
)
from sheafcontrol.space import Space, StalkMap

B1 = Space.boolean(1)
B2 = Space.boolean(2)
ETA = 40.0


def one_vertex(states, dynamics, feasible=None):
    g = DirectedGraph.with_self_edges(["v"])
    model = VertexModel(Space.finite([[s] for s in states]), Space.finite([[0.0], [1.0]]), dynamics,
                        feasible=feasible)
    return NetworkProblem(g, {"v": model})


def one_vertex_scheme(p, f_tilde, check=True):
    """Threshold at 40 with nominal states 0 and 120, controls kept as they are."""
    S, C = p.S["v"], p.C["v"]
    tau = StalkMap(S, B1, lambda s: np.array([heaviside(s[0] - ETA)]))
    chi = StalkMap(C, B1, lambda c: np.array(c, dtype=float))
    rho = StalkMap(B1, S, lambda b: np.array([120.0 * b[0]]))
    gamma = StalkMap(B2, p.R["v"], lambda x: np.array([x[0], 120.0 * x[1]]))
    Ft = Space.finite(list(itertools.product([0.0, 1.0], repeat=2)), B2.signature)
    vs = VertexScheme(tau, chi, rho, gamma, StalkMap(B2, B1, f_tilde), Ft)
    return ThresholdingScheme(p, {"v": vs}, check=check)


def hold(x):
    return x[1:2]


def exact_f_tilde(x):
    return np.array([x[1]])


def test_build_sigma_componentwise():
    p = one_vertex([-0.5, 0.5], hold)
    tau = StalkMap(p.S["v"], B1, lambda s: np.array([heaviside(s[0])]))
    chi = StalkMap(p.C["v"], B1, lambda c: np.array(c, dtype=float))
    sigma = build_sigma(p, "v", {"v": tau}, chi)
    assert np.array_equal(sigma([1.0, -0.5]), [1.0, 0.0])
    assert np.array_equal(sigma([0.0, 0.5]), [0.0, 1.0])


def test_identity_thresholds_give_identity_sigma():
    g = DirectedGraph.with_self_edges(["v", "w"], [("w", "v")])
    models = {v: VertexModel(B1, B1, hold) for v in "vw"}
    p = NetworkProblem(g, models)
    ident = StalkMap.identity(B1)
    sigma = build_sigma(p, "v", {"v": ident, "w": ident}, ident)
    for x in p.F["v"].points:
        assert np.array_equal(sigma(x), x)


def test_nominal_scheme_has_no_error():
    p = one_vertex([0.0, 120.0], hold)
    s = one_vertex_scheme(p, exact_f_tilde)
    assert omega1("v", s)[0] == 0.0
    assert omega2("v", s)[0] == 0.0
    assert thresholding_error_bound("v", s) == (0.0, 0.0)


def test_omega1_detects_wrong_boolean_dynamics():
    p = one_vertex([0.0, 120.0], lambda x: np.array([0.0]))
    s = one_vertex_scheme(p, lambda x: np.array([1.0]))
    w1, exhaustive, count = omega1("v", s)
    assert w1 == 1.0 and exhaustive and count == 4
    lhs, rhs = thresholding_error_bound("v", s)
    assert lhs == 1.0 and lhs <= rhs


def test_omega2_measures_lift_offset():
    # state 100 thresholds to 1 and lifts back to 120
    p = one_vertex([0.0, 100.0, 120.0], lambda x: np.array([0.0 if x[1] == 0.0 else 120.0]))
    s = one_vertex_scheme(p, exact_f_tilde)
    assert omega2("v", s)[0] == pytest.approx(20.0)
    lhs, rhs = thresholding_error_bound("v", s)
    assert lhs <= rhs


def test_omega2_fixed_point_domain():
    p = one_vertex([120.0], hold, feasible=[[1.0, 120.0]])
    Ft = Space.finite([[1.0, 1.0]], B2.signature)
    base = one_vertex_scheme(one_vertex([0.0, 120.0], hold), exact_f_tilde)
    vs = base.vertex["v"]
    s = ThresholdingScheme(p, {"v": VertexScheme(
        StalkMap(p.S["v"], B1, vs.tau.fn), StalkMap(p.C["v"], B1, vs.chi.fn),
        StalkMap(B1, p.S["v"], vs.rho.fn), StalkMap(B2, p.R["v"], vs.gamma.fn), vs.f_tilde, Ft)})
    assert omega2("v", s)[0] == 0.0


def test_eps_identity(systems):
    for scheme, budget, _ in systems.values():
        for b in budget.vertices.values():
            assert abs(b.eps_v - (b.omega1 * b.norm_sigma + b.omega2 * b.norm_tau_f)) <= 1e-12
        assert budget.eps == max(b.eps_v for b in budget.vertices.values())
        p = scheme.problem
        pairs = 2 * len(p.vertices) + sum(len(p.neighborhoods[v]) for v in p.vertices)
        assert budget.C == pytest.approx(math.sqrt(pairs))


def test_invalid_schemes_are_rejected():
    p = one_vertex([0.0, 120.0], hold)
    with pytest.raises(SchemeInvalid):
        ThresholdingScheme(p, {})
    bad = one_vertex_scheme(p, lambda x: np.array([0.5]), check=False)
    assert any("leave" in msg for msg in scheme_violations(bad))
    with pytest.raises(SchemeInvalid):
        one_vertex_scheme(p, lambda x: np.array([0.5]))


def test_defects_vanish_on_affine_lighting(systems):
    _, _, system = systems["lighting"]
    assert system.defects
    assert all(d <= 1e-12 for d in system.defects.values())


def test_sigma_maps_sections_to_sections(systems, encoded):
    _, _, system = systems["lighting"]
    N, Nt = encoded["lighting"].N[0], system.boolean.N[0]
    for sec in itertools.islice(sections(N), 50):
        img = apply_morphism(system.Sigma[0], sec)
        assert is_global_section(Nt, img)
        back = apply_morphism(system.Gamma[0], img)
        assert all(np.array_equal(back[x], sec[x]) for x in sec)


def test_bound_with_thresholded_reference(systems, encoded):
    scheme, budget, system = systems["lighting"]
    s = solve_constrained(SolveRequest(encoded["lighting"])).assignment
    r = {}
    for n in range(encoded["lighting"].horizon):
        r.update(apply_morphism(system.Sigma[n], {x: s[x] for x in encoded["lighting"].N[n].base.elements}))
    for t in theorem_bound(r, s, system, budget):
        assert t.lhs == 0.0 and t.passed


def test_zero_error_reduces_to_distance_bound(systems, encoded, rng):
    scheme, budget, system = systems["lighting"]
    assert budget.eps == 0.0
    s = solve_constrained(SolveRequest(encoded["lighting"])).assignment
    bsheaf = system.boolean.S
    for _ in range(20):
        r = random_assignment(bsheaf, rng)
        for t in theorem_bound(r, s, system, budget):
            assert t.passed
            N = encoded["lighting"].N[t.step]
            g = apply_morphism(system.Gamma[t.step], r)
            assert t.rhs == 2.0 * budget.K * assignment_distance(N, s, g, N.base.elements)
            assert t.mid == pytest.approx(budget.K * consistency_radius(N, g), abs=1e-12)


def test_bound_requires_section(systems, encoded, rng):
    _, budget, system = systems["lighting"]
    s = random_assignment(encoded["lighting"].S, rng)
    r = random_assignment(system.boolean.S, rng)
    with pytest.raises(NotASection):
        theorem_bound(r, s, system, budget)


def test_scheme_must_match_problem(systems, encoded):
    scheme, _, _ = systems["lighting"]
    with pytest.raises(SchemeInvalid):
        build_thresholded_sheaves(encoded["ups"], scheme)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000))
def test_bound_chain_on_random_threshold_instances(seed):
    rng = np.random.default_rng(seed)
    p, nominal, dyn = random_threshold_instance(rng, int(rng.integers(1, 3)))
    scheme = build_boolean_scheme(p, nominal, dyn, strict=False)
    budget = error_budget(scheme)
    for v in p.vertices:
        lhs, rhs = thresholding_error_bound(v, scheme)
        assert lhs <= rhs + 1e-12
    enc = build_S(p)
    system = build_thresholded_sheaves(enc, scheme)
    s = solve_constrained(SolveRequest(enc)).assignment
    r = random_assignment(system.boolean.S, rng)
    for t in theorem_bound(r, s, system, budget):
        assert t.passed, t.as_dict()
