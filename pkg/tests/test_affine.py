import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sheafcontrol.affine import (
    AffineDynamics,
    NominalStates,
    VectorizedBooleanDynamics,
    boolean_dynamics_component,
    build_boolean_scheme,
    control_chi,
    control_chi_inv,
    dynamics_component,
    dynamics_lipschitz,
    gamma_vectorized,
    heaviside,
    heaviside_tau,
    lift_rho,
    nominal_problem,
    tau_vectorized,
    vectorized_boolean_dynamics,
)
from sheafcontrol.boolrelax import error_budget
from sheafcontrol.errors import DimensionMismatch, InconsistentDynamics
from sheafcontrol.netmodel import DirectedGraph, NetworkProblem, VertexModel, neighborhood
from sheafcontrol.problems import random_affine_instance
from sheafcontrol.space import Space

LIGHT = NominalStates(("v",), [0.0], [120.0], [40.0], [0.0], [1.0])


def two_vertex():
    g = DirectedGraph.with_self_edges(["v", "w"], [("w", "v")])
    d = AffineDynamics(("v", "w"), [[0.5, 0.25], [0.0, 1.0]], [2.0, 0.0], [0.1, 0.0])
    return g, d


def test_dynamics_component_arithmetic():
    g, d = two_vertex()
    assert dynamics_component("v", d, [1.0, 120.0, 0.0], neighborhood(g, "v")) == pytest.approx(62.1, abs=1e-12)
    ident = AffineDynamics(("v",), [[0.0]], [1.0], [0.0])
    assert dynamics_component("v", ident, [1.0, 7.0], ["v"]) == 1.0
    assert dynamics_lipschitz("v", d, neighborhood(g, "v")) == pytest.approx(np.linalg.norm([2.0, 0.5, 0.25]))


def test_dynamics_component_matches_vector_update():
    rng = np.random.default_rng(0)
    for _ in range(100):
        k = int(rng.integers(1, 5))
        g = DirectedGraph.with_self_edges([f"v{i}" for i in range(k)],
                                          [(f"v{i}", f"v{j}") for i in range(k) for j in range(k)
                                           if i != j and rng.random() < 0.5])
        A = rng.normal(size=(k, k))
        for i, j in itertools.product(range(k), repeat=2):
            if (f"v{j}", f"v{i}") not in g.edges:
                A[i, j] = 0.0
        d = AffineDynamics(g.vertices, A, rng.normal(size=k), rng.normal(size=k))
        x, u = rng.normal(size=k), rng.normal(size=k)
        full = d(x, u)
        for i, v in enumerate(g.vertices):
            nb = neighborhood(g, v)
            tup = [u[i]] + [x[d.index(w)] for w in nb]
            assert dynamics_component(v, d, tup, nb) == pytest.approx(full[i], abs=1e-12)


def test_non_neighbor_states_are_ignored():
    rng = np.random.default_rng(1)
    g = DirectedGraph.with_self_edges(["a", "b", "c"], [("a", "b")])
    d = AffineDynamics(g.vertices, [[1.0, 0.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [1.0] * 3, [0.0] * 3)
    for _ in range(50):
        x, u = rng.normal(size=3), rng.normal(size=3)
        y = x.copy()
        y[2] += rng.normal() * 10
        assert d(x, u)[1] == d(y, u)[1]


def test_sparsity_violations_reported():
    g, _ = two_vertex()
    bad = AffineDynamics(("v", "w"), [[0.5, 0.0], [1.0, 1.0]], [0.0, 0.0], [0.0, 0.0])
    assert bad.sparsity_violations(g) == [("w", "v")]
    n = NominalStates(("v", "w"), 0.0, 1.0, 0.5, 0.0, 1.0)
    with pytest.raises(DimensionMismatch):
        nominal_problem(g, n, bad)


def test_heaviside_boundary():
    assert heaviside_tau("v", LIGHT, 120.0) == 1.0
    assert heaviside_tau("v", LIGHT, 40.0) == 1.0
    assert heaviside_tau("v", LIGHT, 0.0) == 0.0
    assert heaviside(0.0) == 1.0 and heaviside(-1e-13) == 1.0 and heaviside(-1e-6) == 0.0
    assert np.array_equal(heaviside([-1.0, 0.0, 2.0]), [0.0, 1.0, 1.0])


def test_lift_and_threshold_round_trip():
    assert lift_rho("v", LIGHT, 1) == 120.0
    assert lift_rho("v", LIGHT, 0) == 0.0
    for b in (0.0, 1.0):
        assert heaviside_tau("v", LIGHT, lift_rho("v", LIGHT, b)) == b
        assert control_chi("v", LIGHT, control_chi_inv("v", LIGHT, b)) == b
    n = NominalStates(("v",), [-3.0], [5.0], [1.0], [2.0], [-1.0])
    assert lift_rho("v", n, 0.25) == pytest.approx(8.0 * 0.25 - 3.0)
    assert control_chi("v", n, -1.0) == 1.0 and control_chi_inv("v", n, 0.0) == 2.0


def test_nominal_states_validation():
    with pytest.raises(ValueError):
        NominalStates(("v",), [0.0], [120.0], [0.0], [0.0], [1.0])
    with pytest.raises(ValueError):
        NominalStates(("v",), [0.0], [120.0], [40.0], [1.0], [1.0])
    edge = NominalStates(("v",), [0.0], [120.0], [120.0], [0.0], [1.0])
    assert edge.of("v")["eta"] == 120.0


def test_boolean_dynamics_self_loop():
    d = AffineDynamics(("v",), [[1.0]], [0.0], [0.0])
    n = NominalStates(("v",), [0.0], [1.0], [0.5], [0.0], [1.0])
    assert boolean_dynamics_component("v", d, n, [0.0, 1.0], ["v"]) == 1.0
    assert boolean_dynamics_component("v", d, n, [1.0, 0.0], ["v"]) == 0.0


def test_breaker_off_keeps_light_dark():
    g = DirectedGraph.with_self_edges(["feed", "light"], [("feed", "light")])
    d = AffineDynamics(g.vertices, [[1.0, 0.0], [1.0, 0.0]], [0.0, 10.0], [0.0, 0.0])
    n = NominalStates(g.vertices, 0.0, 120.0, 40.0, 0.0, 1.0)
    nb = neighborhood(g, "light")
    assert boolean_dynamics_component("light", d, n, [1.0, 0.0, 0.0], nb) == 0.0
    assert boolean_dynamics_component("light", d, n, [1.0, 0.0, 1.0], nb) == 1.0


def test_boolean_dynamics_agree_with_threshold_of_lift(bundled):
    for lp in bundled.values():
        if lp.nominal is None or not lp.is_affine:
            continue
        p, n, d = lp.problem, lp.nominal, lp.dynamics
        for v in p.vertices:
            nb = p.neighborhoods[v]
            for xt in itertools.product([0.0, 1.0], repeat=1 + len(nb)):
                lifted = [control_chi_inv(v, n, xt[0])] + [lift_rho(w, n, xt[1 + k]) for k, w in enumerate(nb)]
                want = heaviside_tau(v, n, p.f[v](np.array(lifted)))
                assert boolean_dynamics_component(v, d, n, xt, nb) == want


def test_vectorized_identities():
    rng = np.random.default_rng(2)
    p, n, d = random_affine_instance(rng, 3)
    vbd = VectorizedBooleanDynamics.from_affine(d, n)
    assert np.allclose(vbd.M1, d.A @ np.diag(n.s_omega - n.s_phi), atol=1e-12)
    assert np.allclose(vbd.M2, np.diag(d.B) @ np.diag(n.c1 - n.c0), atol=1e-12)
    assert np.allclose(vbd.y, d.A @ n.s_phi + d.B * n.c0 + d.h - n.eta, atol=1e-12)


def test_zero_matrices_give_all_ones():
    z = np.zeros((2, 2))
    vbd = VectorizedBooleanDynamics(z, z, np.array([0.0, 3.0]), z, z, np.zeros(2), np.zeros(2))
    for xt, ut in itertools.product(itertools.product([0.0, 1.0], repeat=2), repeat=2):
        assert np.array_equal(vectorized_boolean_dynamics(vbd, xt, ut), [1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        vectorized_boolean_dynamics(vbd, [0.0], [0.0, 1.0])


def test_fixed_point_maps_to_its_threshold():
    g = DirectedGraph.with_self_edges(["v", "w"], [("w", "v")])
    d = AffineDynamics(g.vertices, [[0.5, 0.5], [0.0, 1.0]], [0.0, 0.0], [0.0, 0.0])
    n = NominalStates(g.vertices, 0.0, 10.0, 5.0, 0.0, 1.0)
    vbd = VectorizedBooleanDynamics.from_affine(d, n)
    fixed = np.array([10.0, 10.0])
    assert np.array_equal(d(fixed, [0.0, 0.0]), fixed)
    assert np.array_equal(vectorized_boolean_dynamics(vbd, [1.0, 1.0], [0.0, 0.0]), tau_vectorized(n, fixed))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10_000))
def test_vectorized_matches_components(k, seed):
    rng = np.random.default_rng(seed)
    p, n, d = random_affine_instance(rng, k)
    vbd = VectorizedBooleanDynamics.from_affine(d, n)
    for bits in itertools.product([0.0, 1.0], repeat=2 * k):
        xt, ut = np.array(bits[:k]), np.array(bits[k:])
        out = vectorized_boolean_dynamics(vbd, xt, ut)
        for i, v in enumerate(p.vertices):
            nb = p.neighborhoods[v]
            tup = [ut[i]] + [xt[n.index(w)] for w in nb]
            assert out[i] == boolean_dynamics_component(v, d, n, tup, nb)


def test_gamma_vectorized_reorders_tuple_lift():
    rng = np.random.default_rng(3)
    p, n, d = random_affine_instance(rng, 3)
    scheme = build_boolean_scheme(p, n, d)
    xt, ut = np.array([1.0, 0.0, 1.0]), np.array([0.0, 1.0, 1.0])
    x, u = gamma_vectorized(n, xt, ut)
    for i, v in enumerate(p.vertices):
        nb = p.neighborhoods[v]
        tup = scheme.gamma[v](np.array([ut[i]] + [xt[n.index(w)] for w in nb]))
        assert tup[0] == u[i]
        assert tup[1] == x[i]
        for k, w in enumerate(nb):
            assert tup[1 + k] == x[n.index(w)]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10_000))
def test_affine_schemes_are_exact(k, seed):
    rng = np.random.default_rng(seed)
    p, n, d = random_affine_instance(rng, k)
    scheme = build_boolean_scheme(p, n, d)
    budget = error_budget(scheme)
    assert budget.eps <= 1e-12
    for v in p.vertices:
        for x in p.F[v].points:
            assert np.array_equal(scheme.gamma[v](scheme.sigma[v](x)), x)
        for xt in scheme.F_tilde[v].points:
            assert np.array_equal(scheme.sigma[v](scheme.gamma[v](xt)), xt)


def test_strict_mode_rejects_other_dynamics():
    g = DirectedGraph.with_self_edges(["v"])
    n = NominalStates(("v",), [0.0], [120.0], [40.0], [0.0], [1.0])
    d = AffineDynamics(("v",), [[1.0]], [0.0], [0.0])
    S = Space.finite([[0.0], [120.0]])
    C = Space.finite([[0.0], [1.0]])
    p = NetworkProblem(g, {"v": VertexModel(S, C, lambda x: np.array([120.0 - x[1]]))})
    with pytest.raises(InconsistentDynamics):
        build_boolean_scheme(p, n, d)
    loose = build_boolean_scheme(p, n, d, strict=False)
    assert error_budget(loose).eps > 0.0
