"""Boolean discretization of the affine lighting problem.

Affine dynamics thresholded at nominal states lose nothing: every error
quantity is zero and the Boolean problem has the same optimum.
"""

from sheafcontrol import (
    SolveRequest,
    build_boolean_scheme,
    build_S,
    build_thresholded_sheaves,
    error_budget,
    solve_constrained,
    theorem_bound,
)
from sheafcontrol.problems import load_bundled


def main():
    lp = load_bundled("lighting")
    scheme = build_boolean_scheme(lp.problem, lp.nominal, lp.dynamics)
    budget = error_budget(scheme)
    for b in budget.vertices.values():
        print(f"{b.vertex:8s} omega1 {b.omega1:g}  omega2 {b.omega2:g}  eps_v {b.eps_v:g}")
    print(f"eps {budget.eps:g}  K {budget.K:g}  C {budget.C:.6f}  ({budget.evaluation_mode})")

    enc = build_S(lp.problem)
    system = build_thresholded_sheaves(enc, scheme)
    print("morphism defects:", system.defects)
    s = solve_constrained(SolveRequest(enc))
    r = solve_constrained(SolveRequest(system.boolean))
    print(f"real optimum {s.objective:.6f}, Boolean optimum {r.objective:.6f}")
    for t in theorem_bound(r.assignment, s.assignment, system, budget):
        print(f"  step {t.step}: {t.lhs:.4g} <= {t.mid:.4g} <= {t.rhs:.4g}  {'ok' if t.passed else 'VIOLATED'}")


if __name__ == "__main__":
    main()
