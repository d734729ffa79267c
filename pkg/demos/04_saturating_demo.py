"""Discretization error of a saturating (clipped) update.

The bundled UPS problem clips one vertex's affine update, so the Boolean
dynamics built from the affine part misjudge some tuples. The error
budget records that mismatch and the bound chain absorbs it.
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
    lp = load_bundled("ups")
    print("clipped vertices:", lp.clamp)
    scheme = build_boolean_scheme(lp.problem, lp.nominal, lp.dynamics, strict=False)
    budget = error_budget(scheme)
    for b in budget.vertices.values():
        print(f"{b.vertex:6s} omega1 {b.omega1:g}  eps_v {b.eps_v:.6f}  sup error {b.lhs:g}")
    print(f"eps {budget.eps:.6f}, C eps {budget.C * budget.eps:.6f}")

    enc = build_S(lp.problem)
    system = build_thresholded_sheaves(enc, scheme)
    s = solve_constrained(SolveRequest(enc))
    r = solve_constrained(SolveRequest(system.boolean))
    print(f"real optimum {s.objective:.6f}, Boolean optimum {r.objective:.6f}")
    for t in theorem_bound(r.assignment, s.assignment, system, budget):
        print(f"  step {t.step}: {t.lhs:.4g} <= {t.mid:.4g} <= {t.rhs:.4g}  {'ok' if t.passed else 'VIOLATED'}")


if __name__ == "__main__":
    main()
