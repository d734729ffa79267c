"""Consistency radius on a four-element diamond poset.

Shows how the radius grows as one stalk value drifts away from the
others, and how pinning the two middle values leaves a minimum of 2.
"""

import numpy as np

from sheafcontrol.optimize import minimize_consistency_radius
from sheafcontrol.problems import diamond_sheaf
from sheafcontrol.sheaf import consistency_radius, is_global_section


def main():
    s = diamond_sheaf()
    print("relations:", sorted(s.base.strict_pairs))
    for top in (1.0, 1.5, 2.0, 3.0):
        a = {"a": np.array([1.0]), "b": np.array([1.0]), "c": np.array([1.0]), "d": np.array([top])}
        print(f"d = {top:3.1f}  radius = {consistency_radius(s, a):.6f}  section = {is_global_section(s, a)}")

    start = {"a": [0.0], "b": [0.0], "c": [2.0], "d": [0.0]}
    best, obj, converged, evals, _ = minimize_consistency_radius(s, start=start, fixed=("b", "c"))
    values = {x: float(v[0]) for x, v in best.items()}
    print(f"with b = 0 and c = 2 held fixed: {values}, radius {obj:.6f} "
          f"({'converged' if converged else 'not converged'}, {evals} evaluations)")


if __name__ == "__main__":
    main()
