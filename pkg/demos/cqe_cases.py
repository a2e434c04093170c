"""Walk through the three solvable cases of z^T M z + k^T z + c = 0.

Run with ``python3 demos/cqe_cases.py``.
"""

import numpy as np

from cqe.equation import CaseTag, residual, solve

rng = np.random.default_rng(0)

examples = {
    "full rank (an ellipse)": (np.diag([1.0, 4.0]), np.array([0.0, 0.0]), -1.0),
    "rank deficient, k in range (a slab of lines)": (np.diag([1.0, 0.0]), np.array([2.0, 0.0]), -3.0),
    "rank deficient, k out of range (a parabola)": (np.diag([1.0, 0.0]), np.array([0.0, -1.0]), 0.0),
}

for label, (m, k, c) in examples.items():
    s = solve(m, k, c)
    print(f"{label}: case {s.tag.value}, discriminant {s.case.discriminant:.3f}")
    pts = s.evaluate(s.sample(rng, size=5))
    for z in np.atleast_2d(pts):
        print(f"   z = {np.array2string(z, precision=3)}   residual {residual(s.problem, z):+.1e}")
    # every solution maps back to parameters and forward again
    back = s.evaluate(s.invert(pts))
    print(f"   round-trip error {np.abs(back - pts).max():.1e}")
    if s.tag is CaseTag.OUT_OF_RANGE:
        print(f"   out-of-range part of k: {s.split.out_of_range}")
