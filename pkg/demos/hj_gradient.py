"""Check a known value-function gradient against the pointwise HJE.

For the two-state system with drift ``[x2, -x1 e^{x1} + x2^2/2]``, input
matrix ``[0, e^{x1}]^T``, state cost ``2 x2^2`` and ``R = 2`` the value
function is ``V = x1^2 + x2^2 e^{-x1}``.  At each state the HJE is a
quadratic equation in ``V_x``; this script shows the case, the parameters
that reproduce the true gradient, and the resulting optimal control.

Run with ``python3 demos/hj_gradient.py``.
"""

import numpy as np

from cqe.equation import parameterize, residual
from cqe.hamilton_jacobi import exp_drift_system, exp_drift_value_gradient, hje_to_cqe, optimal_control

sys_, cost = exp_drift_system()
for x in ([1.0, 0.0], [-0.7, 0.0], [1.0, 1.0], [0.4, -1.5]):
    x = np.array(x)
    p = hje_to_cqe(sys_, cost, x)
    s = parameterize(p)
    vx = exp_drift_value_gradient(x)
    params = {k: np.round(v, 6).tolist() for k, v in s.invert(vx).as_dict().items()}
    u = optimal_control(vx, sys_, cost, x)
    print(f"x = {x}: {s.tag.value}, V_x = {np.round(vx, 6)}, residual {residual(p, vx):.1e}")
    print(f"   parameters {params}; control u = {u.round(6)} (expected {-x[1]})")
