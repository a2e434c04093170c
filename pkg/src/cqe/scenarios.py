"""Built-in worked examples, runnable from the CLI as named scenarios.

* ``pd-three-borders`` (alias ``table-1``): a positive definite 2-D QP with
  three inequality constraints; the optimum lies on the border
  ``x1 + x2 = 4``.
* ``singular-lifted`` (alias ``table-2``): the same borders lifted to 3-D
  with ``x3 = b`` and a singular Hessian; the optima form a segment whose two
  terminal optima are reported.
* ``hj-sweep``: the two-state exponential-drift system; at random states the
  known value-function gradient is checked against the pointwise HJE-CQE.
"""

from __future__ import annotations

from collections.abc import Callable
from typing import Any

import numpy as np

from .algorithm import QpProblem, QpSolveResult, SubsetTrace, qp_solve
from .equation import CaseTag, parameterize, residual, residual_scale
from .errors import InputError
from .hamilton_jacobi import exp_drift_system, exp_drift_value_gradient, hje_to_cqe
from .oracles import nullspace_intersection_dim
from .qp import CqfSpec, EqCategory
from .serialize import jsonable, qp_result_json

BORDERS = [([1.0, 1.0], 4.0), ([-1.0, 0.0], 0.0), ([0.0, -1.0], 0.0)]


def pd_three_borders() -> QpProblem:
    """``P = [[4,1],[1,2]]``, ``q = [-12,-10]``; ``x1 + x2 <= 4``, ``x >= 0``."""
    f = CqfSpec(np.array([[4.0, 1.0], [1.0, 2.0]]), np.array([-12.0, -10.0]), 0.0)
    return QpProblem.from_ineq(f, BORDERS)


def singular_lifted(b: float = 1.0) -> QpProblem:
    """``F = x1^2 / 2`` on ``x3 = b`` with the same three borders in ``(x1, x2)``."""
    f = CqfSpec(np.diag([1.0, 0.0, 0.0]), np.zeros(3), 0.0)
    ineq = [(c + [0.0], d) for c, d in BORDERS]
    return QpProblem.from_ineq(f, ineq, a=[[0.0, 0.0, 1.0]], b=[float(b)])


def categorization(t: SubsetTrace) -> str:
    if t.status == "vertex":
        return "vertex"
    if t.status != "edge":
        return t.status
    return {
        EqCategory.FINITE_QP: "QP",
        EqCategory.UNBOUNDED_QP: "unbounded QP",
        EqCategory.UNBOUNDED_LP: "LP",
        EqCategory.CONSTANT: "constant",
    }[t.category]


def table_rows(prob: QpProblem, result: QpSolveResult, intersection: bool = False) -> list[dict[str, Any]]:
    """One row per examined subset, in enumeration order."""
    rows = []
    for t in result.trace:
        row: dict[str, Any] = {
            "subset": list(t.subset),
            "a_tilde": t.a_tilde,
            "b_tilde": t.b_tilde,
            "v2_tilde": None if t.v2 is None else t.v2.T,
            "reduced_hessian": t.reduced_hessian,
            "categorization": categorization(t),
            "point": t.point,
            "candidate": t.candidate,
            "value": t.value if t.candidate else None,
        }
        if intersection and t.status == "edge":
            row["null_intersection_dim"] = nullspace_intersection_dim(t.a_tilde, prob.f.p)
        rows.append(jsonable(row))
    return rows


def _qp_scenario(prob: QpProblem, intersection: bool, **solve_opts: Any) -> dict[str, Any]:
    result = qp_solve(prob, **solve_opts)
    out = qp_result_json(result, include_trace=False)
    out["rows"] = table_rows(prob, result, intersection)
    return out


def run_pd_three_borders(**solve_opts: Any) -> dict[str, Any]:
    return _qp_scenario(pd_three_borders(), False, **solve_opts)


def run_singular_lifted(b: float = 1.0, **solve_opts: Any) -> dict[str, Any]:
    return _qp_scenario(singular_lifted(b), True, **solve_opts)


def run_hj_sweep(count: int = 20, seed: int = 0, **_: Any) -> dict[str, Any]:
    """Check the known gradient of the exponential-drift system at random states.

    Half the states have ``x2 = 0`` (``k`` in the range of ``M``), half have
    ``x2 != 0`` (``k`` out of range).
    """
    sys, cost = exp_drift_system()
    rng = np.random.default_rng(seed)
    states = rng.uniform(-2.0, 2.0, (count, 2))
    states[: count // 2, 1] = 0.0
    rows = []
    for x in states:
        p = hje_to_cqe(sys, cost, x)
        s = parameterize(p)
        vx = exp_drift_value_gradient(x)
        prm = s.invert(vx)
        row: dict[str, Any] = {
            "state": x,
            "case": s.tag,
            "gradient": vx,
            "residual": abs(float(residual(p, vx))),
            "scale": float(residual_scale(p, vx)),
        }
        if s.tag is CaseTag.OUT_OF_RANGE:
            row.update(level=prm.level, tau=prm.tau)
        else:
            row.update(eps=prm.eps, rho=prm.rho, discriminant=s.case.discriminant)
        rows.append(jsonable(row))
    worst = max(r["residual"] / r["scale"] for r in rows) if rows else 0.0
    return {"system": "exp-drift-2d", "states": rows, "max_relative_residual": worst}


SCENARIOS: dict[str, Callable[..., dict[str, Any]]] = {
    "pd-three-borders": run_pd_three_borders,
    "table-1": run_pd_three_borders,
    "singular-lifted": run_singular_lifted,
    "table-2": run_singular_lifted,
    "hj-sweep": run_hj_sweep,
}


def run_scenario(name: str, **opts: Any) -> dict[str, Any]:
    try:
        fn = SCENARIOS[name]
    except KeyError:
        raise InputError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    out = fn(**opts)
    out["scenario"] = name
    return out
