"""Conversion of solver results to JSON-compatible structures.

Floats are left as Python floats, so :mod:`json` writes them in shortest
round-trip form.  Non-finite values become ``null``.
"""

from __future__ import annotations

import enum
import math
from typing import Any

import numpy as np

from .algorithm import CandidateLedger, LedgerEntry, QpSolveResult, SubsetTrace
from .equation import CqeCase, CqeSolutionSet
from .qp import EqQpOutcome, ExtendedOutcome, UnconstrainedOutcome


def jsonable(obj: Any) -> Any:
    """Recursively convert numpy arrays/scalars, enums and tuples."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        val = float(obj)
        return val if math.isfinite(val) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def case_json(case: CqeCase) -> dict[str, Any]:
    return jsonable(
        {
            "case": case.tag,
            "solvable": case.solvable,
            "discriminant": case.discriminant,
            "boundary": case.boundary,
            "rank": case.rank,
            "k_in_range": case.k_in_range,
            "condition": case.condition,
        }
    )


def solution_set_json(s: CqeSolutionSet) -> dict[str, Any]:
    out = case_json(s.case)
    out.update(
        jsonable(
            {
                "center": s.center,
                "radius": s.radius,
                "range_basis": s.sd.u1.T,
                "null_basis": s.sd.u2.T,
            }
        )
    )
    if s.split.out_norm > 0:
        out["k_out_of_range"] = jsonable(s.split.out_of_range)
    return out


def unconstrained_json(o: UnconstrainedOutcome) -> dict[str, Any]:
    return jsonable(
        {
            "bounded": o.bounded,
            "l_star": o.l_star,
            "x_particular": o.x_particular,
            "freedom_basis": o.freedom_basis.T,
            "direction": o.direction,
        }
    )


def eq_outcome_json(o: EqQpOutcome) -> dict[str, Any]:
    return jsonable(
        {
            "category": o.category,
            "value": o.value,
            "x_particular": o.x_particular,
            "freedom_basis": o.freedom_basis.T,
            "unique": o.unique,
            "direction": o.direction,
        }
    )


def extended_json(o: ExtendedOutcome) -> dict[str, Any]:
    return jsonable({"l_check_star": o.l_check_star, "x_hat_star": o.x_hat_star})


def entry_json(e: LedgerEntry) -> dict[str, Any]:
    return jsonable({"value": e.value, "point": e.point, "subset": list(e.subset), "kind": e.kind})


def ledger_json(ledger: CandidateLedger) -> list[dict[str, Any]]:
    return [entry_json(e) for e in ledger]


def trace_json(t: SubsetTrace) -> dict[str, Any]:
    return jsonable(
        {
            "subset": list(t.subset),
            "status": t.status,
            "category": t.category,
            "a_tilde": t.a_tilde,
            "b_tilde": t.b_tilde,
            "v2_tilde": None if t.v2 is None else t.v2.T,
            "reduced_hessian": t.reduced_hessian,
            "unique": t.unique,
            "point": t.point,
            "value": t.value,
            "candidate": t.candidate,
        }
    )


def qp_result_json(r: QpSolveResult, include_trace: bool = True) -> dict[str, Any]:
    out: dict[str, Any] = {
        "value": jsonable(r.l_tilde_star),
        "optima": jsonable(r.terminal_optima),
        "subsets": [list(s) for s in r.optimality_subsets],
        "optimality": [entry_json(e) for e in r.optimality],
        "ledger": ledger_json(r.ledger),
        "expedited": r.expedited,
    }
    if r.base is not None:
        out["base"] = eq_outcome_json(r.base)
    if include_trace:
        out["trace"] = [trace_json(t) for t in r.trace]
    return out
