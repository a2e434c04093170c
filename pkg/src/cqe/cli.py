"""Command-line front end: JSON problem files in, JSON results out.

Usage::

    cqe solve-qp problem.json --pretty
    cqe scenario table-1
    echo '{"kind": "cqe", "payload": {"M": [[1]], "k": [0], "c": -1}}' | cqe solve-cqe -

Exit codes: 0 success; 1 malformed input; 2 the mathematical problem has no
answer of the requested kind (unsolvable, infeasible, unbounded); 3 internal
error.  Every run prints one JSON envelope
``{"version", "command", "status", "result" | "error"}`` on standard output.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Callable, Sequence
from functools import lru_cache
from importlib import resources
from typing import Any

import jsonschema
import numpy as np

from . import errors
from .algorithm import QpProblem, qp_solve
from .equation import CqeProblem, classify, is_solution, level_preimage_set, parameterize, residual, residual_scale
from .hamilton_jacobi import (
    get_system,
    hjbe_from_values,
    hjbe_parameterize,
    hje_cqe_from_values,
    hje_to_cqe,
    hji_to_cqe,
)
from .linalg import nullspace_basis
from .oracles import GridSpec, grid_minimize, nullspace_intersection_dim, scalar_roots
from .qp import CqfSpec, EqCategory, equality_solve, extended_solve, least_norm
from .scenarios import SCENARIOS, run_scenario
from .serialize import (
    case_json,
    eq_outcome_json,
    extended_json,
    jsonable,
    qp_result_json,
    solution_set_json,
)
from .tolerances import DEFAULT_TOLERANCES, Tolerances

SCHEMA_VERSION = "1"

#: subcommand -> problem-file kind
KINDS = {
    "solve-cqe": "cqe",
    "solve-qp": "qp",
    "solve-eq-qp": "eq-qp",
    "solve-ext-qp": "ext-qp",
    "hje": "hje",
    "hjbe": "hjbe",
    "nullspace": "nullspace",
    "least-norm": "least-norm",
    "verify": "verify",
}


class CliOutcome(errors.OutcomeError):
    """Outcome error carrying extra diagnostic fields."""

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.details = details


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict[str, Any]:
    text = resources.files("cqe").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _validate(instance: Any, schema: str) -> None:
    jsonschema.validate(instance, load_schema(schema), cls=jsonschema.Draft202012Validator)


# -- option handling ------------------------------------------------------------


def _tolerances(opts: dict[str, Any]) -> Tolerances:
    return DEFAULT_TOLERANCES.with_(
        rank_rtol=opts.get("tol_rank"),
        membership=opts.get("tol_membership"),
        feasibility=opts.get("tol_feas"),
    )


def _merge_options(file_opts: dict[str, Any], args: argparse.Namespace) -> dict[str, Any]:
    opts = dict(file_opts)
    for key in ("tol_rank", "tol_membership", "tol_feas", "mode", "subset_cap", "samples", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    if getattr(args, "parallel", False):
        opts["parallel"] = True
    return opts


def _cqf(pl: dict[str, Any], tol: Tolerances) -> CqfSpec:
    return CqfSpec(np.array(pl["P"], dtype=float), np.array(pl["q"], dtype=float), float(pl.get("s", 0.0)), tol)


def _matrix(rows: Any, ncols: int) -> np.ndarray:
    a = np.array(rows, dtype=float)
    return a.reshape(0, ncols) if a.size == 0 else a


# -- handlers ---------------------------------------------------------------------


def _solve_cqe(pl: dict[str, Any], opts: dict[str, Any]) -> dict[str, Any]:
    tol = _tolerances(opts)
    p = CqeProblem(np.array(pl["M"], dtype=float), np.array(pl["k"], dtype=float), float(pl["c"]), tol)
    return _cqe_report(p, opts, pl.get("z"), pl.get("level"))


def _cqe_report(p: CqeProblem, opts: dict[str, Any], z: Any = None, level: Any = None) -> dict[str, Any]:
    case = classify(p)
    if not case.solvable:
        raise CliOutcome(
            "the equation has no real solution",
            condition=case.condition,
            discriminant=case.discriminant,
            case=case.tag.value,
        )
    s = parameterize(p)
    out = solution_set_json(s)
    if z is not None:
        z = np.array(z, dtype=float)
        out["z"] = {
            "residual": float(residual(p, z)),
            "scale": float(residual_scale(p, z)),
            "is_solution": bool(is_solution(p, z)),
        }
        if out["z"]["is_solution"]:
            out["z"]["params"] = jsonable(s.invert(z).as_dict())
    if level is not None:
        pre = level_preimage_set(p, float(level))
        out["level_preimage"] = solution_set_json(pre)
    count = int(opts.get("samples", 0) or 0)
    if count:
        rng = np.random.default_rng(int(opts.get("seed", 0)))
        pts = np.atleast_2d(s.evaluate(s.sample(rng, size=count)))
        res = np.abs(residual(p, pts)) / residual_scale(p, pts)
        out["samples"] = {"points": jsonable(pts), "max_relative_residual": float(res.max())}
    return out


def _qp_problem(pl: dict[str, Any], tol: Tolerances) -> QpProblem:
    f = _cqf(pl, tol)
    n = f.n
    a = _matrix(pl.get("A", []), n)
    b = np.array(pl.get("b", []), dtype=float)
    if "ineq" in pl:
        if "C" in pl or "d" in pl:
            raise errors.InputError("give inequalities either as C/d or as ineq, not both")
        c = _matrix([row["c"] for row in pl["ineq"]], n)
        d = np.array([row["d"] for row in pl["ineq"]], dtype=float)
    else:
        c = _matrix(pl.get("C", []), n)
        d = np.array(pl.get("d", []), dtype=float)
    return QpProblem(f, a, b, c, d)


def _solve_qp(pl: dict[str, Any], opts: dict[str, Any]) -> dict[str, Any]:
    prob = _qp_problem(pl, _tolerances(opts))
    kwargs: dict[str, Any] = {"mode": opts.get("mode", "full"), "parallel": bool(opts.get("parallel", False))}
    if opts.get("subset_cap") is not None:
        kwargs["subset_cap"] = int(opts["subset_cap"])
    return qp_result_json(qp_solve(prob, **kwargs))


def _solve_eq_qp(pl: dict[str, Any], opts: dict[str, Any]) -> dict[str, Any]:
    f = _cqf(pl, _tolerances(opts))
    out = equality_solve(f, _matrix(pl["A"], f.n), np.array(pl["b"], dtype=float))
    if out.category in (EqCategory.UNBOUNDED_LP, EqCategory.UNBOUNDED_QP):
        raise CliOutcome(
            "the objective is unbounded below on the feasible set",
            category=out.category.value,
            direction=jsonable(out.direction),
        )
    return eq_outcome_json(out)


def _solve_ext_qp(pl: dict[str, Any], opts: dict[str, Any]) -> dict[str, Any]:
    f = _cqf(pl, _tolerances(opts))
    ext = extended_solve(f)
    out = extended_json(ext)
    if "level" in pl:
        pre = ext.preimage(float(pl["level"]))
        out["level_preimage"] = solution_set_json(pre)
    return out


def _hj_problem(pl: dict[str, Any], tol: Tolerances, allow_slack: bool) -> CqeProblem:
    y = float(pl.get("y", 0.0))
    if y and not allow_slack:
        raise errors.InputError("slack y applies to the HJE only")
    if "system" in pl:
        sys_, cost = get_system(pl["system"])
        return hji_to_cqe(sys_, cost, pl["x"], y, tol) if y else hje_to_cqe(sys_, cost, pl["x"], tol)
    return hje_cqe_from_values(pl["f"], pl["B"], pl["R"], pl["L"], y, tol)


def _hje(pl: dict[str, Any], opts: dict[str, Any]) -> dict[str, Any]:
    p = _hj_problem(pl, _tolerances(opts), allow_slack=True)
    return _cqe_report(p, opts, pl.get("gradient"))


def _hjbe(pl: dict[str, Any], opts: dict[str, Any]) -> dict[str, Any]:
    tol = _tolerances(opts)
    if "y" in pl:
        raise errors.InputError("slack y applies to the HJE only")
    if "system" in pl:
        sys_, cost = get_system(pl["system"])
        s = hjbe_parameterize(sys_, cost, pl["x"], tol)
    else:
        s = hjbe_from_values(pl["f"], pl["B"], pl["R"], pl["L"], tol)
    out: dict[str, Any] = jsonable(
        {
            "full_rank": s.full_rank,
            "rank": s.rank,
            "range_basis": s.u1.T,
            "phi_basis": s.phi_basis.T,
            "f_range": s.f_range,
            "f_null": s.f_null,
        }
    )
    count = int(opts.get("samples", 0) or 0)
    if count:
        rng = np.random.default_rng(int(opts.get("seed", 0)))
        tau, phi = s.sample(rng, size=count)
        v = s.evaluate(tau, phi)
        out["samples"] = {
            "points": jsonable(v),
            "max_relative_residual": float(np.max(np.abs(s.residual(v)) / s.residual_scale(v))),
        }
    if "gradient" in pl:
        v = np.array(pl["gradient"], dtype=float)
        out["gradient"] = {"residual": float(s.residual(v)), "scale": float(s.residual_scale(v))}
    return out


def _nullspace(pl: dict[str, Any], opts: dict[str, Any]) -> dict[str, Any]:
    nb = nullspace_basis(np.array(pl["A"], dtype=float), tol=_tolerances(opts))
    return jsonable({"v2": nb.v2.T, "pinv": nb.pinv, "singular_values": nb.singular_values})


def _least_norm(pl: dict[str, Any], opts: dict[str, Any]) -> dict[str, Any]:
    out = least_norm(np.array(pl["A"], dtype=float), np.array(pl["b"], dtype=float))
    return jsonable({"x": out.x_particular, "value": out.value})


def _verify(pl: dict[str, Any], opts: dict[str, Any]) -> dict[str, Any]:
    oracle = pl["oracle"]
    if oracle == "scalar-roots":
        return {"roots": scalar_roots(pl["m"], pl["k"], pl["c"])}
    if oracle == "nullspace-intersection":
        return {"dimension": nullspace_intersection_dim(pl["A"], pl["P"])}
    prob = _qp_problem({k: pl[k] for k in ("P", "q", "s", "A", "b", "C", "d") if k in pl}, _tolerances(opts))
    step = float(pl.get("step", 1e-3))
    out: dict[str, Any] = {}
    if oracle == "qp-grid":
        res = qp_solve(prob)
        out["qp_value"] = res.l_tilde_star
        pts = np.array([e.point for e in res.ledger])
        grid = GridSpec.around(pts, step)
    else:
        if "lower" not in pl or "upper" not in pl:
            raise errors.InputError("the grid oracle needs lower and upper")
        grid = GridSpec(pl["lower"], pl["upper"], step)
    g = grid_minimize(prob.f, grid, prob.a, prob.b, prob.c, prob.d)
    out.update(
        grid_value=g.value,
        value_tol=g.value_tol,
        feasible_points=g.feasible_count,
        argmin_count=int(g.argmins.shape[0]),
        argmin_hull=[g.argmins.min(axis=0).tolist(), g.argmins.max(axis=0).tolist()],
        lower=grid.lower.tolist(),
        upper=grid.upper.tolist(),
    )
    if oracle == "qp-grid":
        out["difference"] = abs(out["qp_value"] - g.value)
    return jsonable(out)


HANDLERS: dict[str, Callable[[dict[str, Any], dict[str, Any]], dict[str, Any]]] = {
    "solve-cqe": _solve_cqe,
    "solve-qp": _solve_qp,
    "solve-eq-qp": _solve_eq_qp,
    "solve-ext-qp": _solve_ext_qp,
    "hje": _hje,
    "hjbe": _hjbe,
    "nullspace": _nullspace,
    "least-norm": _least_norm,
    "verify": _verify,
}


# -- plumbing ---------------------------------------------------------------------


def _read_problem(path: str) -> dict[str, Any]:
    try:
        if path == "-":
            text = sys.stdin.read()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        return json.loads(text)
    except OSError as exc:
        raise errors.InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise errors.InputError(f"invalid JSON: {exc}") from exc


def _dispatch(args: argparse.Namespace) -> dict[str, Any]:
    cmd = args.command
    if cmd == "scenario":
        opts: dict[str, Any] = {}
        if args.b is not None:
            opts["b"] = args.b
        if args.count is not None:
            opts["count"] = args.count
        if args.seed is not None:
            opts["seed"] = args.seed
        solve_opts = _merge_options({}, args)
        if args.name != "hj-sweep":
            for key in ("mode", "subset_cap"):
                if key in solve_opts:
                    opts[key] = solve_opts[key]
            if solve_opts.get("parallel"):
                opts["parallel"] = True
        return run_scenario(args.name, **opts)
    doc = _read_problem(args.input)
    try:
        _validate(doc, "problem")
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise errors.InputError(f"schema violation at {where}: {exc.message}") from exc
    if doc["kind"] != KINDS[cmd]:
        raise errors.InputError(f"{cmd} expects kind {KINDS[cmd]!r}, got {doc['kind']!r}")
    opts = _merge_options(doc.get("options", {}), args)
    return HANDLERS[cmd](doc["payload"], opts)


def _error(exc: BaseException) -> tuple[int, dict[str, Any]]:
    if isinstance(exc, errors.InputError):
        code = 1
    elif isinstance(exc, errors.OutcomeError):
        code = 2
    else:
        code = 3
    body: dict[str, Any] = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, CliOutcome):
        body.update(exc.details)
        body["type"] = "Unsolvable" if "condition" in exc.details else "Unbounded"
    direction = getattr(exc, "direction", None)
    if direction is not None:
        body["direction"] = jsonable(direction)
    return code, jsonable(body)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cqe", description=__doc__.split("\n\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-rank", type=float, dest="tol_rank", help="relative singular-value cutoff")
    common.add_argument("--tol-membership", type=float, dest="tol_membership", help="range-membership tolerance")
    common.add_argument("--tol-feas", type=float, dest="tol_feas", help="inequality feasibility tolerance")
    common.add_argument("--subset-cap", type=int, dest="subset_cap", help="largest number of inequalities to enumerate")
    common.add_argument("--mode", choices=["full", "expedited"], help="QP solver mode")
    common.add_argument("--parallel", action="store_true", help="evaluate constraint subsets in a thread pool")
    common.add_argument("--samples", type=int, help="number of random solutions to report")
    common.add_argument("--seed", type=int, help="seed for sampling")
    common.add_argument("--pretty", action="store_true", help="indent the JSON output")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in KINDS:
        sp = sub.add_parser(cmd, parents=[common], help=f"{KINDS[cmd]} problem file")
        sp.add_argument("input", help="problem file, or - for standard input")
    sp = sub.add_parser("scenario", parents=[common], help="run a built-in worked example")
    sp.add_argument("name", choices=sorted(SCENARIOS))
    sp.add_argument("--b", type=float, help="right-hand side of x3 = b (singular-lifted)")
    sp.add_argument("--count", type=int, help="number of states (hj-sweep)")
    return parser


def run(argv: Sequence[str] | None = None, stdout=None) -> int:
    """Run the CLI and return the exit code; JSON goes to ``stdout``."""
    stdout = sys.stdout if stdout is None else stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    envelope: dict[str, Any] = {"version": SCHEMA_VERSION, "command": args.command}
    try:
        envelope["status"] = "ok"
        envelope["result"] = _dispatch(args)
        code = 0
    except Exception as exc:  # noqa: BLE001 - every failure becomes a JSON diagnostic
        code, body = _error(exc)
        envelope = {"version": SCHEMA_VERSION, "command": args.command, "status": "error", "error": body}
        print(f"cqe: {body['type']}: {body['message']}", file=sys.stderr)
    try:
        _validate(envelope, "result")
        text = json.dumps(envelope, indent=2 if args.pretty else None, allow_nan=False)
    except (jsonschema.ValidationError, ValueError) as exc:
        code = 3
        envelope = {
            "version": SCHEMA_VERSION,
            "command": args.command,
            "status": "error",
            "error": {"type": "SolverFailure", "message": f"invalid output: {exc}", "exit_code": 3},
        }
        text = json.dumps(envelope)
    print(text, file=stdout)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
