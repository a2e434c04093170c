"""Closed-form solver for convex QPs with equality and inequality constraints.

Problem::

    minimize    F(x) = x^T P x / 2 + q^T x + s
    subject to  A x = b,   c_i^T x <= d_i  (i = 1..kappa)

No feasible starting point is needed.  The solver first solves the
equality-only problem.  If its optimum is unique and feasible it is the
answer.  Otherwise every nonempty subset ``I_j`` of inequality indices is
treated as a set of active borders: the augmented system
``[A; C_j] x = [b; d_j]`` is solved in closed form, as an equality QP when
it has freedom left ("edge") or as a single point when it pins ``x`` down
("vertex").  Feasible results form a candidate ledger whose minimum is the
optimal value.  The work is ``O(2^kappa)`` equality solves, hence the
subset cap.

Subsets are labelled with 1-based constraint indices, e.g. ``(1, 3)``.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

from .errors import (
    DimensionMismatch,
    InfeasibleProblem,
    InvalidParams,
    NotPositiveDefinite,
    SolverFailure,
    SubsetCapExceeded,
    UnboundedProblem,
)
from .linalg import Array, as_matrix, as_vector, nullspace_basis, numerical_rank, solve_consistent
from .qp import CqfSpec, EqCategory, EqQpOutcome, reduced_solve, reduced_decompose

Subset = tuple[int, ...]
Kind = Literal["equality-base", "edge", "vertex", "constant-face"]

DEFAULT_SUBSET_CAP = 20


@dataclass(frozen=True)
class QpProblem:
    """``min F`` subject to ``A x = b`` and ``C x <= d`` (rows ``c_i^T``)."""

    f: CqfSpec
    a: Array | None = None
    b: Array | None = None
    c: Array | None = None
    d: Array | None = None

    def __post_init__(self) -> None:
        n = self.f.n
        a = np.zeros((0, n)) if self.a is None or np.size(self.a) == 0 else as_matrix(self.a, "A", (None, n))
        if self.b is None or np.size(self.b) == 0:
            if a.shape[0]:
                raise DimensionMismatch("b is required when A is given")
            b = np.zeros(0)
        else:
            b = as_vector(self.b, "b", a.shape[0])
        c = np.zeros((0, n)) if self.c is None or np.size(self.c) == 0 else as_matrix(self.c, "C", (None, n))
        if self.d is None or np.size(self.d) == 0:
            if c.shape[0]:
                raise DimensionMismatch("d is required when C is given")
            d = np.zeros(0)
        else:
            d = as_vector(self.d, "d", c.shape[0])
        for name, val in (("A", a), ("b", b), ("C", c), ("d", d)):
            object.__setattr__(self, name.lower(), val)

    @classmethod
    def from_ineq(
        cls,
        f: CqfSpec,
        ineq: Iterable[tuple[ArrayLike, float]],
        a: ArrayLike | None = None,
        b: ArrayLike | None = None,
    ) -> "QpProblem":
        """Build from a list of ``(c_i, d_i)`` pairs."""
        pairs = list(ineq)
        c = np.array([np.asarray(ci, dtype=float) for ci, _ in pairs]).reshape(len(pairs), f.n)
        d = np.array([float(di) for _, di in pairs])
        return cls(f, a, b, c, d)

    @property
    def n(self) -> int:
        return self.f.n

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def kappa(self) -> int:
        return self.c.shape[0]

    def slack_tolerance(self, x: Array) -> Array:
        """Per-constraint tolerance ``feas * max(1, ||c_i|| ||x||, |d_i|)``."""
        cn = np.linalg.norm(self.c, axis=1)
        return self.f.tol.feasibility * np.maximum.reduce(
            [np.ones_like(self.d), cn * np.linalg.norm(x), np.abs(self.d)]
        )

    def violations(self, x: ArrayLike, skip: Subset = ()) -> Array:
        """Indices (0-based) of inequality constraints violated at ``x``."""
        x = np.asarray(x, dtype=float)
        bad = self.c @ x - self.d > self.slack_tolerance(x)
        if skip:
            bad[[i - 1 for i in skip]] = False
        return np.flatnonzero(bad)

    def is_feasible(self, x: ArrayLike, skip: Subset = ()) -> bool:
        """Inequality feasibility of ``x``, ignoring the 1-based indices in ``skip``."""
        return self.violations(x, skip).size == 0

    def equality_residual(self, x: ArrayLike) -> float:
        if self.m == 0:
            return 0.0
        return float(np.linalg.norm(self.a @ np.asarray(x, dtype=float) - self.b))

    def augmented(self, subset: Subset) -> tuple[Array, Array]:
        """``(A~, b~)``: equality rows followed by the borders in ``subset``."""
        rows = [i - 1 for i in subset]
        return np.vstack([self.a, self.c[rows]]), np.concatenate([self.b, self.d[rows]])


@dataclass(frozen=True)
class LedgerEntry:
    value: float
    point: Array
    subset: Subset
    kind: Kind


@dataclass(frozen=True)
class CandidateLedger:
    """Feasible candidates ``(value, point, subset, kind)`` in subset order."""

    entries: tuple[LedgerEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def values(self) -> Array:
        return np.array([e.value for e in self.entries])


@dataclass(frozen=True)
class SubsetTrace:
    """What happened at one subset; reproduces one row of a summary table.

    ``status`` is one of ``inconsistent``, ``rank-deficient``, ``edge`` or
    ``vertex``; ``category`` is the equality-QP category for edges.
    """

    subset: Subset
    a_tilde: Array
    b_tilde: Array
    status: str
    category: EqCategory | None = None
    v2: Array | None = None
    reduced_hessian: Array | None = None
    unique: bool | None = None
    point: Array | None = None
    value: float | None = None
    candidate: bool = False
    reserve_point: Array | None = None
    reserve_value: float | None = None


@dataclass(frozen=True)
class QpSolveResult:
    """Optimal value, terminal optima and the subsets that produced them.

    ``optimality`` lists every tied ledger entry (value, point, subset);
    ``terminal_optima`` are the distinct points among them and
    ``optimality_subsets`` the distinct subsets.
    """

    l_tilde_star: float
    terminal_optima: list[Array]
    optimality_subsets: list[Subset]
    ledger: CandidateLedger
    expedited: bool
    optimality: list[LedgerEntry] = field(default_factory=list)
    base: EqQpOutcome | None = None
    trace: list[SubsetTrace] = field(default_factory=list)

    @property
    def x_tilde_star(self) -> Array:
        return self.terminal_optima[0]


def subset_key(subset: Subset) -> tuple[int, Subset]:
    return (len(subset), subset)


def all_subsets(kappa: int) -> list[Subset]:
    """Nonempty subsets of ``{1..kappa}`` by size, then lexicographically."""
    return [s for k in range(1, kappa + 1) for s in itertools.combinations(range(1, kappa + 1), k)]


# -- per-subset evaluation --------------------------------------------------------


def _evaluate_subset(prob: QpProblem, subset: Subset, pd: bool) -> SubsetTrace:
    f, tol = prob.f, prob.f.tol
    a_t, b_t = prob.augmented(subset)
    x_ls, consistent = solve_consistent(a_t, b_t, tol.consistency)
    if not consistent:
        return SubsetTrace(subset, a_t, b_t, "inconsistent")
    rows = a_t.shape[0]
    rank = numerical_rank(a_t, tol.rank_rtol)
    if rank == rows < prob.n:
        nb = nullspace_basis(a_t, tol=tol)
        v2, a_pinv = np.asarray(nb.v2), np.asarray(nb.pinv)
        x0 = a_pinv @ b_t
        if pd:
            out = _pd_reduced_solve(f, v2, a_pinv, x0)
        else:
            out = reduced_solve(f, v2, a_pinv, x0)
        base = dict(category=out.category, v2=v2, reduced_hessian=out.reduced_hessian)
        if out.category is EqCategory.CONSTANT:
            # flat along this border: its terminal optima are picked up at
            # supersets; a feasible particular point is kept in reserve for
            # faces that have no vertex (lineality)
            x = out.x_particular
            if prob.is_feasible(x, skip=subset):
                return SubsetTrace(subset, a_t, b_t, "edge", **base, reserve_point=x, reserve_value=out.value)
            return SubsetTrace(subset, a_t, b_t, "edge", **base)
        if out.category is not EqCategory.FINITE_QP:
            # unbounded along this border: cut off at supersets, or detected by
            # the recession check
            return SubsetTrace(subset, a_t, b_t, "edge", **base)
        x = out.x_particular
        ok = prob.is_feasible(x, skip=subset)
        return SubsetTrace(
            subset, a_t, b_t, "edge", **base, unique=out.unique, point=x, value=out.value, candidate=ok
        )
    if rank == prob.n:
        x = x_ls
        ok = prob.is_feasible(x, skip=subset)
        return SubsetTrace(subset, a_t, b_t, "vertex", point=x, value=f.value(x), candidate=ok)
    return SubsetTrace(subset, a_t, b_t, "rank-deficient")


def _pd_reduced_solve(f: CqfSpec, v2: Array, a_pinv: Array, x0: Array) -> EqQpOutcome:
    """Reduced solve when ``P > 0``: ``V2^T P V2`` is invertible, no range tests."""
    h = v2.T @ f.p @ v2
    y = -np.linalg.solve(h, v2.T @ (f.q + f.p @ x0)) if v2.shape[1] else np.zeros(0)
    x = x0 + v2 @ y
    return EqQpOutcome(
        EqCategory.FINITE_QP, f.value(x), x, np.zeros((f.n, 0)), True, None, v2, a_pinv, h
    )


# -- reduction ------------------------------------------------------------------------


def _ties(prob: QpProblem, ledger: CandidateLedger) -> tuple[float, list[LedgerEntry]]:
    values = ledger.values
    best = float(values.min())
    thresh = prob.f.tol.tie * max(1.0, abs(best))
    tied = [e for e in ledger if e.value - best <= thresh]
    return best, tied


def _same_point(x: Array, y: Array, tol: float) -> bool:
    return bool(np.linalg.norm(x - y) <= tol * max(1.0, float(np.linalg.norm(x))))


def _finalize(
    prob: QpProblem,
    entries: list[LedgerEntry],
    expedited: bool,
    base: EqQpOutcome | None,
    trace: list[SubsetTrace],
) -> QpSolveResult:
    if not entries:
        raise InfeasibleProblem("no feasible candidate was found: the problem is infeasible or unbounded below")
    entries = sorted(entries, key=lambda e: subset_key(e.subset))
    ledger = CandidateLedger(tuple(entries))
    best, tied = _ties(prob, ledger)
    terminal: list[Array] = []
    firsts: list[Subset] = []
    tol = 100 * prob.f.tol.feasibility
    for e in tied:
        if not any(_same_point(e.point, t, tol) for t in terminal):
            terminal.append(e.point)
            firsts.append(e.subset)
    order = sorted(range(len(terminal)), key=lambda i: (subset_key(firsts[i]), tuple(terminal[i])))
    subsets = sorted({e.subset for e in tied}, key=subset_key)
    trace = sorted(trace, key=lambda t: subset_key(t.subset))
    return QpSolveResult(
        l_tilde_star=best,
        terminal_optima=[terminal[i] for i in order],
        optimality_subsets=subsets,
        ledger=ledger,
        expedited=expedited,
        optimality=tied,
        base=base,
        trace=trace,
    )


def _enumerate(
    prob: QpProblem,
    subsets: Sequence[Subset],
    pd: bool,
    parallel: bool | int,
) -> list[SubsetTrace]:
    if parallel and len(subsets) > 1:
        workers = None if parallel is True else int(parallel)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda s: _evaluate_subset(prob, s, pd), subsets))
    return [_evaluate_subset(prob, s, pd) for s in subsets]


def _check_order(order: Sequence[Subset] | None, kappa: int) -> list[Subset]:
    subsets = all_subsets(kappa)
    if order is None:
        return subsets
    order = [tuple(int(i) for i in s) for s in order]
    if sorted(order, key=subset_key) != subsets:
        raise InvalidParams("order must be a permutation of all nonempty constraint subsets")
    return order


def _run(
    prob: QpProblem,
    base: EqQpOutcome,
    base_pd: bool,
    mode: str,
    subset_cap: int,
    parallel: bool | int,
    order: Sequence[Subset] | None,
    pd: bool,
) -> QpSolveResult:
    if mode not in ("full", "expedited"):
        raise InvalidParams(f"mode must be 'full' or 'expedited', got {mode!r}")
    entries: list[LedgerEntry] = []
    if base.category is EqCategory.FINITE_QP and prob.is_feasible(base.x_particular):
        entry = LedgerEntry(float(base.value), base.x_particular, (), "equality-base")
        if base_pd or mode == "expedited":
            return _finalize(prob, [entry], True, base, [])
        entries.append(entry)
    if prob.kappa > subset_cap:
        raise SubsetCapExceeded(
            f"{prob.kappa} inequality constraints need 2^{prob.kappa} subset solves; "
            f"the cap is {subset_cap} (raise subset_cap to proceed)"
        )
    trace = _enumerate(prob, _check_order(order, prob.kappa), pd, parallel)
    for t in trace:
        if t.candidate:
            entries.append(LedgerEntry(float(t.value), t.point, t.subset, "edge" if t.status == "edge" else "vertex"))
    reserve = [t for t in trace if t.reserve_point is not None]
    if base.category is EqCategory.CONSTANT and prob.is_feasible(base.x_particular):
        reserve.insert(0, SubsetTrace((), prob.a, prob.b, "edge", reserve_point=base.x_particular, reserve_value=base.value))
    entries.extend(_reserve_entries(prob, entries, reserve))
    if not pd:
        _check_recession(prob)
    if not entries:
        if not _polyhedron_nonempty(prob):
            raise InfeasibleProblem("the problem is infeasible: the constraints admit no feasible point")
        raise SolverFailure("the feasible set is nonempty but no candidate was produced")
    return _finalize(prob, entries, False, base, trace)


def _reserve_entries(prob: QpProblem, entries: list[LedgerEntry], reserve: list[SubsetTrace]) -> list[LedgerEntry]:
    """Constant-face points that beat every regular candidate.

    Normally the terminal optima of a flat face appear at its supersets and
    the reserve is unused.  When the face contains no vertex (the feasible set
    has a lineality direction along it) those supersets do not exist.
    """
    if not reserve:
        return []
    best = min((e.value for e in entries), default=np.inf)
    thresh = prob.f.tol.tie * max(1.0, abs(best)) if np.isfinite(best) else 0.0
    return [
        LedgerEntry(float(t.reserve_value), t.reserve_point, t.subset, "constant-face")
        for t in reserve
        if t.reserve_value < best - thresh
    ]


def _recession_basis(prob: QpProblem) -> Array:
    """Orthonormal basis of ``N(A) cap N(P)``."""
    stacked = np.vstack([prob.a, prob.f.p])
    _, sv, vt = np.linalg.svd(stacked)
    smax = sv[0] if sv.size else 0.0
    cutoff = prob.f.tol.rank_cutoff(prob.n) * max(smax, 1.0) * 10
    rank = int(np.count_nonzero(sv > cutoff))
    return vt[rank:].T


def _check_recession(prob: QpProblem) -> None:
    """Raise :class:`UnboundedProblem` if the objective decreases along a feasible ray.

    A convex quadratic on a nonempty polyhedron is unbounded below iff some
    ``d`` with ``A d = 0``, ``P d = 0``, ``C d <= 0`` has ``q^T d < 0``.  The
    ray search is a small linear program over a box.
    """
    z = _recession_basis(prob)
    if z.shape[1] == 0:
        return
    from scipy.optimize import linprog

    obj = z.T @ prob.f.q
    qscale = max(1.0, float(np.linalg.norm(prob.f.q)))
    if np.linalg.norm(obj) <= prob.f.tol.membership * qscale:
        return
    cz = prob.c @ z
    res = linprog(
        obj,
        A_ub=cz if cz.size else None,
        b_ub=np.zeros(cz.shape[0]) if cz.size else None,
        bounds=[(-1.0, 1.0)] * z.shape[1],
        method="highs",
    )
    if res.status == 0 and res.fun < -1e-8 * qscale:
        d = z @ res.x
        if _polyhedron_nonempty(prob):
            raise UnboundedProblem("the objective is unbounded below on the feasible set", d / np.linalg.norm(d))


def _polyhedron_nonempty(prob: QpProblem) -> bool:
    from scipy.optimize import linprog

    if prob.kappa == 0:
        return True
    res = linprog(
        np.zeros(prob.n),
        A_ub=prob.c,
        b_ub=prob.d,
        A_eq=prob.a if prob.m else None,
        b_eq=prob.b if prob.m else None,
        bounds=[(None, None)] * prob.n,
        method="highs",
    )
    return res.status == 0


def _base(prob: QpProblem) -> EqQpOutcome:
    nb = nullspace_basis(prob.a, tol=prob.f.tol)
    v2, a_pinv = np.asarray(nb.v2), np.asarray(nb.pinv)
    return reduced_solve(prob.f, v2, a_pinv, a_pinv @ prob.b)


def _base_is_pd(prob: QpProblem, base: EqQpOutcome) -> bool:
    if base.category is not EqCategory.FINITE_QP:
        return False
    h = base.reduced_hessian
    return h.shape[0] == 0 or reduced_decompose(h, prob.f).full_rank


def qp_solve(
    prob: QpProblem,
    mode: str = "full",
    *,
    subset_cap: int = DEFAULT_SUBSET_CAP,
    parallel: bool | int = False,
    order: Sequence[Subset] | None = None,
) -> QpSolveResult:
    """Solve the QP by enumerating active-border subsets.

    Parameters
    ----------
    prob:
        The problem; ``A`` must have full row rank.
    mode:
        ``"full"`` finds every terminal optimum.  ``"expedited"`` returns as
        soon as the equality-only optimum is finite and feasible, even if it is
        not unique (the optimal value is still exact).
    subset_cap:
        Largest number of inequality constraints for which enumeration is
        attempted.
    parallel:
        Evaluate subsets in a thread pool (``True`` or a worker count).
        Results are identical to sequential execution.
    order:
        Optional processing order (a permutation of all nonempty subsets);
        the result does not depend on it.

    Raises
    ------
    InfeasibleProblem
        If no feasible candidate exists.
    SubsetCapExceeded, RankDeficientRows
    """
    base = _base(prob)
    return _run(prob, base, _base_is_pd(prob, base), mode, subset_cap, parallel, order, pd=False)


def qp_solve_pd(
    prob: QpProblem,
    mode: str = "full",
    *,
    subset_cap: int = DEFAULT_SUBSET_CAP,
    parallel: bool | int = False,
    order: Sequence[Subset] | None = None,
) -> QpSolveResult:
    """:func:`qp_solve` specialised to ``P > 0``: all rank and range tests drop out.

    Each reduced Hessian is invertible, so every equality solve is one
    linear solve and every optimum is unique.
    """
    sd = prob.f.sd
    if not sd.full_rank:
        raise NotPositiveDefinite("P must be positive definite")
    nb = nullspace_basis(prob.a, tol=prob.f.tol)
    v2, a_pinv = np.asarray(nb.v2), np.asarray(nb.pinv)
    base = _pd_reduced_solve(prob.f, v2, a_pinv, a_pinv @ prob.b)
    return _run(prob, base, True, mode, subset_cap, parallel, order, pd=True)


def qp_solve_ineq_only(
    f: CqfSpec,
    ineq: Iterable[tuple[ArrayLike, float]],
    mode: str = "full",
    **kwargs,
) -> QpSolveResult:
    """Inequality constraints only: the base stage is the unconstrained solve."""
    prob = QpProblem.from_ineq(f, ineq)
    if prob.kappa < 1:
        raise InvalidParams("at least one inequality constraint is required")
    return qp_solve(prob, mode, **kwargs)
