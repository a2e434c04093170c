"""Closed-form quadratic programs built on quadratic-equation preimages.

The objective throughout is the convex quadratic function
``F(x) = x^T P x / 2 + q^T x + s`` (:class:`CqfSpec`).

* :func:`unconstrained_solve` -- bounded iff ``q in R(P)``; then
  ``l* = s - q^T P^+ q / 2`` attained on ``-P^+ q + N(P)``.
* :func:`level_preimage` -- ``{x : F(x) = l}`` as a CQE solution set.
* :func:`equality_solve` -- ``min F`` subject to ``A x = b`` via the
  null-space substitution ``x = A^+ b + V2 y``; the reduced problem is an
  unconstrained QP, an unbounded LP or a constant.
* :func:`extended_solve` -- the problem restricted to ``x in R(P)``.
* :func:`kkt_residual` -- independent optimality check.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike

from .equation import CqeProblem, CqeSolutionSet, classify, level_preimage_set, parameterize
from .errors import InconsistentConstraint, LevelBelowMinimum, NonFinite, QNotInRange, RankDeficientRows
from .linalg import (
    Array,
    SpectralData,
    as_matrix,
    as_vector,
    canonicalize_signs,
    nullspace_basis,
    pseudoinverse,
    solve_consistent,
    spectral_decompose,
    symmetrize,
)
from .tolerances import DEFAULT_TOLERANCES, Tolerances


@dataclass(frozen=True)
class CqfSpec:
    """Convex quadratic function ``F(x) = x^T P x / 2 + q^T x + s``."""

    p: Array
    q: Array
    s: float = 0.0
    tol: Tolerances = field(default=DEFAULT_TOLERANCES, compare=False, repr=False)

    def __post_init__(self) -> None:
        p = symmetrize(self.p, self.tol.symmetry, "P")
        q = as_vector(self.q, "q", p.shape[0])
        s = float(self.s)
        if not np.isfinite(s):
            raise NonFinite("s must be finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "s", s)
        _ = self.sd  # validates PSD eagerly

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @cached_property
    def sd(self) -> SpectralData:
        return spectral_decompose(self.p, tol=self.tol)

    @cached_property
    def p_norm(self) -> float:
        return self.sd.sigma_max

    def value(self, x: ArrayLike) -> float | Array:
        x = np.asarray(x, dtype=float)
        val = 0.5 * np.einsum("...i,ij,...j->...", x, self.p, x) + x @ self.q + self.s
        return float(val) if np.ndim(val) == 0 else val

    def gradient(self, x: ArrayLike) -> Array:
        return np.asarray(x, dtype=float) @ self.p + self.q

    def value_scale(self, x: ArrayLike) -> float:
        """``max(1, ||P|| ||x||^2, ||q|| ||x||, |s|)``, the yardstick for value comparisons."""
        xn = float(np.linalg.norm(x))
        return max(1.0, self.p_norm * xn * xn, float(np.linalg.norm(self.q)) * xn, abs(self.s))


def reduced_decompose(h: Array, f: CqfSpec) -> SpectralData:
    """Decompose a reduced Hessian ``V^T P V`` with a cutoff tied to ``||P||``.

    ``V^T P V`` inherits rounding errors of order ``n eps ||P||`` from ``P``, so
    its rank is judged against ``10 n eps ||P||`` as well as its own largest
    eigenvalue.
    """
    atol = 10.0 * f.tol.rank_cutoff(f.n) * f.p_norm
    return spectral_decompose(h, atol=atol, tol=f.tol)


# -- unconstrained ------------------------------------------------------------


@dataclass(frozen=True)
class UnconstrainedOutcome:
    """Result of ``min F(x)`` over ``R^n``.

    ``direction`` is a descent ray (``F -> -inf`` along it) when unbounded.
    """

    bounded: bool
    l_star: float | None
    x_particular: Array
    freedom_basis: Array
    direction: Array | None = None


def unconstrained_solve(f: CqfSpec) -> UnconstrainedOutcome:
    """``l* = s - q^T P^+ q / 2`` at ``x = -P^+ q`` (plus ``N(P)``) iff ``q in R(P)``."""
    sd = f.sd
    pinv = pseudoinverse(sd)
    q_out = sd.u2 @ (sd.u2.T @ f.q)
    bounded = np.linalg.norm(q_out) <= f.tol.membership * max(1.0, float(np.linalg.norm(f.q)))
    xp = -pinv @ f.q
    freedom = canonicalize_signs(np.asarray(sd.u2))
    if not bounded:
        return UnconstrainedOutcome(False, None, xp, freedom, -q_out / np.linalg.norm(q_out))
    return UnconstrainedOutcome(True, float(f.s - f.q @ pinv @ f.q / 2.0), xp, freedom)


def level_preimage(f: CqfSpec, level: float) -> CqeSolutionSet:
    """All ``x`` with ``F(x) = level``: the CQE ``x^T (P/2) x + q^T x + (s - level) = 0``."""
    p = CqeProblem(f.p / 2.0, f.q, f.s - float(level), f.tol)
    case = classify(p)
    if not case.solvable:
        raise LevelBelowMinimum(f"level {level:.6g} is below the minimum of F")
    return parameterize(p)


# -- equality constrained ----------------------------------------------------


class EqCategory(str, enum.Enum):
    FINITE_QP = "FiniteQp"
    UNBOUNDED_QP = "UnboundedQp"
    UNBOUNDED_LP = "UnboundedLp"
    CONSTANT = "Constant"


@dataclass(frozen=True)
class EqQpOutcome:
    """Result of ``min F(x)`` subject to ``A x = b``.

    Attributes
    ----------
    category:
        Finite QP, unbounded QP, unbounded LP or constant objective.
    value:
        Optimal value (finite QP) or the constant value.
    x_particular:
        The particular optimum ``A^+ b - V2 H^+ V2^T (q + P A^+ b)`` (finite QP)
        or ``A^+ b`` (other categories).
    freedom_basis:
        Orthonormal directions along which the optimum may move (``V2`` times
        a basis of ``N(H)``; all of ``V2`` for the constant case).
    unique:
        True iff ``N(A) cap N(P) = {0}`` (finite QP only).
    direction:
        Feasible descent ray for the unbounded categories.
    v2, a_pinv, reduced_hessian:
        ``V2``, ``A^+`` and ``H = V2^T P V2``.
    """

    category: EqCategory
    value: float | None
    x_particular: Array
    freedom_basis: Array
    unique: bool
    direction: Array | None
    v2: Array
    a_pinv: Array
    reduced_hessian: Array

    @property
    def finite(self) -> bool:
        return self.category in (EqCategory.FINITE_QP, EqCategory.CONSTANT)


def _check_rows(a: Array, b: Array, tol: Tolerances) -> None:
    _, ok = solve_consistent(a, b, tol.consistency)
    if not ok:
        raise InconsistentConstraint("b is not in the range of A")


def equality_solve(f: CqfSpec, a: ArrayLike, b: ArrayLike) -> EqQpOutcome:
    """Minimize ``F`` over ``{x : A x = b}`` for full-row-rank ``A`` (``m <= n``)."""
    a = as_matrix(a, "A", (None, f.n))
    b = as_vector(b, "b", a.shape[0])
    tol = f.tol
    try:
        nb = nullspace_basis(a, tol=tol)
    except RankDeficientRows:
        _check_rows(a, b, tol)
        raise
    v2, a_pinv = np.asarray(nb.v2), np.asarray(nb.pinv)
    x0 = a_pinv @ b
    return reduced_solve(f, v2, a_pinv, x0)


def reduced_solve(f: CqfSpec, v2: Array, a_pinv: Array, x0: Array) -> EqQpOutcome:
    """Solve the reduced problem ``min F(x0 + V2 y)``."""
    n, k = v2.shape
    tol = f.tol
    h = v2.T @ f.p @ v2
    if k == 0:
        return EqQpOutcome(EqCategory.FINITE_QP, f.value(x0), x0, np.zeros((n, 0)), True, None, v2, a_pinv, h)
    hsd = reduced_decompose(h, f)
    grad = f.q + f.p @ x0
    g = v2.T @ grad
    gscale = max(1.0, float(np.linalg.norm(f.q)), float(np.linalg.norm(f.p @ x0)))
    if hsd.rank > 0:
        g_out = hsd.u2 @ (hsd.u2.T @ g)
        if np.linalg.norm(g_out) > tol.membership * max(gscale, float(np.linalg.norm(g))):
            d = -v2 @ g_out
            return EqQpOutcome(
                EqCategory.UNBOUNDED_QP, None, x0, np.zeros((n, 0)), False, d / np.linalg.norm(d), v2, a_pinv, h
            )
        hpinv = pseudoinverse(hsd)
        xp = x0 - v2 @ (hpinv @ g)
        # closed-form optimal value; K = V2 H^+ V2^T
        kmat = v2 @ hpinv @ v2.T
        value = float((x0 @ f.p / 2.0 + f.q) @ (x0 - kmat @ (f.p @ x0)) + f.s - f.q @ kmat @ f.q / 2.0)
        freedom = canonicalize_signs(v2 @ hsd.u2)
        return EqQpOutcome(
            EqCategory.FINITE_QP, value, xp, freedom, freedom.shape[1] == 0, None, v2, a_pinv, h
        )
    if np.linalg.norm(g) > tol.membership * gscale:
        d = -v2 @ g
        return EqQpOutcome(
            EqCategory.UNBOUNDED_LP, None, x0, np.zeros((n, 0)), False, d / np.linalg.norm(d), v2, a_pinv, h
        )
    return EqQpOutcome(EqCategory.CONSTANT, f.value(x0), x0, v2.copy(), False, None, v2, a_pinv, h)


def least_norm(a: ArrayLike, b: ArrayLike) -> EqQpOutcome:
    """``min ||x||^2`` subject to ``A x = b``; the optimum is ``A^+ b``."""
    a = as_matrix(a, "A")
    f = CqfSpec(2.0 * np.eye(a.shape[1]), np.zeros(a.shape[1]), 0.0)
    return equality_solve(f, a, b)


def kkt_residual(f: CqfSpec, a: ArrayLike | None, b: ArrayLike | None, x: ArrayLike) -> tuple[float, Array]:
    """Residual of ``[P A^T; A 0][x; lam] = [-q; b]`` with least-squares ``lam``.

    Returns ``(max(||A x - b||, ||P x + A^T lam + q||), lam)``.
    """
    x = as_vector(x, "x", f.n)
    grad = f.p @ x + f.q
    if a is None or np.size(a) == 0:
        return float(np.linalg.norm(grad)), np.zeros(0)
    a = as_matrix(a, "A", (None, f.n))
    b = as_vector(b, "b", a.shape[0])
    lam = -np.linalg.pinv(a.T) @ grad
    res = max(float(np.linalg.norm(a @ x - b)), float(np.linalg.norm(grad + a.T @ lam)))
    return res, lam


# -- extended problem -------------------------------------------------------------


@dataclass(frozen=True)
class ExtendedOutcome:
    """``min F(x)`` over ``x in R(P)`` (with ``q in R(P)``).

    ``preimage(level)`` returns the level set ``{x in R(P) : F(x) = level}``,
    ``x = -P^+ q + sqrt(q^T P^+ q - 2s + 2 level) P^{+/2} rho`` with ``rho``
    a unit vector of ``R(P)``.
    """

    l_check_star: float
    x_hat_star: Array
    spec: CqfSpec

    def preimage(self, level: float) -> CqeSolutionSet:
        p = CqeProblem(self.spec.p / 2.0, self.spec.q, self.spec.s, self.spec.tol)
        return level_preimage_set(p, float(level))


def extended_solve(f: CqfSpec) -> ExtendedOutcome:
    """Optimal value ``s - q^T P^+ q / 2`` at ``-P^+ q``; requires ``q in R(P)``."""
    sd = f.sd
    out = np.linalg.norm(sd.u2.T @ f.q)
    if out > f.tol.membership * max(1.0, float(np.linalg.norm(f.q))):
        raise QNotInRange("q must lie in the range of P")
    pinv = pseudoinverse(sd)
    return ExtendedOutcome(float(f.s - f.q @ pinv @ f.q / 2.0), -pinv @ f.q, f)
