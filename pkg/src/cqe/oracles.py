"""Brute-force oracles for checking the closed-form solvers.

Nothing here calls the closed-form code paths: the grid minimizer scans
points, the root finder is the schoolbook quadratic formula, projectors come
from Gram-Schmidt and null-space intersections from a plain rank count.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from .errors import DimensionMismatch, GridTooLarge, InputError, NoFeasibleGridPoint

#: Largest grid the minimizer agrees to scan.
MAX_GRID_POINTS = 10**8
#: Points evaluated per vectorized chunk.
CHUNK = 2_000_000


def scalar_roots(m: float, k: float, c: float) -> list[float]:
    """Real roots of ``m z^2 + k z + c = 0``, sorted, without repetition.

    Uses the cancellation-free form of the quadratic formula.  A discriminant
    within ``1e-14 (k^2 + |4mc|)`` of zero counts as a double root.  ``m = 0``
    falls back to the linear equation (``[]`` if ``k = 0`` too).
    """
    m, k, c = float(m), float(k), float(c)
    if m == 0.0:
        return [] if k == 0.0 else [-c / k]
    disc = k * k - 4.0 * m * c
    if abs(disc) <= 1e-14 * (k * k + abs(4.0 * m * c)):
        return [-k / (2.0 * m)]
    if disc < 0:
        return []
    qv = -0.5 * (k + math.copysign(math.sqrt(disc), k))
    if qv == 0.0:
        return [0.0]
    return sorted([qv / m, c / qv])


def gram_schmidt(a: ArrayLike, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the column space of ``a`` (modified Gram-Schmidt,
    with one re-orthogonalization pass)."""
    a = np.asarray(a, dtype=float)
    scale = max(1.0, float(np.abs(a).max())) if a.size else 1.0
    basis: list[np.ndarray] = []
    for col in a.T:
        v = col.copy()
        for _ in range(2):
            for q in basis:
                v -= (q @ v) * q
        nrm = np.linalg.norm(v)
        if nrm > tol * scale:
            basis.append(v / nrm)
    if not basis:
        return np.zeros((a.shape[0], 0))
    return np.column_stack(basis)


def range_projector(a: ArrayLike, tol: float = 1e-10) -> np.ndarray:
    """Orthogonal projector onto the column space of ``a``."""
    q = gram_schmidt(a, tol)
    return q @ q.T


def nullspace_intersection_dim(a: ArrayLike, p: ArrayLike, rtol: float | None = None) -> int:
    """``dim(N(A) cap N(P)) = n - rank([A; P])``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    p = np.atleast_2d(np.asarray(p, dtype=float))
    if a.size == 0:
        a = np.zeros((0, p.shape[1]))
    if a.shape[1] != p.shape[1]:
        raise DimensionMismatch("A and P must have the same number of columns")
    stacked = np.vstack([a, p])
    n = stacked.shape[1]
    if not stacked.any():
        return n
    return n - int(np.linalg.matrix_rank(stacked, tol=None if rtol is None else rtol * np.abs(stacked).max()))


# -- grid minimization --------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned box ``[lower, upper]`` sampled with spacing ``step``."""

    lower: np.ndarray
    upper: np.ndarray
    step: float

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch("lower and upper must be vectors of equal length")
        if not np.all(hi > lo):
            raise InputError("upper must exceed lower componentwise")
        if not self.step > 0:
            raise InputError("step must be positive")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "step", float(self.step))

    def axes(self) -> list[np.ndarray]:
        # lo + step * i rather than a float-step arange, so grids with halved
        # steps nest exactly
        return [lo + self.step * np.arange(cnt) for lo, cnt in zip(self.lower, self._counts())]

    def _counts(self) -> list[int]:
        return [int(np.floor((hi - lo) / self.step + 0.5)) + 1 for lo, hi in zip(self.lower, self.upper)]

    @property
    def size(self) -> int:
        return int(np.prod(self._counts()))

    @classmethod
    def around(cls, points: ArrayLike, step: float, inflate: float = 0.5, pad: float = 0.05) -> "GridSpec":
        """Box around ``points`` inflated by ``inflate`` times its extent (plus ``pad``)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        ext = hi - lo
        return cls(lo - inflate * ext - pad, hi + inflate * ext + pad, step)


@dataclass(frozen=True)
class GridResult:
    value: float
    argmins: np.ndarray
    value_tol: float
    feasible_count: int


def _cqf_parts(f: Any) -> tuple[np.ndarray, np.ndarray, float]:
    if isinstance(f, (tuple, list)):
        p, q, s = f
    else:
        p, q, s = f.p, f.q, f.s
    return np.asarray(p, dtype=float), np.asarray(q, dtype=float), float(s)


def grid_minimize(
    f: Any,
    grid: GridSpec,
    a: ArrayLike | None = None,
    b: ArrayLike | None = None,
    c: ArrayLike | None = None,
    d: ArrayLike | None = None,
    value_tol: float | None = None,
    max_dim: int = 4,
) -> GridResult:
    """Exhaustively minimize ``x^T P x / 2 + q^T x + s`` over a grid.

    A grid point is feasible when every equality row satisfies
    ``|a_i^T x - b_i| <= step ||a_i||`` and every inequality row
    ``c_i^T x - d_i <= step ||c_i||``.  The argmin set holds every feasible
    point within ``value_tol`` of the minimum; the default tolerance is the
    first-order change of the objective over one grid step,
    ``2 step max||P x + q|| + step^2 ||P||`` with the maximum over the box
    corners.

    ``f`` is anything with ``p, q, s`` attributes or a ``(P, q, s)`` tuple.
    """
    p, q, s = _cqf_parts(f)
    n = q.shape[0]
    if grid.lower.shape[0] != n:
        raise DimensionMismatch("grid dimension does not match the objective")
    if n > max_dim:
        raise GridTooLarge(f"grid search limited to n <= {max_dim}")
    if grid.size > MAX_GRID_POINTS:
        raise GridTooLarge(f"grid has {grid.size} points (limit {MAX_GRID_POINTS})")
    a = np.zeros((0, n)) if a is None else np.atleast_2d(np.asarray(a, dtype=float))
    b = np.zeros(0) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
    c = np.zeros((0, n)) if c is None else np.atleast_2d(np.asarray(c, dtype=float))
    d = np.zeros(0) if d is None else np.atleast_1d(np.asarray(d, dtype=float))
    if a.size == 0:
        a = np.zeros((0, n))
    if c.size == 0:
        c = np.zeros((0, n))
    h = grid.step
    eq_slack = h * np.linalg.norm(a, axis=1)
    in_slack = h * np.linalg.norm(c, axis=1)

    if value_tol is None:
        corners = np.array(list(itertools.product(*zip(grid.lower, grid.upper))))
        gmax = float(np.max(np.linalg.norm(corners @ p + q, axis=1)))
        value_tol = 2 * h * gmax + h * h * float(np.linalg.norm(p, 2))

    axes = grid.axes()
    shape = [ax.size for ax in axes]
    total = int(np.prod(shape))
    best = np.inf
    kept_vals: list[np.ndarray] = []
    kept_pts: list[np.ndarray] = []
    feasible = 0
    for start in range(0, total, CHUNK):
        idx = np.unravel_index(np.arange(start, min(total, start + CHUNK)), shape)
        pts = np.column_stack([ax[i] for ax, i in zip(axes, idx)])
        ok = np.ones(pts.shape[0], dtype=bool)
        if a.shape[0]:
            ok &= np.all(np.abs(pts @ a.T - b) <= eq_slack, axis=1)
        if c.shape[0]:
            ok &= np.all(pts @ c.T - d <= in_slack, axis=1)
        pts = pts[ok]
        if not pts.size:
            continue
        feasible += pts.shape[0]
        vals = 0.5 * np.einsum("ij,jk,ik->i", pts, p, pts) + pts @ q + s
        best = min(best, float(vals.min()))
        sel = vals <= best + value_tol
        kept_vals.append(vals[sel])
        kept_pts.append(pts[sel])
    if not feasible:
        raise NoFeasibleGridPoint("no grid point satisfies the constraints")
    vals = np.concatenate(kept_vals)
    pts = np.concatenate(kept_pts)
    return GridResult(best, pts[vals <= best + value_tol], float(value_tol), feasible)


# -- bijection driver ---------------------------------------------------------


def bijection_round_trip(solution_set: Any, rng: np.random.Generator, count: int = 1000) -> dict[str, float]:
    """Sample parameters, evaluate, invert and evaluate again.

    Returns the worst relative residual, the worst ``z -> params -> z`` error
    and the worst ``params -> z -> params`` error over ``count`` samples.
    """
    from .equation import residual, residual_scale  # local: avoid an import cycle

    prm = solution_set.sample(rng, size=count)
    z = solution_set.evaluate(prm)
    p = solution_set.problem
    res = np.max(residual(p, z) / residual_scale(p, z))
    back = solution_set.invert(z)
    z2 = solution_set.evaluate(back)
    zscale = max(1.0, float(np.abs(z).max()))
    z_err = float(np.max(np.abs(z2 - z))) / zscale
    p_err = 0.0
    for name in ("v", "rho", "eps", "phi", "tau"):
        x, y = getattr(prm, name), getattr(back, name)
        if x is not None and y is not None:
            p_err = max(p_err, float(np.max(np.abs(x - y))) / max(1.0, float(np.abs(x).max())))
    return {"residual": float(res), "z_round_trip": z_err, "param_round_trip": p_err}
