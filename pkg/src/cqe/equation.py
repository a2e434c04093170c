"""Convex quadratic equations ``z^T M z + k^T z + c = 0`` with ``M`` PSD.

The real solution set is classified into four cases by the rank of ``M``
and whether ``k`` lies in the range of ``M``:

``FullRank``
    ``k^T M^{-1} k >= 4c``; solutions form an ellipsoid
    ``z = -M^{-1}k/2 + sqrt(k^T M^{-1} k/4 - c) M^{-1/2} v`` with ``||v|| = 1``.
``RankDefInRange``
    ``k in R(M)`` and ``k^T M^+ k >= 4c``; an elliptic cylinder
    ``z = -M^+ k/2 + sqrt(k^T M^+ k/4 - c) M^{+/2} rho + eps`` with
    ``rho in R(M)`` unit and ``eps in N(M)``.
``RankDefOutOfRange``
    ``k`` has a component ``k_perp`` outside ``R(M)``; always solvable,
    ``z = -F(tau)/||k_perp||^2 k_perp + phi + tau`` where
    ``F(w) = w^T M w + k_M^T w + c`` is the quadratic function on ``R(M)``,
    ``tau in R(M)`` and ``phi in N(M) cap N(k^T)``.
``Unsolvable``
    Everything else; no real solution.

Solution sets are returned as :class:`CqeSolutionSet` objects that evaluate
parameters to solutions and invert solutions back to parameters.  Every
parameter array may carry a leading batch axis, in which case evaluation and
inversion are vectorized over that axis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike

from .errors import (
    DimensionMismatch,
    InvalidParams,
    LevelBelowMinimum,
    NonFinite,
    NotASolution,
    NotUnitLength,
    UnsolvableCqe,
)
from .linalg import (
    Array,
    RangeSplit,
    SpectralData,
    as_vector,
    pinv_sqrt,
    pseudoinverse,
    psd_sqrt,
    range_split,
    spectral_decompose,
    symmetrize,
    unit_row_nullspace,
)
from .tolerances import DEFAULT_TOLERANCES, Tolerances

#: Residual bound (relative to :func:`residual_scale`) for "is a solution".
RESIDUAL_TOL = 1e-8


class CaseTag(str, enum.Enum):
    FULL_RANK = "FullRank"
    IN_RANGE = "RankDefInRange"
    OUT_OF_RANGE = "RankDefOutOfRange"
    UNSOLVABLE = "Unsolvable"


@dataclass(frozen=True)
class CqeProblem:
    """The equation ``z^T M z + k^T z + c = 0``.

    ``m`` is symmetrized on construction (small asymmetry only) and decomposed
    lazily; ``tol`` carries the numerical policy for every derived decision.
    """

    m: Array
    k: Array
    c: float
    tol: Tolerances = field(default=DEFAULT_TOLERANCES, compare=False, repr=False)

    def __post_init__(self) -> None:
        m = symmetrize(self.m, self.tol.symmetry, "M")
        k = as_vector(self.k, "k", m.shape[0])
        c = float(self.c)
        if not np.isfinite(c):
            raise NonFinite("c must be finite")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.m.shape[0]

    @cached_property
    def sd(self) -> SpectralData:
        return spectral_decompose(self.m, tol=self.tol)


@dataclass(frozen=True)
class CqeCase:
    """Classification of a :class:`CqeProblem`.

    ``discriminant`` is ``k^T M^+ k / 4 - c`` (``M^+ = M^{-1}`` for full rank);
    it is only meaningful for the ``k in R(M)`` branches.  ``condition`` names
    the solvability condition that was checked, for diagnostics.
    """

    tag: CaseTag
    discriminant: float
    boundary: bool
    rank: int
    k_in_range: bool
    condition: str

    @property
    def solvable(self) -> bool:
        return self.tag is not CaseTag.UNSOLVABLE


@dataclass(frozen=True)
class CqeParams:
    """Parameters of one point (or a batch of points) of a solution set.

    Which fields are used depends on the case:

    * ``FullRank``: ``v`` (unit vector); nothing at the boundary.
    * ``RankDefInRange``: ``rho`` (unit, in ``R(M)``; omitted at the boundary)
      and ``eps`` (in ``N(M)``).
    * ``RankDefOutOfRange``: ``phi`` (in ``N(M) cap N(k^T)``) and either
      ``tau`` (in ``R(M)``) or the level view ``level`` + ``rho_check``, which
      picks ``tau`` on the level set ``F(tau) = level``.  ``w`` may be given
      as an alternative point of the same level; it is checked, not used.

    Fields left as ``None`` default to zero where zero is admissible.
    """

    v: Array | None = None
    rho: Array | None = None
    eps: Array | None = None
    phi: Array | None = None
    tau: Array | None = None
    w: Array | None = None
    level: float | Array | None = None
    rho_check: Array | None = None

    def as_dict(self) -> dict[str, object]:
        out: dict[str, object] = {}
        for name in ("v", "rho", "eps", "phi", "tau", "w", "level", "rho_check"):
            val = getattr(self, name)
            if val is not None:
                out[name] = np.asarray(val).tolist()
        return out


# -- scalar helpers ---------------------------------------------------------


def residual(p: CqeProblem, z: ArrayLike) -> float | Array:
    """``|z^T M z + k^T z + c|`` (vectorized over a leading batch axis)."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1:] != (p.dim,):
        raise DimensionMismatch(f"z must have trailing dimension {p.dim}, got {z.shape}")
    val = np.einsum("...i,ij,...j->...", z, p.m, z) + z @ p.k + p.c
    out = np.abs(val)
    return float(out) if out.ndim == 0 else out


def residual_scale(p: CqeProblem, z: ArrayLike) -> float | Array:
    """``max(1, ||M|| ||z||^2, ||k|| ||z||, |c|)``, the yardstick for residuals."""
    z = np.asarray(z, dtype=float)
    zn = np.linalg.norm(z, axis=-1)
    mn = p.sd.sigma_max
    kn = float(np.linalg.norm(p.k))
    out = np.maximum.reduce([np.ones_like(zn), mn * zn**2, kn * zn, np.full_like(zn, abs(p.c))])
    return float(out) if np.ndim(out) == 0 else out


def is_solution(p: CqeProblem, z: ArrayLike, tol: float = RESIDUAL_TOL) -> bool | Array:
    ok = residual(p, z) <= tol * residual_scale(p, z)
    return bool(ok) if np.ndim(ok) == 0 else ok


# -- classification ----------------------------------------------------------


def _boundary_scale(kmk: float, c: float) -> float:
    return max(1.0, abs(kmk), abs(4.0 * c))


def classify(p: CqeProblem) -> CqeCase:
    """Assign the solvability case of ``p``."""
    sd = p.sd
    tol = p.tol
    split = range_split(p.k, sd)
    k_in = split.out_norm <= tol.membership * max(1.0, float(np.linalg.norm(p.k)))
    kmk = float(p.k @ pseudoinverse(sd) @ p.k) if sd.rank else 0.0
    disc = kmk / 4.0 - p.c
    boundary = abs(disc) <= tol.boundary * _boundary_scale(kmk, p.c)
    if sd.full_rank:
        cond = "k^T M^-1 k >= 4c"
        tag = CaseTag.FULL_RANK if (boundary or disc > 0) else CaseTag.UNSOLVABLE
    elif k_in:
        cond = "k in R(M) and k^T M^+ k >= 4c"
        # With M = 0 there is no unit direction in R(M): only c = 0 is solvable.
        ok = boundary or (disc > 0 and sd.rank > 0)
        tag = CaseTag.IN_RANGE if ok else CaseTag.UNSOLVABLE
    else:
        cond = "k not in R(M)"
        tag = CaseTag.OUT_OF_RANGE
        boundary = False
    if boundary and tag is not CaseTag.UNSOLVABLE:
        disc = 0.0
    return CqeCase(tag, float(disc), bool(boundary), sd.rank, bool(k_in), cond)


# -- solution sets ----------------------------------------------------------


def _check_subspace(x: Array, outside: Array, what: str, tol: float) -> None:
    """Raise unless ``||outside^T x|| <= tol * max(1, ||x||)`` row-wise."""
    if outside.shape[1] == 0:
        return
    off = np.linalg.norm(x @ outside, axis=-1)
    ref = np.maximum(1.0, np.linalg.norm(x, axis=-1))
    if np.any(off > tol * ref):
        raise InvalidParams(f"{what} does not lie in its required subspace")


def _normalize(x: Array, what: str, tol: float) -> Array:
    nrm = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(np.abs(nrm - 1.0) > tol):
        raise NotUnitLength(f"{what} must have unit length")
    return x / nrm


def _param(x: ArrayLike | None, n: int, what: str) -> Array | None:
    if x is None:
        return None
    a = np.asarray(x, dtype=float)
    if a.ndim == 0 or a.shape[-1] != n or a.ndim > 2:
        raise DimensionMismatch(f"{what} must have trailing dimension {n}, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite(f"{what} contains NaN or infinite entries")
    return a


@dataclass(frozen=True)
class CqeSolutionSet:
    """Evaluable, invertible description of all real solutions of a CQE.

    Attributes
    ----------
    problem, case, sd:
        The equation, its classification and the decomposition of ``M``.
    center:
        ``-M^+ k / 2`` (cases with ``k in R(M)``); the zero vector otherwise.
    radius:
        ``sqrt(discriminant)`` for the ``k in R(M)`` cases, else 0.
    split:
        Range / null-space split of ``k``.
    restricted:
        If true, the solution set is intersected with ``R(M)`` (``eps = 0``).
        Used for preimages of a level on the domain ``R(M)``.
    """

    problem: CqeProblem
    case: CqeCase
    sd: SpectralData
    center: Array
    radius: float
    split: RangeSplit
    restricted: bool = False

    # -- cached operators -------------------------------------------------

    @cached_property
    def _pinv_sqrt(self) -> Array:
        return pinv_sqrt(self.sd)

    @cached_property
    def _sqrt(self) -> Array:
        return psd_sqrt(self.sd)

    @cached_property
    def phi_basis(self) -> Array:
        """Orthonormal columns spanning ``N(M) cap N(k^T)`` (case c only)."""
        if self.case.tag is not CaseTag.OUT_OF_RANGE:
            return np.zeros((self.sd.dim, 0))
        k2 = self.sd.u2.T @ self.problem.k
        return self.sd.u2 @ unit_row_nullspace(k2)

    @property
    def tag(self) -> CaseTag:
        return self.case.tag

    @property
    def dim(self) -> int:
        return self.sd.dim

    @property
    def cqf_coeffs(self) -> tuple[Array, Array, float]:
        """``(M, k_M, c)`` of ``F(w) = w^T M w + k_M^T w + c`` on ``R(M)``."""
        return self.problem.m, self.split.in_range, self.problem.c

    def level_of(self, w: ArrayLike) -> float | Array:
        """``F(w) = w^T M w + k_M^T w + c`` (vectorized)."""
        m, km, c = self.cqf_coeffs
        w = np.asarray(w, dtype=float)
        val = np.einsum("...i,ij,...j->...", w, m, w) + w @ km + c
        return float(val) if np.ndim(val) == 0 else val

    @property
    def min_level(self) -> float:
        """Smallest value of ``F`` on ``R(M)``: ``c - k_M^T M^+ k_M / 4``."""
        km = self.split.in_range
        return float(self.problem.c - km @ pseudoinverse(self.sd) @ km / 4.0)

    # -- evaluation -------------------------------------------------------

    def evaluate(self, params: CqeParams) -> Array:
        """Map parameters to solution(s)."""
        tol = self.problem.tol
        n = self.dim
        tag = self.tag
        if tag is CaseTag.FULL_RANK:
            v = _param(params.v, n, "v")
            if self.case.boundary or self.radius == 0.0:
                return self._broadcast(self.center, v)
            if v is None:
                raise InvalidParams("full-rank case requires a unit vector v")
            v = _normalize(v, "v", tol.unit)
            return self.center + self.radius * (v @ self._pinv_sqrt.T)

        if tag is CaseTag.IN_RANGE:
            rho = _param(params.rho, n, "rho")
            eps = _param(params.eps, n, "eps")
            if eps is not None:
                if self.restricted:
                    if np.any(np.linalg.norm(eps, axis=-1) > tol.membership):
                        raise InvalidParams("eps must vanish on a range-restricted set")
                    eps = None
                else:
                    _check_subspace(eps, self.sd.u1, "eps", tol.membership)
                    eps = (eps @ self.sd.u2) @ self.sd.u2.T
            if self.case.boundary or self.radius == 0.0:
                z = self._broadcast(self.center, eps if eps is not None else rho)
            else:
                if rho is None:
                    raise InvalidParams("rank-deficient case requires a unit rho in R(M)")
                _check_subspace(rho, self.sd.u2, "rho", tol.membership)
                rho = _normalize((rho @ self.sd.u1) @ self.sd.u1.T, "rho", tol.unit)
                z = self.center + self.radius * (rho @ self._pinv_sqrt.T)
            return z + eps if eps is not None else z

        # out-of-range case
        phi = _param(params.phi, n, "phi")
        tau = self._resolve_tau(params)
        if phi is not None:
            _check_subspace(phi, self._phi_complement, "phi", tol.membership)
            phi = (phi @ self.phi_basis) @ self.phi_basis.T
        level = np.asarray(self.level_of(tau))
        kperp = self.split.out_of_range
        z = tau - (level[..., None] / self.split.out_norm**2) * kperp
        return z + phi if phi is not None else z

    def _broadcast(self, vec: Array, like: Array | None) -> Array:
        if like is not None and like.ndim == 2:
            return np.tile(vec, (like.shape[0], 1))
        return vec.copy()

    @cached_property
    def _phi_complement(self) -> Array:
        """Orthonormal complement of :attr:`phi_basis` (``R(M) + span(k_perp)``)."""
        kp = self.split.out_of_range / self.split.out_norm
        return np.column_stack([self.sd.u1, kp])

    def _resolve_tau(self, params: CqeParams) -> Array:
        tol = self.problem.tol
        n = self.dim
        tau = _param(params.tau, n, "tau")
        if tau is None:
            if params.level is None:
                tau = np.zeros(n)
            else:
                tau = level_preimage_set(self.problem, params.level).evaluate(
                    CqeParams(v=params.rho_check, rho=params.rho_check)
                )
        else:
            _check_subspace(tau, self.sd.u2, "tau", tol.membership)
            tau = (tau @ self.sd.u1) @ self.sd.u1.T
            if params.level is not None:
                self._check_level(tau, np.asarray(params.level, dtype=float), "level")
        w = _param(params.w, n, "w")
        if w is not None:
            _check_subspace(w, self.sd.u2, "w", tol.membership)
            self._check_level(tau, np.asarray(self.level_of(w)), "w")
        return tau

    def _check_level(self, tau: Array, level: Array, what: str) -> None:
        got = np.asarray(self.level_of(tau))
        m, km, c = self.cqf_coeffs
        tn = np.linalg.norm(tau, axis=-1)
        scale = np.maximum.reduce(
            [np.ones_like(tn), self.sd.sigma_max * tn**2, np.linalg.norm(km) * tn, np.full_like(tn, abs(c))]
        )
        if np.any(np.abs(got - level) > RESIDUAL_TOL * np.maximum(scale, np.abs(level))):
            raise InvalidParams(f"{what} is not on the level set of tau")

    # -- inversion --------------------------------------------------------

    def invert(self, z: ArrayLike) -> CqeParams:
        """Recover the parameters of a solution (or batch of solutions)."""
        z = _param(z, self.dim, "z")
        assert z is not None
        p = self.problem
        if not np.all(is_solution(p, z)):
            raise NotASolution("z does not solve the equation within tolerance")
        tag = self.tag
        sd = self.sd
        if tag is CaseTag.FULL_RANK:
            if self.case.boundary or self.radius == 0.0:
                return CqeParams()
            v = ((z - self.center) @ self._sqrt.T) / self.radius
            return CqeParams(v=v / np.linalg.norm(v, axis=-1, keepdims=True))
        if tag is CaseTag.IN_RANGE:
            eps = (z @ sd.u2) @ sd.u2.T
            if self.restricted:
                if np.any(np.linalg.norm(eps, axis=-1) > RESIDUAL_TOL * np.maximum(1.0, np.linalg.norm(z, axis=-1))):
                    raise NotASolution("z does not lie in R(M)")
                eps_out = None
            else:
                eps_out = eps
            if self.case.boundary or self.radius == 0.0:
                return CqeParams(eps=eps_out)
            rho = ((z - self.center - eps) @ self._sqrt.T) / self.radius
            rho = rho / np.linalg.norm(rho, axis=-1, keepdims=True)
            return CqeParams(rho=rho, eps=eps_out)
        if tag is CaseTag.UNSOLVABLE:
            raise NotASolution("the equation has no real solution")

        tau = (z @ sd.u1) @ sd.u1.T
        kp = self.split.out_of_range / self.split.out_norm
        null = (z @ sd.u2) @ sd.u2.T
        phi = null - (null @ kp)[..., None] * kp
        level = self.level_of(tau)
        rho_check = None
        if np.ndim(level) == 0:
            inv = level_preimage_set(p, level).invert(tau)
            rho_check = inv.v if inv.v is not None else inv.rho
        return CqeParams(phi=phi, tau=tau, w=tau, level=level, rho_check=rho_check)

    # -- sampling ---------------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int | None = None, scale: float = 1.0) -> CqeParams:
        """Draw random admissible parameters (``size`` rows if given)."""
        shape = (self.dim,) if size is None else (size, self.dim)
        sd = self.sd

        def unit_in(basis: Array) -> Array:
            g = rng.standard_normal(shape[:-1] + (basis.shape[1],))
            x = g @ basis.T
            return x / np.linalg.norm(x, axis=-1, keepdims=True)

        def vec_in(basis: Array) -> Array:
            g = rng.standard_normal(shape[:-1] + (basis.shape[1],))
            return scale * (g @ basis.T)

        tag = self.tag
        if tag is CaseTag.FULL_RANK:
            if self.case.boundary:
                return CqeParams()
            return CqeParams(v=unit_in(np.eye(self.dim)))
        if tag is CaseTag.IN_RANGE:
            eps = None if self.restricted or sd.rank == sd.dim else vec_in(sd.u2)
            rho = None if self.case.boundary else unit_in(sd.u1)
            return CqeParams(rho=rho, eps=eps)
        if tag is CaseTag.OUT_OF_RANGE:
            return CqeParams(phi=vec_in(self.phi_basis), tau=vec_in(sd.u1))
        raise UnsolvableCqe("cannot sample an empty solution set")


def parameterize(p: CqeProblem) -> CqeSolutionSet:
    """Closed-form solution set of ``p``; raises :class:`UnsolvableCqe` if empty."""
    case = classify(p)
    if not case.solvable:
        raise UnsolvableCqe(
            f"no real solution: condition '{case.condition}' fails "
            f"(k^T M^+ k / 4 - c = {case.discriminant:.6g} < 0)"
        )
    sd = p.sd
    split = range_split(p.k, sd)
    if case.tag is CaseTag.OUT_OF_RANGE:
        center = np.zeros(sd.dim)
        radius = 0.0
    else:
        center = -0.5 * (pseudoinverse(sd) @ p.k)
        radius = float(np.sqrt(max(case.discriminant, 0.0)))
    return CqeSolutionSet(p, case, sd, center, radius, split)


def solve(m: ArrayLike, k: ArrayLike, c: float, tol: Tolerances = DEFAULT_TOLERANCES) -> CqeSolutionSet:
    """Shorthand for ``parameterize(CqeProblem(m, k, c, tol))``."""
    return parameterize(CqeProblem(np.asarray(m, dtype=float), np.asarray(k, dtype=float), c, tol))


def level_preimage_set(p: CqeProblem, level: float) -> CqeSolutionSet:
    """All ``w in R(M)`` with ``F(w) = w^T M w + k_M^T w + c = level``.

    The result is the solution set of ``w^T M w + k_M^T w + (c - level) = 0``
    restricted to ``R(M)``:
    ``w = -M^+ k_M / 2 + sqrt(k_M^T M^+ k_M / 4 - c + level) M^{+/2} rho``
    with ``rho`` a unit vector in ``R(M)`` (``v`` when ``M`` is invertible).
    Raises :class:`LevelBelowMinimum` when ``level`` is below the minimum of
    ``F``.
    """
    sd = p.sd
    split = range_split(p.k, sd)
    km = split.in_range
    level = float(level)
    sub = CqeProblem(p.m, km, p.c - level, p.tol)
    object.__setattr__(sub, "sd", sd)  # share the decomposition
    case = classify(sub)
    if not case.solvable:
        raise LevelBelowMinimum(
            f"level {level:.6g} is below the minimum {p.c - km @ pseudoinverse(sd) @ km / 4:.6g}"
        )
    center = -0.5 * (pseudoinverse(sd) @ km)
    radius = float(np.sqrt(max(case.discriminant, 0.0)))
    return CqeSolutionSet(sub, case, sd, center, radius, range_split(km, sd), restricted=True)


def preimage_of_level(p: CqeProblem, level: float) -> CqeSolutionSet:
    """Alias of :func:`level_preimage_set` named after the operation it performs."""
    return level_preimage_set(p, level)


def evaluate(s: CqeSolutionSet, params: CqeParams) -> Array:
    return s.evaluate(params)


def invert(s: CqeSolutionSet, z: ArrayLike) -> CqeParams:
    return s.invert(z)
