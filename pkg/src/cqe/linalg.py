"""Rank-revealing linear algebra for symmetric positive semidefinite matrices.

Everything else in the package is built on the objects defined here:

* :class:`SpectralData` -- the thin eigen-decomposition ``M = U1 diag(s) U1^T``
  of a PSD matrix together with an orthonormal basis ``U2`` of its null space;
* the pseudoinverse ``M^+`` and its square root ``M^{+/2}``;
* the orthogonal split ``k = k_M + k_perp`` into range and null-space parts;
* orthonormal complements of a unit vector built from one Householder
  reflection, and null-space bases / pseudoinverses of full-row-rank matrices.

Eigen- and singular-value decompositions themselves are delegated to LAPACK
through :mod:`numpy.linalg`; this module adds the rank policy, the sign
canonicalization and the derived operators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    DimensionMismatch,
    NonFinite,
    NotPositiveSemidefinite,
    NotSymmetric,
    NotUnitLength,
    RankDeficientRows,
)
from .tolerances import DEFAULT_TOLERANCES, EPS, Tolerances

Array = NDArray[np.float64]

#: Entries smaller than this are ignored when canonicalizing column signs.
SIGN_THRESHOLD = 1e-12


# -- validation helpers -----------------------------------------------------


def _frozen(a: np.ndarray) -> Array:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def as_vector(x: ArrayLike, name: str = "vector", dim: int | None = None) -> Array:
    """Convert ``x`` to a finite 1-D float array, optionally checking its length."""
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFinite(f"{name} contains NaN or infinite entries")
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatch(f"{name} must have length {dim}, got {v.shape[0]}")
    return v


def as_matrix(
    a: ArrayLike, name: str = "matrix", shape: tuple[int | None, int | None] | None = None
) -> Array:
    """Convert ``a`` to a finite 2-D float array, optionally checking its shape.

    ``None`` entries in ``shape`` are wildcards.  A scalar is promoted to a
    ``1 x 1`` matrix.
    """
    m = np.asarray(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be two-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFinite(f"{name} contains NaN or infinite entries")
    if shape is not None:
        for axis, want in enumerate(shape):
            if want is not None and m.shape[axis] != want:
                raise DimensionMismatch(f"{name} must have shape {shape}, got {m.shape}")
    return m


def symmetrize(m: ArrayLike, tol: float = DEFAULT_TOLERANCES.symmetry, name: str = "matrix") -> Array:
    """Return ``(M + M^T)/2`` after checking that ``M`` is square and nearly symmetric.

    Raises :class:`NotSymmetric` when ``max|M - M^T| > tol * max(1, max|M|)``.
    """
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    if m.size == 0:
        return m.copy()
    asym = float(np.max(np.abs(m - m.T)))
    scale = max(1.0, float(np.max(np.abs(m))))
    if asym > tol * scale:
        raise NotSymmetric(f"{name} is not symmetric (max asymmetry {asym:.3e})")
    return 0.5 * (m + m.T)


def canonicalize_signs(u: Array) -> Array:
    """Flip column signs so that the first entry with ``|.| > 1e-12`` is positive."""
    u = np.array(u, dtype=float, copy=True)
    for j in range(u.shape[1]):
        col = u[:, j]
        idx = np.flatnonzero(np.abs(col) > SIGN_THRESHOLD)
        if idx.size and col[idx[0]] < 0:
            u[:, j] = -col
    return u


# -- spectral data ----------------------------------------------------------


@dataclass(frozen=True)
class SpectralData:
    """Thin spectral decomposition of a symmetric PSD matrix.

    Attributes
    ----------
    dim:
        Matrix dimension ``n``.
    rank:
        Numerical rank ``r``.
    sigma1:
        The ``r`` retained eigenvalues, non-increasing.
    u1:
        ``n x r`` orthonormal basis of the range.
    u2:
        ``n x (n - r)`` orthonormal basis of the null space.
    rank_tol:
        Absolute cutoff that was applied to the eigenvalues.
    """

    dim: int
    rank: int
    sigma1: Array
    u1: Array
    u2: Array
    rank_tol: float

    @property
    def full_rank(self) -> bool:
        return self.rank == self.dim

    @property
    def sigma_max(self) -> float:
        return float(self.sigma1[0]) if self.rank else 0.0

    def matrix(self) -> Array:
        """Reconstruct ``U1 diag(sigma1) U1^T``."""
        return (self.u1 * self.sigma1) @ self.u1.T

    def range_projector(self) -> Array:
        return self.u1 @ self.u1.T

    def null_projector(self) -> Array:
        return self.u2 @ self.u2.T


def spectral_decompose(
    m: ArrayLike,
    rtol: float | None = None,
    atol: float = 0.0,
    *,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> SpectralData:
    """Rank-revealing eigen-decomposition of a symmetric PSD matrix.

    An eigenvalue is kept when it exceeds ``max(atol, rtol * sigma_max)``;
    ``rtol`` defaults to ``tol.rank_cutoff(n)`` (``n * eps`` unless overridden).
    Eigenvalues below minus that cutoff (or minus ``n * eps * sigma_max`` if the
    cutoff is smaller) mean the matrix is not PSD.

    Parameters
    ----------
    m:
        Square, symmetric (up to ``tol.symmetry``) PSD matrix.
    rtol, atol:
        Relative and absolute eigenvalue cutoffs.
    tol:
        Tolerance bundle supplying the defaults.
    """
    sym = symmetrize(m, tol.symmetry)
    n = sym.shape[0]
    if rtol is None:
        rtol = tol.rank_cutoff(n)
    if n == 0:
        empty = np.zeros((0, 0))
        return SpectralData(0, 0, _frozen(np.zeros(0)), _frozen(empty), _frozen(empty), float(atol))

    w, v = np.linalg.eigh(sym)
    w = w[::-1]
    v = v[:, ::-1]
    smax = max(float(w[0]), 0.0)
    cutoff = max(float(atol), rtol * smax)
    neg_cutoff = max(cutoff, n * EPS * smax)
    if float(w[-1]) < -neg_cutoff:
        raise NotPositiveSemidefinite(
            f"matrix has eigenvalue {w[-1]:.3e} below -{neg_cutoff:.3e}"
        )
    keep = w > cutoff
    r = int(np.count_nonzero(keep))
    u1 = canonicalize_signs(v[:, :r])
    u2 = canonicalize_signs(v[:, r:])
    return SpectralData(
        dim=n,
        rank=r,
        sigma1=_frozen(w[:r]),
        u1=_frozen(u1),
        u2=_frozen(u2),
        rank_tol=float(cutoff),
    )


def pseudoinverse(sd: SpectralData) -> Array:
    """Moore-Penrose pseudoinverse ``U1 diag(1/sigma1) U1^T``."""
    return (sd.u1 / sd.sigma1) @ sd.u1.T


def pinv_sqrt(sd: SpectralData) -> Array:
    """Square root of the pseudoinverse, ``U1 diag(sigma1^{-1/2}) U1^T``."""
    return (sd.u1 / np.sqrt(sd.sigma1)) @ sd.u1.T


def psd_sqrt(sd: SpectralData) -> Array:
    """Principal square root ``U1 diag(sigma1^{1/2}) U1^T``."""
    return (sd.u1 * np.sqrt(sd.sigma1)) @ sd.u1.T


# -- range / null-space split ----------------------------------------------


@dataclass(frozen=True)
class RangeSplit:
    """Orthogonal decomposition ``k = in_range + out_of_range``."""

    in_range: Array
    out_of_range: Array
    out_norm: float


def range_split(k: ArrayLike, sd: SpectralData) -> RangeSplit:
    """Split ``k`` into ``U1 U1^T k`` and ``U2 U2^T k``."""
    k = as_vector(k, "k", sd.dim)
    out = sd.u2 @ (sd.u2.T @ k)
    # The range part is formed with U1 so both pieces are exact projections.
    inside = sd.u1 @ (sd.u1.T @ k)
    return RangeSplit(_frozen(inside), _frozen(out), float(np.linalg.norm(out)))


def in_range(
    k: ArrayLike, sd: SpectralData, membership_tol: float = DEFAULT_TOLERANCES.membership
) -> bool:
    """True iff ``||U2 U2^T k|| <= membership_tol * max(1, ||k||)``."""
    k = as_vector(k, "k", sd.dim)
    out = np.linalg.norm(sd.u2.T @ k)
    return bool(out <= membership_tol * max(1.0, float(np.linalg.norm(k))))


# -- Householder complement -------------------------------------------------


def householder_complement(xi: ArrayLike, unit_tol: float = 1e-10) -> Array:
    """Rows spanning the orthogonal complement of a unit vector.

    With ``iota = (xi - e1)/||xi - e1||`` and ``H = I - 2 iota iota^T`` the
    reflection swaps ``xi`` and ``e1``, so the last ``n - 1`` columns of ``H``
    are orthonormal and orthogonal to ``xi``.  They are returned as the rows
    of an ``(n-1) x n`` matrix.  For ``xi = e1`` the reflection is the
    identity and the result is ``[e2, ..., en]^T``.

    For ``n = 2`` the reflection's second column is ``[xi_2, -xi_1]``, which
    is returned directly (from the input, without renormalization) so the
    planar case is exact.
    """
    xi = as_vector(xi, "xi")
    n = xi.shape[0]
    nrm = float(np.linalg.norm(xi))
    if abs(nrm - 1.0) > unit_tol:
        raise NotUnitLength(f"xi must have unit length, got norm {nrm:.6g}")
    if n == 2 and not (xi[1] == 0.0 and xi[0] > 0):
        return np.array([[xi[1], -xi[0]]])
    xi = xi / nrm
    diff = xi.copy()
    tail = float(xi[1:] @ xi[1:])
    if not np.any(xi[1:]) and xi[0] > 0:
        return np.eye(n)[1:, :]
    # xi_1 - 1 = -||xi_{2:}||^2 / (1 + xi_1) avoids cancellation near e1
    diff[0] = -tail / (1.0 + xi[0]) if xi[0] > 0 else xi[0] - 1.0
    diff /= np.max(np.abs(diff))  # rescale first so the norm cannot underflow
    iota = diff / np.linalg.norm(diff)
    h = np.eye(n) - 2.0 * np.outer(iota, iota)
    return np.ascontiguousarray(h[:, 1:].T)


# -- full-row-rank matrices --------------------------------------------------


@dataclass(frozen=True)
class NullspaceBasis:
    """Null-space basis and pseudoinverse of a full-row-rank ``m x n`` matrix.

    Attributes
    ----------
    v2:
        ``n x (n - m)`` orthonormal basis of ``N(A)``.
    pinv:
        ``n x m`` pseudoinverse ``A^+ = V1 diag(1/gamma) W^T``.
    singular_values:
        The ``m`` singular values of ``A``.
    """

    v2: Array
    pinv: Array
    singular_values: Array


def singular_values(a: ArrayLike) -> Array:
    a = as_matrix(a)
    if a.size == 0:
        return np.zeros(0)
    return np.linalg.svd(a, compute_uv=False)


def numerical_rank(a: ArrayLike, rtol: float | None = None) -> int:
    """Rank with cutoff ``rtol * sigma_max`` (default ``max(m, n) * eps``)."""
    a = as_matrix(a)
    s = singular_values(a)
    if s.size == 0 or s[0] == 0.0:
        return 0
    if rtol is None:
        rtol = max(a.shape) * EPS
    return int(np.count_nonzero(s > rtol * s[0]))


def nullspace_basis(
    a: ArrayLike,
    rtol: float | None = None,
    *,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> NullspaceBasis:
    """Null-space basis ``V2`` and thin pseudoinverse of a full-row-rank matrix.

    Zero rows (``m = 0``) give ``V2 = I``; a square invertible ``A`` gives an
    empty ``V2``.  Raises :class:`RankDeficientRows` if ``rank(A) < m``.
    """
    a = as_matrix(a, "A")
    m, n = a.shape
    if m > n:
        raise RankDeficientRows(f"A has more rows ({m}) than columns ({n})")
    if m == 0:
        return NullspaceBasis(_frozen(np.eye(n)), _frozen(np.zeros((n, 0))), _frozen(np.zeros(0)))
    if rtol is None:
        rtol = tol.rank_rtol if tol.rank_rtol is not None else max(m, n) * EPS
    w, g, vt = np.linalg.svd(a, full_matrices=True)
    if g[0] == 0.0 or np.count_nonzero(g > rtol * g[0]) < m:
        raise RankDeficientRows(f"A ({m}x{n}) does not have full row rank")
    v1 = vt[:m].T
    pinv = (v1 / g) @ w.T
    v2 = canonicalize_signs(vt[m:].T)
    return NullspaceBasis(_frozen(v2), _frozen(pinv), _frozen(g))


def unit_row_nullspace(row: ArrayLike) -> Array:
    """Orthonormal basis (as columns) of ``N(row^T)`` for one nonzero row vector.

    Uses :func:`householder_complement` on the normalized row; this is the
    cheap special case ``m = 1`` of :func:`nullspace_basis`.
    """
    row = as_vector(row, "row")
    nrm = float(np.linalg.norm(row))
    if nrm == 0.0:
        return np.eye(row.shape[0])
    return householder_complement(row / nrm).T


def solve_consistent(
    a: ArrayLike, b: ArrayLike, tol: float = DEFAULT_TOLERANCES.consistency
) -> tuple[Array, bool]:
    """Least-norm least-squares solution of ``A x = b`` and whether it is exact.

    The system is declared consistent when
    ``||A x - b|| <= tol * max(1, ||b||, ||A|| ||x||)``.
    """
    a = as_matrix(a, "A")
    b = as_vector(b, "b", a.shape[0])
    if a.shape[0] == 0:
        return np.zeros(a.shape[1]), True
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    res = float(np.linalg.norm(a @ x - b))
    scale = max(1.0, float(np.linalg.norm(b)), float(np.linalg.norm(a, 2) * np.linalg.norm(x)))
    return x, res <= tol * scale
