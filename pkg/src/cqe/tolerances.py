"""Numerical tolerance policy shared by every module."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class Tolerances:
    """Tolerances used for rank, membership and feasibility decisions.

    Attributes
    ----------
    rank_rtol:
        Relative singular-value cutoff.  ``None`` means ``n * eps`` with ``n``
        the matrix dimension; a value ``sigma`` is kept when it exceeds the
        cutoff times the largest singular value.
    membership:
        Relative tolerance for ``k in R(M)`` style tests.
    boundary:
        Relative tolerance deciding that a discriminant is exactly zero.
    feasibility:
        Relative tolerance for ``c_i^T x <= d_i``.
    consistency:
        Relative residual bound for deciding ``b in R(A)``.
    symmetry:
        Largest relative asymmetry that is silently symmetrized away.
    unit:
        Largest deviation from unit norm that is silently re-normalized.
    tie:
        Relative tolerance for declaring two optimal values equal.
    """

    rank_rtol: float | None = None
    membership: float = 1e-10
    boundary: float = 1e-10
    feasibility: float = 1e-9
    consistency: float = 1e-9
    symmetry: float = 1e-10
    unit: float = 1e-8
    tie: float = 1e-9

    def with_(self, **changes: float | None) -> "Tolerances":
        """Return a copy with the non-``None`` entries of ``changes`` applied."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def rank_cutoff(self, n: int) -> float:
        """Relative rank cutoff for an ``n``-dimensional matrix."""
        if self.rank_rtol is not None:
            return float(self.rank_rtol)
        return max(n, 1) * EPS


DEFAULT_TOLERANCES = Tolerances()
