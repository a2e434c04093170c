"""Exception hierarchy.

Two families are distinguished:

* :class:`InputError` -- the caller handed in something malformed (wrong
  shape, asymmetric matrix, non-unit parameter, ...).  The CLI maps these to
  exit code 1.
* :class:`OutcomeError` -- the input is well formed but the mathematical
  problem has no answer of the requested kind (no real solution, infeasible,
  unbounded, ...).  The CLI maps these to exit code 2.
"""

from __future__ import annotations


class CqeError(Exception):
    """Base class of every error raised by this package."""


class InputError(CqeError, ValueError):
    """Malformed input."""


class OutcomeError(CqeError):
    """Well-formed input whose problem has no solution of the requested kind."""


# -- input validation -------------------------------------------------------


class NonFinite(InputError):
    """An array contains NaN or infinity."""


class DimensionMismatch(InputError):
    """Array shapes are incompatible."""


class NotSymmetric(InputError):
    """A matrix that must be symmetric is not (beyond the symmetrization tolerance)."""


class NotPositiveSemidefinite(InputError):
    """A matrix that must be PSD has a clearly negative eigenvalue."""


class NotPositiveDefinite(InputError):
    """A matrix that must be positive definite is singular or indefinite."""


class RNotPositiveDefinite(NotPositiveDefinite):
    """The control weight R(x) is not positive definite."""


class InvalidParams(InputError):
    """A parameter is missing, superfluous or lies outside its subspace."""


class NotUnitLength(InvalidParams):
    """A unit-vector parameter is not of unit length."""


class RankDeficientRows(InputError):
    """An equality-constraint matrix does not have full row rank."""


class PositiveSlack(InputError):
    """The Hamilton-Jacobi-Isaacs slack y must be non-positive."""


class QNotInRange(InputError):
    """The linear term of an unconstrained QP is outside the range of P."""


class SubsetCapExceeded(InputError):
    """Too many inequality constraints for exhaustive subset enumeration."""


class GridTooLarge(InputError):
    """A brute-force grid would have more points than allowed."""


class NotASolution(InputError):
    """A vector handed to an inverse map does not solve the equation."""


# -- mathematical outcomes --------------------------------------------------


class UnsolvableCqe(OutcomeError):
    """The constrained quadratic equation has no real solution."""


class LevelBelowMinimum(OutcomeError):
    """A requested level lies below the minimum of the quadratic function."""


class InconsistentConstraint(OutcomeError):
    """A linear system ``A x = b`` has no solution."""


class InfeasibleProblem(OutcomeError):
    """No feasible candidate was found for an inequality-constrained QP."""


class NoFeasibleGridPoint(OutcomeError):
    """No grid point satisfies the constraints within tolerance."""


class UnboundedProblem(OutcomeError):
    """The objective is unbounded below on the feasible set; ``direction`` is a certificate."""

    def __init__(self, message: str, direction=None):
        super().__init__(message)
        self.direction = direction


class SolverFailure(CqeError):
    """Internal inconsistency (maps to CLI exit code 3)."""
