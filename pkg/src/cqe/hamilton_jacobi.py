"""Pointwise Hamilton-Jacobi equations as convex quadratic equations.

For an input-affine system ``xdot = f(x) + B(x) u`` with running cost
``L(x) + u^T R(x) u`` the stationary Hamilton-Jacobi equation

    V_x f - V_x B R^{-1} B^T V_x^T / 4 + L = 0

is, at each fixed state, a CQE in ``z = V_x^T`` with ``M = B R^{-1} B^T / 2``,
``k = -f`` and ``c = -L/2`` (both sides scaled by -2).  The Hamilton-Jacobi
inequality adds a non-positive slack ``y`` to ``c``.  The finite-horizon
(Bellman) version has the unknown ``[V_x, V_t]`` and the always-singular
matrix ``diag(B R^{-1} B^T / 2, 0)``; :func:`hjbe_parameterize` gives its
solution set in the reduced coordinates of ``B R^{-1} B^T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike

from .equation import CqeParams, CqeProblem, RESIDUAL_TOL
from .errors import DimensionMismatch, InputError, InvalidParams, PositiveSlack, RNotPositiveDefinite
from .linalg import Array, as_matrix, as_vector, spectral_decompose, symmetrize, unit_row_nullspace
from .tolerances import DEFAULT_TOLERANCES, Tolerances


@dataclass(frozen=True)
class AffineSystem:
    """Input-affine dynamics ``xdot = f(x) + B(x) u`` with ``f(0) = 0``."""

    n: int
    p: int
    f: Callable[[Array], ArrayLike]
    B: Callable[[Array], ArrayLike]
    name: str = "custom"

    def __post_init__(self) -> None:
        f0 = self.drift(np.zeros(self.n))
        if np.linalg.norm(f0) > 1e-12:
            raise InputError(f"drift must vanish at the origin, got f(0) = {f0}")

    def drift(self, x: ArrayLike) -> Array:
        x = as_vector(x, "x", self.n)
        return as_vector(self.f(x), "f(x)", self.n)

    def input_matrix(self, x: ArrayLike) -> Array:
        x = as_vector(x, "x", self.n)
        b = np.asarray(self.B(x), dtype=float)
        if b.ndim == 1 and self.p == 1:
            b = b.reshape(self.n, 1)
        return as_matrix(b, "B(x)", (self.n, self.p))


@dataclass(frozen=True)
class CostWeights:
    """State weight ``L(x)`` and input weight ``R(x)`` (symmetric PD)."""

    L: Callable[[Array], float]
    R: Callable[[Array], ArrayLike]

    def state_cost(self, x: Array) -> float:
        val = float(self.L(x))
        if not np.isfinite(val):
            raise InputError("L(x) is not finite")
        return val

    def input_weight(self, x: Array, p: int) -> Array:
        r = np.asarray(self.R(x), dtype=float)
        if r.ndim == 0:
            r = r.reshape(1, 1)
        r = as_matrix(r, "R(x)", (p, p))
        return symmetrize(r, DEFAULT_TOLERANCES.symmetry, "R(x)")


def _cho(r: Array) -> tuple:
    try:
        c = scipy.linalg.cho_factor(r)
    except np.linalg.LinAlgError as exc:
        raise RNotPositiveDefinite("R(x) is not positive definite") from exc
    diag = np.abs(np.diag(c[0]))
    if diag.min() <= 1e-12 * max(1.0, diag.max()):
        raise RNotPositiveDefinite("R(x) is numerically singular")
    return c


def control_gram(sys: AffineSystem, cost: CostWeights, x: ArrayLike) -> Array:
    """``B(x) R(x)^{-1} B(x)^T`` computed with a Cholesky solve."""
    x = as_vector(x, "x", sys.n)
    b = sys.input_matrix(x)
    r = cost.input_weight(x, sys.p)
    g = b @ scipy.linalg.cho_solve(_cho(r), b.T)
    return 0.5 * (g + g.T)


def hje_to_cqe(
    sys: AffineSystem, cost: CostWeights, x: ArrayLike, tol: Tolerances = DEFAULT_TOLERANCES
) -> CqeProblem:
    """CQE whose solutions ``z`` are the gradients ``V_x^T`` satisfying the HJE at ``x``."""
    x = as_vector(x, "x", sys.n)
    g = control_gram(sys, cost, x)
    return CqeProblem(g / 2.0, -sys.drift(x), -cost.state_cost(x) / 2.0, tol)


def hji_to_cqe(
    sys: AffineSystem, cost: CostWeights, x: ArrayLike, y: float, tol: Tolerances = DEFAULT_TOLERANCES
) -> CqeProblem:
    """CQE of the Hamilton-Jacobi inequality with slack ``y <= 0`` (``c = -L/2 + y``)."""
    y = float(y)
    if y > 0:
        raise PositiveSlack(f"slack must be non-positive, got {y}")
    p = hje_to_cqe(sys, cost, x, tol)
    return CqeProblem(p.m, p.k, p.c + y, tol)


def optimal_control(vx: ArrayLike, sys: AffineSystem, cost: CostWeights, x: ArrayLike) -> Array:
    """``u = -R(x)^{-1} B(x)^T V_x^T``."""
    x = as_vector(x, "x", sys.n)
    vx = as_vector(np.ravel(vx), "Vx", sys.n)
    b = sys.input_matrix(x)
    r = cost.input_weight(x, sys.p)
    return -scipy.linalg.cho_solve(_cho(r), b.T @ vx)


# -- finite horizon ---------------------------------------------------------


@dataclass(frozen=True)
class HjbeSolutionSet:
    """Solutions ``Vbar = [V_x, V_t]`` of the Bellman equation at one state.

    With ``G = B R^{-1} B^T`` of rank ``r``, ``U1``/``U2`` orthonormal bases of
    its range / null space and ``F(w) = w^T G w / 2 - f^T U1 U1^T w - L/2`` on
    ``R(G)``, the solutions are

    * ``r = n``:  ``Vbar = [tau, F(tau)]``;
    * ``r < n``:  ``Vbar = F(tau)/(||U2 U2^T f||^2 + 1) [U2 U2^T f; 1]
      + [U2 0; 0 1] phi' + [tau; 0]``

    with ``tau in R(G)`` and ``phi'`` in the null space of the row
    ``[f^T U2, 1]``.
    """

    f: Array
    L: float
    gram: Array
    u1: Array
    u2: Array
    tol: Tolerances = field(default=DEFAULT_TOLERANCES, repr=False)

    @property
    def n(self) -> int:
        return self.f.shape[0]

    @property
    def full_rank(self) -> bool:
        return self.u2.shape[1] == 0

    @property
    def rank(self) -> int:
        return self.u1.shape[1]

    @cached_property
    def f_null(self) -> Array:
        """``U2 U2^T f``."""
        return self.u2 @ (self.u2.T @ self.f)

    @cached_property
    def f_range(self) -> Array:
        return self.u1 @ (self.u1.T @ self.f)

    @cached_property
    def phi_basis(self) -> Array:
        """Orthonormal columns spanning ``N([f^T U2, 1])`` in ``R^{n-r+1}``."""
        row = np.append(self.u2.T @ self.f, 1.0)
        return unit_row_nullspace(row)

    @cached_property
    def lift(self) -> Array:
        """``[U2 0; 0 1]``, mapping ``phi'`` into ``R^{n+1}``."""
        n, k = self.u2.shape
        out = np.zeros((n + 1, k + 1))
        out[:n, :k] = self.u2
        out[n, k] = 1.0
        return out

    def level(self, w: ArrayLike) -> float | Array:
        """``F(w) = w^T G w / 2 - f^T U1 U1^T w - L/2`` (vectorized)."""
        w = np.asarray(w, dtype=float)
        val = 0.5 * np.einsum("...i,ij,...j->...", w, self.gram, w) - w @ self.f_range - self.L / 2.0
        return float(val) if np.ndim(val) == 0 else val

    def _in_range(self, w: Array, what: str) -> Array:
        if self.u2.shape[1]:
            off = np.linalg.norm(w @ self.u2, axis=-1)
            if np.any(off > self.tol.membership * np.maximum(1.0, np.linalg.norm(w, axis=-1))):
                raise InvalidParams(f"{what} must lie in R(B R^-1 B^T)")
        return (w @ self.u1) @ self.u1.T

    def evaluate(self, tau1: ArrayLike, phi_prime: ArrayLike | None = None, w1: ArrayLike | None = None) -> Array:
        """``Vbar`` for parameters ``tau1`` (required), ``phi'`` and optional ``w1``.

        ``w1`` is an alternative point of ``R(G)`` on the same level of ``F``
        as ``tau1``; it is checked for consistency and otherwise unused.
        """
        tau = np.asarray(tau1, dtype=float)
        if tau.shape[-1:] != (self.n,):
            raise DimensionMismatch(f"tau1 must have trailing dimension {self.n}")
        tau = self._in_range(tau, "tau1")
        lev = np.asarray(self.level(tau))
        if w1 is not None:
            w = self._in_range(np.asarray(w1, dtype=float), "w1")
            got = np.asarray(self.level(w))
            if np.any(np.abs(got - lev) > RESIDUAL_TOL * np.maximum(1.0, np.abs(lev))):
                raise InvalidParams("w1 is not on the level set of tau1")
        batch = tau.shape[:-1]
        head = self.f_null / (self.f_null @ self.f_null + 1.0)
        vx = tau + lev[..., None] * head
        vt = lev / (self.f_null @ self.f_null + 1.0)
        out = np.concatenate([vx, np.reshape(vt, batch + (1,))], axis=-1)
        if phi_prime is not None:
            phi = np.asarray(phi_prime, dtype=float)
            dim = self.u2.shape[1] + 1
            if phi.shape[-1:] != (dim,):
                raise DimensionMismatch(f"phi' must have trailing dimension {dim}")
            row = np.append(self.u2.T @ self.f, 1.0)
            if np.any(np.abs(phi @ row) > self.tol.membership * np.maximum(1.0, np.linalg.norm(phi, axis=-1))):
                raise InvalidParams("phi' must lie in N([f^T U2, 1])")
            out = out + phi @ self.lift.T
        return out

    def residual(self, vbar: ArrayLike) -> float | Array:
        """``|V_x G V_x^T / 2 - f^T V_x^T - V_t - L/2|``."""
        v = np.asarray(vbar, dtype=float)
        vx, vt = v[..., : self.n], v[..., self.n]
        val = 0.5 * np.einsum("...i,ij,...j->...", vx, self.gram, vx) - vx @ self.f - vt - self.L / 2.0
        out = np.abs(val)
        return float(out) if np.ndim(out) == 0 else out

    def residual_scale(self, vbar: ArrayLike) -> float | Array:
        v = np.asarray(vbar, dtype=float)
        vn = np.linalg.norm(v, axis=-1)
        gn = float(np.linalg.norm(self.gram, 2)) / 2.0
        fn = float(np.sqrt(self.f @ self.f + 1.0))
        out = np.maximum.reduce([np.ones_like(vn), gn * vn**2, fn * vn, np.full_like(vn, abs(self.L) / 2)])
        return float(out) if np.ndim(out) == 0 else out

    def to_cqe(self) -> CqeProblem:
        """The same equation as an ``(n+1)``-dimensional generic CQE."""
        n = self.n
        mbar = np.zeros((n + 1, n + 1))
        mbar[:n, :n] = self.gram / 2.0
        return CqeProblem(mbar, -np.append(self.f, 1.0), -self.L / 2.0, self.tol)

    def generic_params(self, tau1: ArrayLike, phi_prime: ArrayLike | None = None) -> CqeParams:
        """Parameters of the generic CQE route matching ``(tau1, phi')``."""
        tau = np.asarray(tau1, dtype=float)
        zero = np.zeros(tau.shape[:-1] + (1,))
        tau_bar = np.concatenate([tau, zero], axis=-1)
        phi_bar = None if phi_prime is None else np.asarray(phi_prime, dtype=float) @ self.lift.T
        return CqeParams(tau=tau_bar, w=tau_bar, phi=phi_bar)

    def sample(self, rng: np.random.Generator, size: int | None = None, scale: float = 1.0) -> tuple[Array, Array]:
        """Random admissible ``(tau1, phi')``."""
        lead = () if size is None else (size,)
        tau = scale * (rng.standard_normal(lead + (self.rank,)) @ self.u1.T)
        basis = self.phi_basis
        phi = scale * (rng.standard_normal(lead + (basis.shape[1],)) @ basis.T)
        return tau, phi


def hjbe_parameterize(
    sys: AffineSystem, cost: CostWeights, x: ArrayLike, tol: Tolerances = DEFAULT_TOLERANCES
) -> HjbeSolutionSet:
    """Solution set of the finite-horizon Hamilton-Jacobi-Bellman CQE at ``x``."""
    x = as_vector(x, "x", sys.n)
    g = control_gram(sys, cost, x)
    sd = spectral_decompose(g, tol=tol)
    return HjbeSolutionSet(sys.drift(x), cost.state_cost(x), g, np.asarray(sd.u1), np.asarray(sd.u2), tol)


# -- pointwise data -------------------------------------------------------------


def _pointwise_gram(b: ArrayLike, r: ArrayLike) -> Array:
    b = as_matrix(b, "B")
    r = as_matrix(r, "R", (b.shape[1], b.shape[1]))
    g = b @ scipy.linalg.cho_solve(_cho(r), b.T)
    return 0.5 * (g + g.T)


def hje_cqe_from_values(
    f: ArrayLike,
    b: ArrayLike,
    r: ArrayLike,
    l: float,
    y: float = 0.0,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> CqeProblem:
    """HJE (``y = 0``) or HJI (``y < 0``) CQE from values ``f(x), B(x), R(x), L(x)`` at one state."""
    y = float(y)
    if y > 0:
        raise PositiveSlack(f"slack must be non-positive, got {y}")
    g = _pointwise_gram(b, r)
    f = as_vector(f, "f", g.shape[0])
    return CqeProblem(g / 2.0, -f, -float(l) / 2.0 + y, tol)


def hjbe_from_values(
    f: ArrayLike, b: ArrayLike, r: ArrayLike, l: float, tol: Tolerances = DEFAULT_TOLERANCES
) -> HjbeSolutionSet:
    """Bellman-equation solution set from values at one state."""
    g = _pointwise_gram(b, r)
    f = as_vector(f, "f", g.shape[0])
    sd = spectral_decompose(g, tol=tol)
    return HjbeSolutionSet(f, float(l), g, np.asarray(sd.u1), np.asarray(sd.u2), tol)


# -- built-in example ---------------------------------------------------------


def exp_drift_system() -> tuple[AffineSystem, CostWeights]:
    """Two-state example with a known value function.

    ``f = [x2, -x1 e^{x1} + x2^2/2]``, ``B = [0, e^{x1}]^T``, ``L = 2 x2^2``,
    ``R = 2``.  The value function ``V = x1^2 + x2^2 e^{-x1}`` solves its HJE
    and gives the regulator ``u = -x2``.
    """

    def f(x: Array) -> Array:
        return np.array([x[1], -x[0] * np.exp(x[0]) + x[1] ** 2 / 2])

    def b(x: Array) -> Array:
        return np.array([[0.0], [np.exp(x[0])]])

    sys = AffineSystem(2, 1, f, b, name="exp-drift-2d")
    cost = CostWeights(L=lambda x: 2.0 * x[1] ** 2, R=lambda x: np.array([[2.0]]))
    return sys, cost


def exp_drift_value_gradient(x: ArrayLike) -> Array:
    """``V_x`` of ``V = x1^2 + x2^2 e^{-x1}`` for :func:`exp_drift_system`."""
    x1, x2 = as_vector(x, "x", 2)
    return np.array([2 * x1 - x2**2 * np.exp(-x1), 2 * x2 * np.exp(-x1)])


def example_system() -> tuple[AffineSystem, CostWeights]:
    """The built-in two-state example (alias of :func:`exp_drift_system`)."""
    return exp_drift_system()


SYSTEMS: dict[str, Callable[[], tuple[AffineSystem, CostWeights]]] = {
    "exp-drift-2d": exp_drift_system,
}


def get_system(name: str) -> tuple[AffineSystem, CostWeights]:
    try:
        return SYSTEMS[name]()
    except KeyError:
        raise InputError(f"unknown system '{name}'; known: {sorted(SYSTEMS)}") from None
