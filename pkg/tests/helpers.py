"""Shared test utilities: planted random data."""

import numpy as np

from cqe.equation import CqeProblem
from cqe.oracles import gram_schmidt  # noqa: F401  (re-exported for tests)


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_psd(rng, n, r, lo=0.2, hi=3.0):
    """PSD matrix of exact planted rank ``r`` with eigenvalues in ``[lo, hi]``."""
    q = random_orthogonal(rng, n)
    s = rng.uniform(lo, hi, r)
    m = (q[:, :r] * s) @ q[:, :r].T
    return (m + m.T) / 2


def random_feasible_qp(rng, n=2, kappa=None, m=None, pd=None):
    """Random feasible QP near the unit box.

    Returns ``(P, q, s, A, b, C, d)`` with ``A`` possibly empty.  Singular
    Hessians are only combined with bounded polygons (inequality normals that
    positively span the plane), so the optimum is always finite.
    """
    kappa = int(rng.integers(1, 5)) if kappa is None else kappa
    m = int(rng.integers(0, 2)) if m is None else m
    if pd is None:
        pd = n != 2 or kappa < 3 or rng.random() < 0.5
    if not pd and n != 2:
        raise ValueError("singular Hessians are only planted in the plane")
    center = rng.uniform(-0.5, 0.5, n)
    if pd:
        p = random_psd(rng, n, n, 0.5, 2.0)
        q = -p @ rng.uniform(-1.0, 1.0, n)
    else:
        p = random_psd(rng, n, int(rng.integers(0, n)), 0.5, 2.0)
        q = rng.standard_normal(n)
    if n == 2 and kappa >= 3 and (not pd or rng.random() < 0.5):
        gap = 2 * np.pi / kappa
        theta = rng.uniform(0, 2 * np.pi) + gap * np.arange(kappa) + rng.uniform(-0.2, 0.2, kappa) * gap / 2
        c = np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        c = rng.standard_normal((kappa, n))
        c /= np.linalg.norm(c, axis=1, keepdims=True)
    d = c @ center + rng.uniform(0.3, 1.0, kappa)
    if m:
        a = rng.standard_normal((m, n))
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        b = a @ center
    else:
        a, b = np.zeros((0, n)), np.zeros(0)
    return p, q, float(rng.normal()), a, b, c, d


def planted_problem(rng, tag, n=None):
    """Random problem of the requested case."""
    if n is None:
        n = int(rng.integers(1 if tag in ("full", "full-unsolvable") else 2, 7))
    r = n if tag.startswith("full") else int(rng.integers(1, n))
    q = random_orthogonal(rng, n)
    s = rng.uniform(0.3, 3.0, r)
    m = (q[:, :r] * s) @ q[:, :r].T
    m = (m + m.T) / 2
    k_in = q[:, :r] @ rng.standard_normal(r)
    kmk = float(np.sum((q[:, :r].T @ k_in) ** 2 / s))
    if tag == "out":
        k = k_in + q[:, r:] @ rng.standard_normal(n - r)
        c = float(rng.normal(scale=3))
    elif tag.endswith("unsolvable"):
        k = k_in
        c = kmk / 4 + rng.uniform(0.1, 2.0)
    else:
        k = k_in
        c = kmk / 4 - rng.uniform(0.1, 2.0)
    return CqeProblem(m, k, c)
