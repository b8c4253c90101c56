"""Dense kernel: Cholesky, triangular solves, trace of inverse, spectral norm.

Matrices are plain float64 ``numpy.ndarray`` objects; the lower Cholesky
factor is returned as one as well.  Factorization and solves are delegated
to LAPACK via numpy/scipy, with validation and error taxonomy owned here.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

_POWER_ITER_SEED = 0x5EED


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Symmetric input has a non-positive pivot (not positive definite)."""


class SingularTriangularError(np.linalg.LinAlgError):
    """Triangular factor carries a zero diagonal entry."""


def cholesky(a: np.ndarray, sym_tol: float = 1e-12) -> np.ndarray:
    """Lower-triangular R with R R^T = a, for symmetric positive-definite a.

    Raises ``ValueError`` if a is not symmetric within ``sym_tol`` relative
    tolerance and ``NotPositiveDefiniteError`` on factorization breakdown.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = np.abs(a).max()
    if scale > 0 and np.abs(a - a.T).max() > sym_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            "matrix is not positive definite (non-positive pivot)"
        ) from exc


def tri_solve_right(
    w: np.ndarray, r: np.ndarray, transpose: bool = False
) -> np.ndarray:
    """Solve X R = W (or X R^T = W when ``transpose``) for lower-triangular R."""
    r = np.asarray(r, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if (np.diag(r) == 0.0).any():
        raise SingularTriangularError("triangular factor has a zero diagonal")
    # X R = W  <=>  R^T X^T = W^T ; X R^T = W  <=>  R X^T = W^T
    xt = solve_triangular(r, w.T, lower=True, trans="N" if transpose else "T")
    return xt.T


def trace_of_inverse(a: np.ndarray) -> float:
    """tr(a^{-1}) for SPD a, via the squared Frobenius norm of R^{-1}."""
    r = cholesky(a)
    r_inv = solve_triangular(r, np.eye(r.shape[0]), lower=True)
    return float((r_inv * r_inv).sum())


def spectral_norm(a: np.ndarray, iters: int = 500, tol: float = 1e-10) -> float:
    """Largest singular value by power iteration on a^T a.

    The start vector comes from a fixed seed so results are reproducible.
    The Rayleigh-quotient estimate approaches the true value from below.
    Returns 0.0 for a zero matrix.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    if not np.any(a):
        return 0.0
    rng = np.random.default_rng(_POWER_ITER_SEED)
    v = rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        u = a @ v
        s = np.linalg.norm(u)
        if s == 0.0:
            return 0.0
        w = a.T @ u
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return float(s)
        v = w / nw
        if abs(s - sigma) <= tol * s:
            sigma = s
            break
        sigma = s
    return float(sigma)


def gaussian_matrix(
    rows: int,
    cols: int,
    sigma: float,
    rng: np.random.Generator | int | None = None,
) -> np.ndarray:
    """rows x cols matrix of IID N(0, sigma^2) entries from a seeded stream."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return sigma * rng.standard_normal((rows, cols))
