"""Deterministic dense linear algebra for small symmetric matrices.

Eigenvalues are computed with cyclic Jacobi rotation sweeps instead of a
LAPACK call so results do not depend on the BLAS build or thread count.
Every matrix handled by this package is tiny (a few tens of rows), where
Jacobi is both fast and accurate to machine precision.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericsError

_MAX_SWEEPS = 64


def eigvalsh(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending, via cyclic Jacobi sweeps."""
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 1:
        return a[0].copy()
    scale = np.sqrt((a * a).sum())
    if scale == 0.0:
        return np.zeros(n)
    for _ in range(_MAX_SWEEPS):
        off = np.sqrt(2.0 * (np.triu(a, 1) ** 2).sum())
        if off <= 1e-15 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                rows = a[[p, q], :]
                a[[p, q], :] = rot.T @ rows
                cols = a[:, [p, q]]
                a[:, [p, q]] = cols @ rot
                a[p, q] = 0.0
                a[q, p] = 0.0
    else:
        raise NumericsError("Jacobi eigenvalue iteration did not converge")
    return np.sort(np.diag(a))


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value of a (any rectangular shape)."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    gram = a.T @ a if a.shape[0] >= a.shape[1] else a @ a.T
    ev = eigvalsh(gram)
    return float(np.sqrt(max(ev[-1], 0.0)))


def min_eig(a: np.ndarray) -> float:
    return float(eigvalsh(a)[0])


def max_eig(a: np.ndarray) -> float:
    return float(eigvalsh(a)[-1])


def is_symmetric(a: np.ndarray, tol: float = 0.0) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    if tol == 0.0:
        return bool(np.array_equal(a, a.T))
    return bool(np.abs(a - a.T).max() <= tol)
