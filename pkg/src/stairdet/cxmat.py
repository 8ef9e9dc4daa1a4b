"""Dense complex linear algebra used by the detectors.

Matrices and vectors are plain ``numpy`` arrays of dtype ``complex128``.
The functions here validate shapes and return new arrays; inputs are never
modified in place.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NumericError

__all__ = ["as_matrix", "as_vector", "gramian", "matched_filter", "solve_hermitian"]


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or 0 in m.shape:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    return m


def as_vector(v) -> np.ndarray:
    x = np.asarray(v, dtype=np.complex128)
    if x.ndim != 1 or x.size == 0:
        raise DimensionError(f"expected a non-empty 1-D vector, got shape {x.shape}")
    return x


def gramian(H, sigma2: float = 0.0) -> np.ndarray:
    """Return ``H^H H + sigma2 * I``.

    ``sigma2 = 0`` gives the zero-forcing Gramian, a positive value the
    regularized MMSE Gramian.
    """
    H = as_matrix(H)
    B, U = H.shape
    if B < U:
        raise DimensionError(f"channel must have at least as many rows as columns, got {B}x{U}")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be non-negative, got {sigma2}")
    G = H.conj().T @ H
    G[np.diag_indices(U)] += sigma2
    # Force exact Hermitian symmetry; BLAS may leave rounding asymmetry.
    G = 0.5 * (G + G.conj().T)
    return G


def matched_filter(H, y) -> np.ndarray:
    """Return ``H^H y``."""
    H = as_matrix(H)
    y = as_vector(y)
    if H.shape[0] != y.shape[0]:
        raise DimensionError(f"H has {H.shape[0]} rows but y has length {y.shape[0]}")
    return H.conj().T @ y


def solve_hermitian(G, b) -> np.ndarray:
    """Solve ``G x = b`` for Hermitian positive definite ``G`` by Cholesky.

    Raises :class:`NumericError` if ``G`` is not positive definite.
    """
    G = as_matrix(G)
    b = as_vector(b)
    n = G.shape[0]
    if G.shape != (n, n):
        raise DimensionError(f"G must be square, got {G.shape}")
    if b.shape[0] != n:
        raise DimensionError(f"G is {n}x{n} but b has length {b.shape[0]}")
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise NumericError("matrix is not Hermitian positive definite") from exc
    # Forward then backward substitution; n is tiny so plain loops are fine.
    z = np.empty(n, dtype=np.complex128)
    for i in range(n):
        z[i] = (b[i] - L[i, :i] @ z[:i]) / L[i, i]
    x = np.empty(n, dtype=np.complex128)
    Lh = L.conj().T
    for i in range(n - 1, -1, -1):
        x[i] = (z[i] - Lh[i, i + 1:] @ x[i + 1:]) / Lh[i, i]
    return x
