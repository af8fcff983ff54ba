"""Symplectic linear algebra on phase space ordered as (p_1..p_N, q_1..q_N)."""

from __future__ import annotations

import numpy as np
import scipy.linalg


class DimensionError(ValueError):
    """Raised when array shapes are incompatible with a 2N-dimensional phase space."""


class IndefiniteMatrixError(ValueError):
    """Raised when a quadratic form required to be positive is not."""


def _half_dim(n: int) -> int:
    if n % 2:
        raise DimensionError(f"phase-space dimension must be even, got {n}")
    return n // 2


def standard_symplectic_form(N: int) -> np.ndarray:
    """Return J = [[0, -I], [I, 0]] for N degrees of freedom."""
    if int(N) != N or N < 1:
        raise DimensionError(f"number of modes must be a positive integer, got {N!r}")
    N = int(N)
    J = np.zeros((2 * N, 2 * N))
    J[:N, N:] = -np.eye(N)
    J[N:, :N] = np.eye(N)
    return J


def wedge(a, b) -> float:
    """Symplectic product (J a) . b = a_p . b_q - a_q . b_p."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"wedge needs two vectors of equal length, got {a.shape} and {b.shape}")
    N = _half_dim(a.shape[0])
    return a[:N] @ b[N:] - a[N:] @ b[:N]


def matrix_exponential(A) -> np.ndarray:
    """exp(A) for a dense square matrix.

    Delegates to scipy's Pade scaling-and-squaring (Al-Mohy and Higham), which
    selects the Pade degree and the number of squarings from 1-norm estimates
    and meets double-precision relative accuracy in the regime used here
    (norms up to about 50).
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"matrix_exponential needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix_exponential input has non-finite entries")
    return scipy.linalg.expm(A)


def is_symplectic(S, tol: float = 1e-10) -> bool:
    """True when max|S^T J S - J| <= tol."""
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {S.shape}")
    J = standard_symplectic_form(_half_dim(S.shape[0]))
    return bool(np.max(np.abs(S.T @ J @ S - J)) <= tol)


def symmetrize(M, name: str = "matrix") -> np.ndarray:
    """Check approximate symmetry (1e-10 relative) and return (M + M^T)/2."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    scale = 1.0 + np.max(np.abs(M)) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-10 * scale:
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (M + M.T)


def williamson_frequencies(M, allow_semidefinite: bool = False) -> np.ndarray:
    """Symplectic eigenvalues of a positive quadratic form, ascending.

    These are the moduli of the imaginary eigenvalues +-i w_n of J M. With
    ``allow_semidefinite`` a positive semidefinite M is accepted and its null
    directions show up as zero frequencies.
    """
    M = symmetrize(M, "M")
    N = _half_dim(M.shape[0])
    evals = np.linalg.eigvalsh(M)
    scale = max(1.0, np.max(np.abs(evals)))
    if allow_semidefinite:
        if evals[0] < -1e-10 * scale:
            raise IndefiniteMatrixError(f"M has a negative eigenvalue {evals[0]:.3e}")
    elif evals[0] <= 0:
        raise IndefiniteMatrixError(f"M is not positive definite (min eigenvalue {evals[0]:.3e})")
    J = standard_symplectic_form(N)
    mu = np.linalg.eigvals(J @ M)
    # eigenvalues come as +-i w; sorting the moduli pairs them up
    w = np.sort(np.abs(mu.imag))
    return 0.5 * (w[0::2] + w[1::2])
