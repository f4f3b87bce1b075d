"""Dense symmetric-matrix kernels: eigendecomposition, normalized exponential,
stable log-trace-exp and extreme eigenvalues.

Matrices are plain ``numpy.ndarray`` objects. :func:`as_symmetric` is the
single gate through which user data enters; it rejects non-finite entries and
symmetrizes as ``(M + M.T) / 2`` so downstream code may assume exact symmetry.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InvalidInput


class SpectralDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns are eigenvectors


def as_symmetric(M, n: int | None = None) -> np.ndarray:
    """Return a finite, exactly symmetric float64 copy of ``M``.

    Raises
    ------
    InvalidInput
        If ``M`` is not square, has the wrong size, or holds NaN/inf.
    """
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {A.shape}")
    if n is not None and A.shape[0] != n:
        raise InvalidInput(f"expected a {n}x{n} matrix, got {A.shape[0]}x{A.shape[0]}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput("matrix has non-finite entries")
    return 0.5 * (A + A.T)


def _check_finite(M: np.ndarray) -> None:
    if not np.all(np.isfinite(M)):
        raise InvalidInput("matrix has non-finite entries")


def eigh(M: np.ndarray) -> SpectralDecomposition:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending."""
    M = np.asarray(M, dtype=float)
    _check_finite(M)
    lam, V = np.linalg.eigh(M)
    return SpectralDecomposition(lam, V)


def logsumexp(lam: np.ndarray) -> float:
    """``log(sum(exp(lam)))`` shifted by the maximum entry."""
    lam = np.asarray(lam, dtype=float)
    top = lam.max()
    return float(top + np.log(np.sum(np.exp(lam - top))))


def softmax(lam: np.ndarray) -> tuple[np.ndarray, float]:
    """Return ``(p, logZ)`` with ``p = exp(lam - logZ)``."""
    lam = np.asarray(lam, dtype=float)
    top = lam.max()
    w = np.exp(lam - top)
    total = w.sum()
    return w / total, float(top + np.log(total))


def exp1_from_spectrum(dec: SpectralDecomposition) -> tuple[np.ndarray, np.ndarray, float]:
    """Normalized exponential from a precomputed decomposition.

    Returns ``(X, p, logZ)`` where ``p`` are the eigenvalues of ``X`` (same
    order as ``dec.eigenvalues``).
    """
    p, logZ = softmax(dec.eigenvalues)
    V = dec.eigenvectors
    X = (V * p) @ V.T
    return 0.5 * (X + X.T), p, logZ


def exp1(M: np.ndarray) -> tuple[np.ndarray, float]:
    """Trace-one matrix exponential ``exp(M) / tr exp(M)`` and ``log tr exp(M)``.

    Never overflows: the spectrum is shifted by its maximum before
    exponentiation, so ``exp1(M + c*I) == exp1(M)`` in floating point for
    moderate ``c``.

    >>> X, logZ = exp1(np.zeros((3, 3)))
    >>> np.allclose(X, np.eye(3) / 3), round(logZ, 12) == round(np.log(3), 12)
    (True, True)
    """
    X, _, logZ = exp1_from_spectrum(eigh(M))
    return X, logZ


def logtrexp(M: np.ndarray) -> float:
    return logsumexp(np.linalg.eigvalsh(_finite(M)))


def lambda_extremes(M: np.ndarray) -> tuple[float, float]:
    """Smallest and largest eigenvalue of a symmetric matrix."""
    lam = np.linalg.eigvalsh(_finite(M))
    return float(lam[0]), float(lam[-1])


def lambda_max(M: np.ndarray) -> float:
    return lambda_extremes(M)[1]


def _finite(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    _check_finite(M)
    return M


def entropy_term(p: np.ndarray) -> float:
    """``sum_k p_k log p_k`` with the convention ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    pos = p > 0
    return float(np.sum(p[pos] * np.log(p[pos])))


def density_violation(X: np.ndarray) -> tuple[float, float]:
    """Return ``(-lambda_min(X), |tr X - 1|)``; both are <= 0 / 0 for a density."""
    X = _finite(X)
    lam = np.linalg.eigvalsh(0.5 * (X + X.T))
    return float(-lam[0]), float(abs(np.trace(X) - 1.0))


def is_density(X: np.ndarray, tol: float = 1e-12) -> bool:
    neg, tr = density_violation(X)
    return neg <= tol and tr <= tol
