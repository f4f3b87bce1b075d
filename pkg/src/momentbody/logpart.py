"""The log-partition dual ``f(y) = log tr exp A(y) - b.y`` and its derivatives.

One symmetric eigendecomposition of ``A(y)`` gives everything: the value
(shift-stabilized log-sum-exp of the spectrum), the density
``X(y) = exp(A(y)) / tr exp(A(y))`` and the gradient ``A(X(y)) - b``.

The Hessian integral ``int_0^1 tr(A_i X^s A_j X^{1-s}) ds`` collapses in the
eigenbasis of ``X`` to a weighted sum with the logarithmic mean of pairs of
eigenvalues as weights; :func:`logmean_matrix` evaluates those weights
without cancellation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInput
from .moment_map import MomentMap
from .spectral import eigh, exp1_from_spectrum

# Below this gap in log-space the logarithmic mean switches to its series.
LOGMEAN_SERIES_CUTOFF = 1e-6


@dataclass(frozen=True, eq=False)
class DualEval:
    value: float
    gradient: np.ndarray
    density: np.ndarray
    logZ: float
    spectrum: np.ndarray  # eigenvalues of A(y), ascending


def _check(map: MomentMap, b, y) -> tuple[np.ndarray, np.ndarray]:
    b = np.asarray(b, dtype=float)
    y = np.asarray(y, dtype=float)
    if b.shape != (map.m,) or y.shape != (map.m,):
        raise InvalidInput(f"b and y must have length m={map.m}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(b))):
        raise InvalidInput("non-finite b or y")
    return b, y


def evaluate(map: MomentMap, b, y) -> DualEval:
    """Value, gradient and density of the dual at ``y``."""
    b, y = _check(map, b, y)
    dec = eigh(map.adjoint(y))
    X, _, logZ = exp1_from_spectrum(dec)
    grad = map.flat @ X.ravel() - b
    return DualEval(float(logZ - b @ y), grad, X, logZ, dec.eigenvalues)


def value(map: MomentMap, b, y) -> float:
    return evaluate(map, b, y).value


def logmean_matrix(lam: np.ndarray, logZ: float) -> np.ndarray:
    """``Phi[k, l] = L(p_k, p_l)`` with ``p = exp(lam - logZ)`` and ``L`` the
    logarithmic mean ``(a - b) / (log a - log b)``, ``L(a, a) = a``.

    Written as ``max(p_k, p_l) * (1 - exp(-d)) / d`` with ``d = |lam_k - lam_l|``
    so that it neither overflows nor cancels; for ``d`` below
    :data:`LOGMEAN_SERIES_CUTOFF` the quotient uses ``1 - d/2 + d^2/6``.
    """
    lam = np.asarray(lam, dtype=float)
    logp = lam - logZ
    top = np.maximum.outer(logp, logp)
    d = np.abs(np.subtract.outer(lam, lam))
    small = d < LOGMEAN_SERIES_CUTOFF
    ratio = np.empty_like(d)
    ds = d[small]
    ratio[small] = 1.0 - ds / 2.0 + ds * ds / 6.0
    dl = d[~small]
    ratio[~small] = -np.expm1(-dl) / dl
    return np.exp(top) * ratio


def hessian(map: MomentMap, b, y) -> np.ndarray:
    """Exact Hessian of the dual at ``y`` (for tests and diagnostics)."""
    b, y = _check(map, b, y)
    dec = eigh(map.adjoint(y))
    lam, V = dec
    top = lam.max()
    logZ = top + np.log(np.sum(np.exp(lam - top)))
    p = np.exp(lam - logZ)
    phi = logmean_matrix(lam, logZ)
    # B_i = V^T A_i V for every i, stacked as (m, n*n)
    B = np.matmul(np.matmul(V.T[None], map.mats), V[None])
    mean = np.einsum("ikk,k->i", B, p)
    Bf = B.reshape(map.m, -1)
    H = (Bf * phi.ravel()) @ Bf.T - np.outer(mean, mean)
    return 0.5 * (H + H.T)


def evaluate_blocks(maps: Sequence[MomentMap], b, y) -> DualEval:
    """Block-separable dual ``log sum_j tr exp A_j(y) - b.y``.

    Uses one eigendecomposition per block. The returned ``density`` is the
    block-diagonal direct sum of the per-block densities (total trace one);
    ``spectrum`` is the sorted concatenation of the block spectra.
    """
    if not maps:
        raise InvalidInput("need at least one block")
    m = maps[0].m
    if any(mp.m != m for mp in maps):
        raise InvalidInput("block maps must share m")
    b, y = _check(maps[0], b, y)

    decs = [eigh(mp.adjoint(y)) for mp in maps]
    spectra = np.concatenate([d.eigenvalues for d in decs])
    top = spectra.max()
    logZ = float(top + np.log(np.sum(np.exp(spectra - top))))

    n = sum(mp.n for mp in maps)
    X = np.zeros((n, n))
    Ax = np.zeros(m)
    start = 0
    for mp, (lam, V) in zip(maps, decs):
        p = np.exp(lam - logZ)
        Xj = (V * p) @ V.T
        Xj = 0.5 * (Xj + Xj.T)
        Ax += mp.flat @ Xj.ravel()
        X[start:start + mp.n, start:start + mp.n] = Xj
        start += mp.n
    return DualEval(float(logZ - b @ y), Ax - b, X, logZ, np.sort(spectra))


def spectral_bound(n: int) -> float:
    """Bound on ``|lambda_i(A(y))|`` over the sublevel set of ``f(0)`` for a
    normalized map and interior ``b``."""
    return 2.0 * (n - 1) * np.log(n) / n if n > 1 else 0.0
