"""Centering and whitening of a moment map (traceless, orthonormal output).

Given ``A_1..A_m`` the preconditioner forms the traceless parts
``A'_i = A_i - (tr A_i / n) I``, their Gram matrix ``G'`` and the symmetric
whitener ``W = G'^{-1/2}``; the output is ``Ahat_i = sum_j W_ij A'_j``.
For trace-one ``X`` we have ``A(X) = W^{-1} Ahat(X) + t`` with
``t_i = tr(A_i)/n``, so ``b`` is carried along as ``bhat = W (b - t)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NotASeparator, RankDeficient
from .moment_map import Instance, MomentMap, apply
from .spectral import lambda_max

RANK_TOL = 1e-12
REFINE_TOL = 1e-13
REFINE_PASSES = 2


@dataclass(frozen=True, eq=False)
class TransformRecord:
    trace_offsets: np.ndarray
    whitener: np.ndarray
    whitener_inv: np.ndarray
    gram_centered_eigs: np.ndarray
    original_n: int
    original_m: int

    @property
    def condition_number(self) -> float:
        e = self.gram_centered_eigs
        return float(e[-1] / e[0])

    def residual_scale(self) -> float:
        """Spectral norm of ``W^{-1}``: bound on how much a preconditioned
        residual can grow when mapped back to original coordinates."""
        return float(np.sqrt(self.gram_centered_eigs[-1]))

    def to_dict(self) -> dict:
        return {
            "original_n": self.original_n,
            "original_m": self.original_m,
            "trace_offsets": self.trace_offsets.tolist(),
            "whitener": self.whitener.tolist(),
            "whitener_inv": self.whitener_inv.tolist(),
            "gram_centered_eigs": self.gram_centered_eigs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransformRecord":
        m = int(d["original_m"])
        rec = cls(
            trace_offsets=np.asarray(d["trace_offsets"], dtype=float),
            whitener=np.asarray(d["whitener"], dtype=float),
            whitener_inv=np.asarray(d["whitener_inv"], dtype=float),
            gram_centered_eigs=np.asarray(d["gram_centered_eigs"], dtype=float),
            original_n=int(d["original_n"]),
            original_m=m,
        )
        if rec.trace_offsets.shape != (m,) or rec.whitener.shape != (m, m) \
                or rec.whitener_inv.shape != (m, m) or rec.gram_centered_eigs.shape != (m,):
            raise InvalidInput("transform record dimensions are inconsistent")
        return rec


@dataclass(frozen=True, eq=False)
class PreconditionedInstance:
    map: MomentMap
    b_hat: np.ndarray
    record: TransformRecord

    def as_instance(self, label: str = "") -> Instance:
        return Instance(self.map, self.b_hat, label=label)


def _fix_signs(U: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def whiten_map(map: MomentMap) -> tuple[MomentMap, TransformRecord]:
    """Center and whiten ``map``; see the module docstring."""
    n, m = map.n, map.m
    t = np.trace(map.mats, axis1=1, axis2=2) / n
    centered = map.mats.copy()
    idx = np.arange(n)
    centered[:, idx, idx] -= t[:, None]

    F = centered.reshape(m, -1)
    Gc = F @ F.T
    Gc = 0.5 * (Gc + Gc.T)
    d, U = np.linalg.eigh(Gc)
    if d[-1] <= 0 or d[0] / d[-1] < RANK_TOL:
        ratio = d[0] / d[-1] if d[-1] > 0 else 0.0
        raise RankDeficient(
            f"I, A_1..A_m are linearly dependent (centered Gram eigenvalue ratio {ratio:.3e})"
        )
    U = _fix_signs(U)
    W = (U / np.sqrt(d)) @ U.T
    W_inv = (U * np.sqrt(d)) @ U.T
    W = 0.5 * (W + W.T)
    W_inv = 0.5 * (W_inv + W_inv.T)
    mats = (W @ F).reshape(m, n, n)

    # An ill-conditioned G' leaves ||G - I|| near cond(G') * eps after one
    # pass; whitening the nearly orthonormal result again removes it.
    for _ in range(REFINE_PASSES):
        R = mats.reshape(m, -1)
        G = R @ R.T
        if np.abs(G - np.eye(m)).max() <= REFINE_TOL:
            break
        e, V = np.linalg.eigh(0.5 * (G + G.T))
        W2 = (V / np.sqrt(e)) @ V.T
        W2_inv = (V * np.sqrt(e)) @ V.T
        mats = (W2 @ R).reshape(m, n, n)
        W, W_inv = W2 @ W, W_inv @ W2_inv

    # Clear rounding in the trace so the traceless check is exact to ~eps.
    mats[:, idx, idx] -= (np.trace(mats, axis1=1, axis2=2) / n)[:, None]
    out = MomentMap(mats, blocks=map.blocks, traceless=True, orthonormal=True)
    record = TransformRecord(t, W, W_inv, d, n, m)
    return out, record


def precondition(inst: Instance) -> PreconditionedInstance:
    """Return the traceless, orthonormal equivalent of ``inst``."""
    pmap, record = whiten_map(inst.map)
    return PreconditionedInstance(pmap, transform_b(record, inst.b), record)


def transform_b(record: TransformRecord, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (record.original_m,):
        raise InvalidInput(f"b has shape {b.shape}, expected ({record.original_m},)")
    return record.whitener @ (b - record.trace_offsets)


def untransform_point(record: TransformRecord, x_hat) -> np.ndarray:
    """Inverse of :func:`transform_b`."""
    return record.whitener_inv @ np.asarray(x_hat, dtype=float) + record.trace_offsets


def backmap_feasible(record: TransformRecord, X: np.ndarray, original: Instance) -> tuple[np.ndarray, float]:
    """A feasibility certificate is coordinate free: return ``X`` and its
    residual ``||A(X) - b||`` measured against the original data."""
    X = np.asarray(X, dtype=float)
    if X.shape != (record.original_n, record.original_n):
        raise InvalidInput("density matrix has the wrong size")
    residual = float(np.linalg.norm(apply(original.map, X) - original.b))
    return X, residual


def backmap_infeasible(record: TransformRecord, u_hat, original: Instance) -> tuple[np.ndarray, float]:
    """Map a separating direction back to original coordinates.

    Returns the unit vector ``u = W u_hat / ||W u_hat||`` and its recomputed
    gap ``b.u - lambda_max(A(u))``.

    Raises
    ------
    NotASeparator
        If the recomputed gap is not strictly positive.
    """
    u_hat = np.asarray(u_hat, dtype=float)
    if u_hat.shape != (record.original_m,):
        raise InvalidInput("separating direction has the wrong length")
    u = record.whitener.T @ u_hat
    norm = np.linalg.norm(u)
    if not norm > 0:
        raise NotASeparator("zero separating direction")
    u = u / norm
    gap = float(original.b @ u - lambda_max(original.map.adjoint(u)))
    if not gap > 0:
        raise NotASeparator(f"back-mapped direction does not separate (gap = {gap:.3e})")
    return u, gap
