"""The linear map X -> (tr(A_i X))_i, its adjoint and Gram matrix."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BlockViolation, InvalidInput, MissingBlockStructure
from .spectral import as_symmetric

TRACELESS_TOL = 1e-10
ORTHONORMAL_TOL = 1e-8


def _block_slices(blocks: Sequence[int]) -> list[slice]:
    out, start = [], 0
    for size in blocks:
        out.append(slice(start, start + size))
        start += size
    return out


def _block_mask(n: int, blocks: Sequence[int]) -> np.ndarray:
    mask = np.zeros((n, n), dtype=bool)
    for sl in _block_slices(blocks):
        mask[sl, sl] = True
    return mask


@dataclass(frozen=True, eq=False)
class MomentMap:
    """Dense stack of ``m`` symmetric ``n x n`` matrices ``A_i``.

    Parameters
    ----------
    mats : array_like, shape (m, n, n)
        Each slice is symmetrized on construction.
    blocks : sequence of int, optional
        Declared block-diagonal partition ``(n_1, ..., n_p)``; off-block
        entries must be exactly zero.
    traceless, orthonormal : bool
        Normalization flags. They are checked, not trusted.
    """

    mats: np.ndarray
    blocks: tuple[int, ...] | None = None
    traceless: bool = False
    orthonormal: bool = False
    _flat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.array(self.mats, dtype=float)
        if A.ndim == 2:
            A = A[None]
        if A.ndim != 3 or A.shape[1] != A.shape[2] or A.shape[0] < 1 or A.shape[1] < 1:
            raise InvalidInput(f"mats must have shape (m, n, n), got {A.shape}")
        if not np.all(np.isfinite(A)):
            raise InvalidInput("constraint matrices have non-finite entries")
        A = 0.5 * (A + A.transpose(0, 2, 1))
        A.setflags(write=False)
        object.__setattr__(self, "mats", A)
        flat = A.reshape(A.shape[0], -1)
        object.__setattr__(self, "_flat", flat)

        if self.blocks is not None:
            blocks = tuple(int(b) for b in self.blocks)
            if any(b < 1 for b in blocks) or sum(blocks) != self.n:
                raise InvalidInput(f"block sizes {blocks} do not partition n={self.n}")
            object.__setattr__(self, "blocks", blocks)
            off = ~_block_mask(self.n, blocks)
            if np.any(A[:, off] != 0.0):
                raise BlockViolation("matrices have nonzero entries outside the declared blocks")

        if self.traceless:
            tr = np.abs(np.trace(A, axis1=1, axis2=2))
            if tr.max() > TRACELESS_TOL:
                raise InvalidInput(f"traceless flag set but max |tr A_i| = {tr.max():.3e}")
        if self.orthonormal:
            err = np.abs(self.gram() - np.eye(self.m)).max()
            if err > ORTHONORMAL_TOL:
                raise InvalidInput(f"orthonormal flag set but max |G - I| = {err:.3e}")

    @property
    def m(self) -> int:
        return self.mats.shape[0]

    @property
    def n(self) -> int:
        return self.mats.shape[1]

    @property
    def flat(self) -> np.ndarray:
        """``(m, n*n)`` row-major view of the matrices."""
        return self._flat

    @property
    def normalized(self) -> bool:
        return self.traceless and self.orthonormal

    def apply(self, X) -> np.ndarray:
        return apply(self, X)

    def adjoint(self, y) -> np.ndarray:
        return adjoint(self, y)

    def gram(self) -> np.ndarray:
        return gram(self)


def apply(map: MomentMap, X) -> np.ndarray:
    """``(tr(A_i X))_i`` for symmetric ``X``."""
    X = np.asarray(X, dtype=float)
    if X.shape != (map.n, map.n):
        raise InvalidInput(f"expected a {map.n}x{map.n} matrix, got shape {X.shape}")
    return map.flat @ X.ravel()


def adjoint(map: MomentMap, y) -> np.ndarray:
    """``A(y) = sum_i y_i A_i``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (map.m,):
        raise InvalidInput(f"expected a vector of length {map.m}, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InvalidInput("y has non-finite entries")
    return (y @ map.flat).reshape(map.n, map.n)


def gram(map: MomentMap) -> np.ndarray:
    """``G_ij = tr(A_i A_j)``."""
    F = map.flat
    G = F @ F.T
    return 0.5 * (G + G.T)


def block_split(map: MomentMap) -> list[MomentMap]:
    """Split a block-diagonal map into one map per diagonal block."""
    if map.blocks is None:
        raise MissingBlockStructure("map has no declared block structure")
    return [
        MomentMap(map.mats[:, sl, sl], traceless=False, orthonormal=False)
        for sl in _block_slices(map.blocks)
    ]


def block_join(parts: Sequence[MomentMap]) -> MomentMap:
    """Direct sum of block maps sharing the same ``m``."""
    if not parts:
        raise InvalidInput("need at least one block")
    m = parts[0].m
    if any(p.m != m for p in parts):
        raise InvalidInput("block maps must share m")
    sizes = [p.n for p in parts]
    n = sum(sizes)
    mats = np.zeros((m, n, n))
    for sl, p in zip(_block_slices(sizes), parts):
        mats[:, sl, sl] = p.mats
    return MomentMap(mats, blocks=tuple(sizes))


@dataclass(frozen=True, eq=False)
class Instance:
    """A moment map together with a target vector ``b``."""

    map: MomentMap
    b: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        b = np.array(self.b, dtype=float).reshape(-1)
        if b.shape != (self.map.m,):
            raise InvalidInput(f"b has length {b.size}, map has m={self.map.m}")
        if not np.all(np.isfinite(b)):
            raise InvalidInput("b has non-finite entries")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.map.n

    @property
    def m(self) -> int:
        return self.map.m


def from_matrices(mats, **kwargs) -> MomentMap:
    """Build a map from a list of matrices, symmetrizing each."""
    return MomentMap(np.stack([as_symmetric(A) for A in mats]), **kwargs)
