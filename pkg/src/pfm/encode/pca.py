"""PCA on low-level descriptors (optionally per subtype block) and on PFM vectors."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

LOW_LEVEL = "low-level"
HIGH_LEVEL = "high-level"


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray   # (D,)
    basis: np.ndarray  # (D, d), block-diagonal when split per subtype
    scope: str = LOW_LEVEL
    subtype_split: Optional[Tuple[int, ...]] = None
    output_split: Optional[Tuple[int, ...]] = None

    @property
    def input_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def output_dim(self) -> int:
        return self.basis.shape[1]

    def reconstruct(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z) @ self.basis.T + self.mean


def _top_basis(Xc: np.ndarray, d: int) -> np.ndarray:
    n, D = Xc.shape
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    tol = s.max(initial=0.0) * max(n, D) * np.finfo(float).eps
    rank = int(np.sum(s > tol))
    if d > rank:
        raise ValueError(f"target {d} exceeds data rank {rank}")
    basis = vt[:d].T.copy()
    # sign convention: largest-magnitude entry of each column is positive
    pivot = basis[np.argmax(np.abs(basis), axis=0), np.arange(d)]
    basis *= np.where(pivot < 0, -1.0, 1.0)
    return basis


def block_targets(split: Sequence[int], fraction: float) -> Tuple[int, ...]:
    return tuple(int(math.ceil(fraction * b - 1e-9)) for b in split)


def fit_pca(vectors, target, scope: str = LOW_LEVEL,
            subtype_split: Optional[Sequence[int]] = None) -> PcaModel:
    """Top principal directions of ``vectors``.

    ``target`` is an output dimension (int) or a fraction in (0, 1]. With
    ``subtype_split`` the fraction is applied to each block independently.
    """
    X = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    n, D = X.shape
    if isinstance(target, float) and not 0 < target <= 1:
        raise ValueError(f"fractional target must lie in (0, 1], got {target}")
    if subtype_split is not None:
        split = tuple(int(b) for b in subtype_split)
        if sum(split) != D:
            raise ValueError(f"subtype split {split} does not sum to input dim {D}")
        if not isinstance(target, float):
            raise ValueError("per-subtype reduction needs a fractional target")
        outs = block_targets(split, target)
    else:
        split = None
        d = int(math.ceil(target * D - 1e-9)) if isinstance(target, float) else int(target)
        outs = (d,)
    if n < sum(outs) + 1:
        raise ValueError(f"need at least {sum(outs) + 1} samples, got {n}")
    mean = X.mean(axis=0)
    Xc = X - mean
    blocks = split or (D,)
    basis = np.zeros((D, sum(outs)))
    r = c = 0
    for b, d in zip(blocks, outs):
        basis[r:r + b, c:c + d] = _top_basis(Xc[:, r:r + b], d)
        r, c = r + b, c + d
    return PcaModel(mean=mean, basis=basis, scope=scope, subtype_split=split,
                    output_split=outs if split else None)


def apply_pca(v, model: PcaModel) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != model.input_dim:
        raise ValueError(f"input dim {v.shape[-1]} does not match PCA input dim {model.input_dim}")
    return (v - model.mean) @ model.basis
