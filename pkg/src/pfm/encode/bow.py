"""Bag-of-words baseline: hard assignment to a k-means codebook."""
from __future__ import annotations

import numpy as np

from .gmm import kmeans


def fit_codebook(descriptors, K: int, seed: int = 0, n_iter: int = 10) -> np.ndarray:
    return kmeans(np.asarray(descriptors, dtype=np.float64), K, seed, n_iter)


def bow_encode(descriptors, codebook: np.ndarray) -> np.ndarray:
    codebook = np.asarray(codebook, dtype=np.float64)
    K = codebook.shape[0]
    X = np.asarray(descriptors, dtype=np.float64)
    if X.size == 0:
        return np.zeros(K)
    X = np.atleast_2d(X)
    dist = ((X[:, None, :] - codebook[None]) ** 2).sum(axis=2)
    assign = np.argmin(dist, axis=1)
    hist = np.bincount(assign, minlength=K).astype(np.float64)
    return hist / hist.sum()
