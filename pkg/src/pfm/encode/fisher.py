"""Fisher Vector encoding (mean and variance gradients, improved normalization)."""
from __future__ import annotations

import numpy as np

from .gmm import GmmModel


def fv_statistics(X, gmm: GmmModel) -> np.ndarray:
    """Unnormalized Fisher Vector, shape (2*K*D,): all mean blocks, then all variance blocks.

    Mean block k:     1/(T sqrt(w_k))   * sum_t g_tk (x_t - mu_k) / sigma_k
    Variance block k: 1/(T sqrt(2 w_k)) * sum_t g_tk ((x_t - mu_k)^2 / sigma_k^2 - 1)
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("empty descriptor set")
    if X.shape[1] != gmm.D:
        raise ValueError(f"descriptor dim {X.shape[1]} does not match GMM dim {gmm.D}")
    T = X.shape[0]
    gamma = gmm.posteriors(X)                   # (T, K)
    s0 = gamma.sum(axis=0)                      # (K,)
    s1 = gamma.T @ X                            # (K, D)
    s2 = gamma.T @ (X * X)
    mu, var = gmm.means, gmm.variances
    sigma = np.sqrt(var)
    g_mu = (s1 - mu * s0[:, None]) / sigma
    g_var = (s2 - 2.0 * mu * s1 + (mu * mu - var) * s0[:, None]) / var
    g_mu /= T * np.sqrt(gmm.weights)[:, None]
    g_var /= T * np.sqrt(2.0 * gmm.weights)[:, None]
    return np.concatenate([g_mu.ravel(), g_var.ravel()])


def power_l2_normalize(v: np.ndarray) -> np.ndarray:
    z = np.sign(v) * np.sqrt(np.abs(v))
    n = np.linalg.norm(z)
    return z / n if n > 0 else z


def fisher_vector(X, gmm: GmmModel, normalize: bool = True) -> np.ndarray:
    fv = fv_statistics(X, gmm)
    return power_l2_normalize(fv) if normalize else fv
