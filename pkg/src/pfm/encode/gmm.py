"""k-means and diagonal-covariance Gaussian mixtures fitted by EM."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.special import logsumexp

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class GmmModel:
    weights: np.ndarray    # (K,)
    means: np.ndarray      # (K, D)
    variances: np.ndarray  # (K, D), sigma^2
    loglik_trace: List[float] = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.means.shape[0]

    @property
    def D(self) -> int:
        return self.means.shape[1]

    def log_joint(self, X: np.ndarray) -> np.ndarray:
        """log w_k + log N(x_t; mu_k, sigma_k^2), shape (T, K)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        prec = 1.0 / self.variances
        # expand (x - mu)^2 / s2 without a (T, K, D) temporary
        quad = (X * X) @ prec.T - 2.0 * X @ (self.means * prec).T + np.sum(self.means ** 2 * prec, axis=1)
        log_det = np.sum(np.log(self.variances), axis=1)
        return np.log(self.weights) - 0.5 * (self.D * LOG_2PI + log_det + quad)

    def posteriors(self, X: np.ndarray) -> np.ndarray:
        lj = self.log_joint(X)
        return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))

    def mean_loglik(self, X: np.ndarray) -> float:
        return float(np.mean(logsumexp(self.log_joint(X), axis=1)))


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None]
    return np.maximum(d, 0.0)


def farthest_point_init(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    idx = [int(rng.integers(len(X)))]
    dmin = _sq_dists(X, X[idx])[:, 0]
    for _ in range(1, K):
        nxt = int(np.argmax(dmin))
        idx.append(nxt)
        dmin = np.minimum(dmin, _sq_dists(X, X[nxt:nxt + 1])[:, 0])
    return X[idx].copy()


def kmeans(X: np.ndarray, K: int, seed: int = 0, n_iter: int = 10) -> np.ndarray:
    """Lloyd iterations from farthest-point seeding; returns (K, D) centroids."""
    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(seed)
    C = farthest_point_init(X, K, rng)
    for _ in range(n_iter):
        assign = np.argmin(_sq_dists(X, C), axis=1)
        for k in range(K):
            members = X[assign == k]
            if len(members):
                C[k] = members.mean(axis=0)
    return C


def fit_gmm(X, K: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-5,
            kmeans_iter: int = 10, floor_ratio: float = 1e-4) -> GmmModel:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("descriptors must form a (T, D) matrix")
    if K < 1:
        raise ValueError("K must be positive")
    if len(X) < 10 * K:
        raise ValueError(f"need at least {10 * K} descriptors for K={K}, got {len(X)}")
    if not np.all(np.isfinite(X)):
        raise ValueError("descriptors contain non-finite values")
    data_var = X.var(axis=0)
    if not np.any(data_var > 0):
        raise ValueError("degenerate data: all descriptors identical")
    floor = floor_ratio * np.where(data_var > 0, data_var, data_var[data_var > 0].min())

    C = kmeans(X, K, seed, kmeans_iter)
    assign = np.argmin(_sq_dists(X, C), axis=1)
    weights = np.empty(K)
    variances = np.empty_like(C)
    for k in range(K):
        members = X[assign == k]
        weights[k] = max(len(members), 1)
        variances[k] = members.var(axis=0) if len(members) > 1 else data_var
    model = GmmModel(weights / weights.sum(), C, np.maximum(variances, floor))

    trace: List[float] = []
    for _ in range(max_iter):
        lj = model.log_joint(X)
        norm = logsumexp(lj, axis=1, keepdims=True)
        trace.append(float(norm.mean()))
        if len(trace) > 1 and (trace[-1] - trace[-2]) < tol * abs(trace[-2]):
            break
        resp = np.exp(lj - norm)
        nk = resp.sum(axis=0)
        # components that lost all mass keep their parameters
        alive = nk > 1e-10 * len(X)
        safe = np.where(alive, nk, 1.0)
        means = np.where(alive[:, None], resp.T @ X / safe[:, None], model.means)
        sq = np.empty_like(means)
        for k in range(K):
            d = X - means[k]
            sq[k] = resp[:, k] @ (d * d) / safe[k]
        variances = np.where(alive[:, None], np.maximum(sq, floor), model.variances)
        weights = np.maximum(nk / len(X), 1e-300)
        model = GmmModel(weights / weights.sum(), means, variances)
    else:
        trace.append(model.mean_loglik(X))
    return GmmModel(model.weights, model.means, model.variances, trace)
