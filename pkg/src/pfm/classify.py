"""One-vs-all linear max-margin classifiers and multiview majority voting."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

TAU = 1e-12


@dataclass(frozen=True, eq=False)
class OvaModel:
    labels: Tuple[str, ...]       # sorted; index order of weight rows
    weight_vectors: np.ndarray    # (P, d)
    biases: np.ndarray            # (P,)
    reg_C: float = 1.0

    @property
    def dim(self) -> int:
        return self.weight_vectors.shape[1]


@dataclass(frozen=True)
class Prediction:
    label: str
    scores: Tuple[float, ...]
    labels: Tuple[str, ...] = ()

    def score_of(self, label: str) -> float:
        return self.scores[self.labels.index(label)]


def hinge_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, C: float) -> float:
    margins = y * (X @ w + b)
    return float(0.5 * w @ w + C * np.maximum(0.0, 1.0 - margins).sum())


def smo_binary(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-4,
               max_iter: int = 1_000_000) -> Tuple[np.ndarray, float]:
    """Dual solution (alpha, bias) of the bias-unregularized L1 hinge SVM.

    Working-set selection uses second-order information; stops when the
    maximal KKT violation drops below ``tol``.
    """
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    diag = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    for _ in range(max_iter):
        yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(yG[up])])
        m_up = yG[i]
        m_low = yG[low].min()
        if m_up - m_low < tol:
            break
        cand = low & (yG < m_up)
        bdiff = m_up - yG[cand]
        a = K[i, i] + np.diag(K)[cand] - 2.0 * K[i, cand]
        a = np.where(a > 0, a, TAU)
        j = int(np.flatnonzero(cand)[np.argmin(-(bdiff * bdiff) / a)])

        Qi, Qj = Q[i], Q[j]
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(diag[i] + diag[j] + 2.0 * Qi[j], TAU)
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, diff
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, C - diff
            elif alpha[j] > C:
                alpha[j], alpha[i] = C, C + diff
        else:
            quad = max(diag[i] + diag[j] - 2.0 * Qi[j], TAU)
            delta = (G[i] - G[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, s - C
            elif alpha[j] < 0:
                alpha[j], alpha[i] = 0.0, s
            if s > C:
                if alpha[j] > C:
                    alpha[j], alpha[i] = C, s - C
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, s
        G += Qi * (alpha[i] - old_i) + Qj * (alpha[j] - old_j)

    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = yG[free].mean()
    else:
        at_upper = alpha >= C
        ub = np.where(((y < 0) & at_upper) | ((y > 0) & ~at_upper), yG, np.inf).min()
        lb = np.where(((y > 0) & at_upper) | ((y < 0) & ~at_upper), yG, -np.inf).max()
        rho = 0.5 * (ub + lb)
    return alpha, float(-rho)


def train_binary(X: np.ndarray, y: np.ndarray, C: float = 1.0, tol: float = 1e-4,
                 gram: np.ndarray = None) -> Tuple[np.ndarray, float]:
    K = X @ X.T if gram is None else gram
    alpha, b = smo_binary(K, y.astype(np.float64), C, tol)
    return (alpha * y) @ X, b


def train_ova(features, C: float = 1.0, seed: int = 0, tol: float = 1e-4) -> OvaModel:
    """One binary max-margin classifier per label against all others.

    ``features`` is a sequence of (vector, label). The solver is
    deterministic; ``seed`` is accepted for interface stability.
    """
    del seed
    if not features:
        raise ValueError("no training samples")
    X = np.stack([np.asarray(v, dtype=np.float64) for v, _ in features])
    if X.ndim != 2:
        raise ValueError("feature vectors must share one dimension")
    raw = [str(lbl) for _, lbl in features]
    labels = tuple(sorted(set(raw)))
    if len(labels) < 2:
        raise ValueError("need at least two classes")
    gram = X @ X.T
    W = np.zeros((len(labels), X.shape[1]))
    b = np.zeros(len(labels))
    names = np.array(raw)
    for p, lbl in enumerate(labels):
        y = np.where(names == lbl, 1.0, -1.0)
        W[p], b[p] = train_binary(X, y, C, tol, gram)
    return OvaModel(labels, W, b, float(C))


def decision_values(model: OvaModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.dim:
        raise ValueError(f"feature dim {X.shape[-1]} does not match model dim {model.dim}")
    return X @ model.weight_vectors.T + model.biases


def predict(model: OvaModel, feature) -> Prediction:
    scores = decision_values(model, feature)
    if scores.ndim != 1:
        raise ValueError("predict takes a single feature vector")
    # argmax returns the first maximum, i.e. the lexicographically smallest label
    k = int(np.argmax(scores))
    return Prediction(model.labels[k], tuple(float(s) for s in scores), model.labels)


def majority_vote(predictions: Sequence[Prediction]) -> str:
    """Most frequent label; ties go to the largest summed own-class score, then the smallest label."""
    if not predictions:
        raise ValueError("majority_vote needs at least one prediction")
    counts = Counter(p.label for p in predictions)
    top = max(counts.values())
    tied = [lbl for lbl, c in counts.items() if c == top]

    def margin(lbl):
        return math.fsum(p.score_of(lbl) if p.labels else max(p.scores)
                         for p in predictions if p.label == lbl)

    return min(tied, key=lambda lbl: (-margin(lbl), lbl))
