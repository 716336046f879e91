"""Fallback person localizer: per-pixel Gaussian mixture background model."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np
from scipy import ndimage

from .media import FrameSequence
from .persons import FULL_BODY, BoundingBox


@dataclass(frozen=True)
class BackgroundParams:
    n_components: int = 3
    em_iters: int = 15
    var_floor: float = (3.0 / 255.0) ** 2
    bg_weight: float = 0.7  # cumulative weight of components treated as background
    match_sigmas: float = 2.5
    min_area: int = 50
    aspect: float = 1.0 / 3.0  # width / height


@dataclass(frozen=True, eq=False)
class PixelMixture:
    weights: np.ndarray  # (K, H, W)
    means: np.ndarray
    variances: np.ndarray


def fit_pixel_mixture(planes: np.ndarray, p: BackgroundParams = BackgroundParams()) -> PixelMixture:
    """Independent 1-D EM per pixel over a stack of (n, H, W) gray planes."""
    x = np.asarray(planes, dtype=np.float64)
    n = x.shape[0]
    K = p.n_components
    # means spread over each pixel's range; quantiles collapse when one value dominates
    lo, hi = x.min(axis=0), x.max(axis=0)
    t = np.linspace(0.0, 1.0, K).reshape((K,) + (1,) * (x.ndim - 1))
    means = lo[None] + t * (hi - lo)[None]
    variances = np.maximum(x.var(axis=0), p.var_floor)[None].repeat(K, axis=0)
    weights = np.full((K,) + x.shape[1:], 1.0 / K)
    for _ in range(p.em_iters):
        d = x[:, None] - means[None]
        logp = (np.log(weights)[None] - 0.5 * np.log(2 * np.pi * variances)[None]
                - 0.5 * d * d / variances[None])
        m = logp.max(axis=1, keepdims=True)
        r = np.exp(logp - m)
        r /= r.sum(axis=1, keepdims=True)
        nk = r.sum(axis=0) + 1e-12
        weights = np.maximum(nk / n, 1e-12)
        means = (r * x[:, None]).sum(axis=0) / nk
        d = x[:, None] - means[None]
        variances = np.maximum((r * d * d).sum(axis=0) / nk, p.var_floor)
    return PixelMixture(weights, means, variances)


def foreground_mask(model: PixelMixture, gray: np.ndarray, p: BackgroundParams = BackgroundParams()) -> np.ndarray:
    """Pixels not explained by any background component."""
    sd = np.sqrt(model.variances)
    order = np.argsort(-model.weights / sd, axis=0, kind="stable")
    w_sorted = np.take_along_axis(model.weights, order, axis=0)
    cum_before = np.cumsum(w_sorted, axis=0) - w_sorted
    # smallest prefix whose weight exceeds bg_weight; slack absorbs the EM epsilon
    is_bg_sorted = cum_before <= p.bg_weight + 1e-9
    is_bg = np.zeros_like(is_bg_sorted)
    np.put_along_axis(is_bg, order, is_bg_sorted, axis=0)
    match = np.abs(gray[None] - model.means) <= p.match_sigmas * sd
    return ~np.any(match & is_bg, axis=0)


def box_from_mask(mask: np.ndarray, frame: int, p: BackgroundParams = BackgroundParams()):
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return None
    sizes = np.bincount(labels.ravel())[1:]
    k = int(np.argmax(sizes)) + 1
    if sizes[k - 1] < p.min_area:
        return None
    ys, xs = np.nonzero(labels == k)
    x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
    w, h = float(x1 - x0 + 1), float(y1 - y0 + 1)
    if w < p.aspect * h:
        w = p.aspect * h
    else:
        h = w / p.aspect
    return BoundingBox(cx=(x0 + x1) / 2.0, cy=(y0 + y1) / 2.0, w=w, h=h,
                       score=1.0, kind=FULL_BODY, frame=frame)


def localize_by_background(seq: FrameSequence, n_train: int = 40,
                           p: BackgroundParams = BackgroundParams()) -> List[List[BoundingBox]]:
    """One box per frame around the largest foreground blob, aspect 1:3."""
    if n_train > len(seq):
        raise ValueError(f"n_train={n_train} exceeds sequence length {len(seq)}")
    if n_train < 1:
        raise ValueError("n_train must be positive")
    stack = np.stack([f.gray for f in seq.frames[:n_train]])
    model = fit_pixel_mixture(stack, p)
    out = []
    for i, fr in enumerate(seq.frames):
        box = box_from_mask(foreground_mask(model, fr.gray, p), i, p)
        out.append([box] if box is not None else [])
    return out
