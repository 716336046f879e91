"""Spatial (and optional temporal) pyramid pooling of Fisher Vectors over a person box."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..persons import PersonTrack
from .fisher import fisher_vector
from .gmm import GmmModel
from .pca import PcaModel, apply_pca

BASELINE_LEVELS = ((2, 1),)
PYR_LEVELS = ((1, 1), (2, 1))


@dataclass(frozen=True)
class PyramidConfig:
    levels: Tuple[Tuple[int, int], ...] = BASELINE_LEVELS
    temporal_cells: int = 1
    subseq_len: Optional[int] = None
    subseq_overlap: int = 0

    def __post_init__(self):
        levels = tuple((int(r), int(c)) for r, c in self.levels)
        if not levels:
            raise ValueError("pyramid needs at least one level")
        if any(r < 1 or c < 1 for r, c in levels):
            raise ValueError("pyramid grid sizes must be >= 1")
        if self.temporal_cells < 1:
            raise ValueError("temporal_cells must be >= 1")
        if self.subseq_len is not None and not 0 <= self.subseq_overlap < self.subseq_len:
            raise ValueError("overlap must be smaller than the subsequence length")
        object.__setattr__(self, "levels", levels)

    @property
    def n_cells(self) -> int:
        return sum(r * c for r, c in self.levels) * self.temporal_cells


@dataclass(frozen=True, eq=False)
class PfmDescriptor:
    vector: np.ndarray
    layout: List[Tuple[int, Tuple[int, int, int], int, int]]  # (level, (row, col, time), offset, length)
    subject_id: Optional[str] = None
    camera_id: Optional[str] = None


def subsequence_windows(n_frames: int, length: Optional[int], overlap: int = 0) -> List[Tuple[int, int]]:
    """[start, end) windows; a single full window when ``length`` is None."""
    if length is None or length >= n_frames:
        return [(0, n_frames)]
    stride = length - overlap
    starts = list(range(0, n_frames - length + 1, stride))
    return [(s, s + length) for s in starts]


def cell_indices(anchors: np.ndarray, mid_frames: np.ndarray, track: PersonTrack,
                 rows: int, cols: int, temporal_cells: int,
                 span: Tuple[int, int]) -> np.ndarray:
    """(n, 3) row, col, time cell of each tracklet for one grid level."""
    boxes = np.array([[b.cx, b.cy, b.w, b.h] for b in
                      (track.box_at(int(f)) or track.nearest_box(int(f)) for f in mid_frames)])
    boxes = boxes.reshape(-1, 4)
    rel_x = (anchors[:, 0] - (boxes[:, 0] - boxes[:, 2] / 2)) / boxes[:, 2]
    rel_y = (anchors[:, 1] - (boxes[:, 1] - boxes[:, 3] / 2)) / boxes[:, 3]
    r = np.clip(np.floor(rows * rel_y), 0, rows - 1).astype(int)
    c = np.clip(np.floor(cols * rel_x), 0, cols - 1).astype(int)
    t0, t1 = span
    rel_t = (np.asarray(mid_frames, dtype=np.float64) - t0) / max(t1 - t0, 1)
    t = np.clip(np.floor(temporal_cells * rel_t), 0, temporal_cells - 1).astype(int)
    return np.column_stack([r, c, t])


def pfm_encode(tracklets: Sequence, track: PersonTrack, gmm: GmmModel,
               pca_low: Optional[PcaModel] = None, pyramid: PyramidConfig = PyramidConfig(),
               feature_mask: Optional[np.ndarray] = None, span: Optional[Tuple[int, int]] = None,
               subject_id=None, camera_id=None) -> PfmDescriptor:
    """Concatenated cell-level Fisher Vectors in (level, row, col, time) order.

    ``tracklets`` holds (DcsDescriptor, track_id) pairs; ``feature_mask``
    selects descriptor dimensions before the low-level PCA. ``span`` is
    the [start, end) frame range used for temporal cells (track extent by
    default).
    """
    if not len(tracklets):
        raise ValueError("no tracklets to encode")
    descs = [d for d, _ in tracklets]
    X = np.stack([d.full for d in descs])
    if feature_mask is not None:
        X = X[:, np.asarray(feature_mask, dtype=bool)]
    if pca_low is not None:
        X = apply_pca(X, pca_low)
    anchors = np.array([d.anchor for d in descs], dtype=np.float64)
    mids = np.array([d.mid_frame for d in descs])
    if span is None:
        span = (track.first_frame, track.last_frame + 1)
    block = 2 * gmm.K * gmm.D
    parts, layout = [], []
    offset = 0
    for lvl, (rows, cols) in enumerate(pyramid.levels):
        cells = cell_indices(anchors, mids, track, rows, cols, pyramid.temporal_cells, span)
        for r in range(rows):
            for c in range(cols):
                for t in range(pyramid.temporal_cells):
                    sel = np.all(cells == (r, c, t), axis=1)
                    fv = fisher_vector(X[sel], gmm) if sel.any() else np.zeros(block)
                    parts.append(fv)
                    layout.append((lvl, (r, c, t), offset, block))
                    offset += block
    return PfmDescriptor(np.concatenate(parts), layout, subject_id, camera_id)
