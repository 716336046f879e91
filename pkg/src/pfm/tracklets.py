"""Dense point tracking over short windows and the DCS motion descriptor.

Each tracklet carries L+1 points. Its descriptor is 2L normalized
displacement values followed by three 96-bin orientation histograms of the
kinematic pairs (div, curl), (curl, shear) and (div, shear), pooled over a
trajectory-aligned N x N x L volume split into 2 x 2 x 3 cells.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import cv2
import numpy as np
from scipy import ndimage

from .flow import FlowField, FlowParams, KinematicMaps, estimate_flow, kinematic_maps
from .media import Frame, FrameSequence

PAIRS = (("div", "curl"), ("curl", "shear"), ("div", "shear"))
SUBTYPES = ("coords", "div_curl", "curl_shear", "div_shear")


class OutOfBounds(Exception):
    """A tracked point left the frame."""


class DegenerateTrajectory(ValueError):
    pass


@dataclass(frozen=True)
class TrackletParams:
    length: int = 15
    step: int = 5
    n_scales: int = 8
    scale_factor: float = 2 ** -0.5
    min_scale_side: int = 32
    max_step: float = 20.0
    min_total: float = 1.0
    eig_ratio: float = 1e-3
    patch: int = 32
    spatial_cells: int = 2
    temporal_cells: int = 3
    orientation_bins: int = 8
    coords: str = "displacement"  # or "position"
    flow: FlowParams = field(default_factory=FlowParams)

    @property
    def hist_dim(self) -> int:
        return self.spatial_cells ** 2 * self.temporal_cells * self.orientation_bins

    @property
    def block_dims(self) -> Tuple[int, int, int, int]:
        return (2 * self.length, self.hist_dim, self.hist_dim, self.hist_dim)

    @property
    def dim(self) -> int:
        return sum(self.block_dims)


@dataclass(frozen=True, eq=False)
class Tracklet:
    points: np.ndarray  # (L+1, 2) x, y at the sampling scale
    start_frame: int
    scale_level: int = 0
    scale: Tuple[float, float] = (1.0, 1.0)

    @property
    def length(self) -> int:
        return len(self.points) - 1

    @property
    def frame_points(self) -> np.ndarray:
        """Points in full-resolution frame coordinates."""
        return self.points / np.asarray(self.scale)

    @property
    def frames(self) -> np.ndarray:
        return self.start_frame + np.arange(len(self.points))


@dataclass(frozen=True, eq=False)
class DcsDescriptor:
    coords: np.ndarray
    div_curl: np.ndarray
    curl_shear: np.ndarray
    div_shear: np.ndarray
    anchor: Tuple[float, float]
    mid_frame: int

    @property
    def full(self) -> np.ndarray:
        return np.concatenate([self.coords, self.div_curl, self.curl_shear, self.div_shear])

    @classmethod
    def from_vector(cls, vec, anchor, mid_frame, params: TrackletParams = TrackletParams()):
        edges = np.cumsum((0,) + params.block_dims)
        blocks = [np.asarray(vec[a:b], dtype=np.float64) for a, b in zip(edges[:-1], edges[1:])]
        return cls(*blocks, anchor=(float(anchor[0]), float(anchor[1])), mid_frame=int(mid_frame))


def round_half_up(x):
    return np.floor(np.asarray(x) + 0.5).astype(np.int64)


def min_eigenvalue_map(gray: np.ndarray) -> np.ndarray:
    """Smaller eigenvalue of the 3x3-summed gradient structure tensor."""
    gy, gx = np.gradient(np.asarray(gray, dtype=np.float64))
    sxx = ndimage.uniform_filter(gx * gx, size=3, mode="nearest") * 9.0
    syy = ndimage.uniform_filter(gy * gy, size=3, mode="nearest") * 9.0
    sxy = ndimage.uniform_filter(gx * gy, size=3, mode="nearest") * 9.0
    half_tr = 0.5 * (sxx + syy)
    disc = np.sqrt(np.maximum(0.25 * (sxx - syy) ** 2 + sxy * sxy, 0.0))
    return half_tr - disc


def seed_points(frame, occupied=None, step: int = 5, eig_ratio: float = 1e-3) -> np.ndarray:
    """Grid positions (x, y) on one scale that are textured and unoccupied.

    A grid cell is occupied when any of ``occupied`` falls inside it.
    """
    gray = frame.gray if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    h, w = gray.shape
    eig = min_eigenvalue_map(gray)
    peak = eig.max()
    if not peak > 0:
        return np.empty((0, 2))
    xs = np.arange(step // 2, w, step)
    ys = np.arange(step // 2, h, step)
    gx, gy = np.meshgrid(xs, ys)
    keep = eig[gy, gx] > eig_ratio * peak
    if occupied is not None and len(occupied):
        occ = np.asarray(occupied, dtype=np.float64).reshape(-1, 2)
        ci = np.clip(np.floor(occ[:, 0] / step).astype(int), 0, len(xs) - 1)
        cj = np.clip(np.floor(occ[:, 1] / step).astype(int), 0, len(ys) - 1)
        taken = np.zeros_like(keep)
        taken[cj, ci] = True
        keep &= ~taken
    return np.column_stack([gx[keep], gy[keep]]).astype(np.float64)


def median_flow(flow: FlowField) -> Tuple[np.ndarray, np.ndarray]:
    """3x3 median of u and v with replicated borders (float32 precision)."""
    return (cv2.medianBlur(flow.u.astype(np.float32), 3).astype(np.float64),
            cv2.medianBlur(flow.v.astype(np.float32), 3).astype(np.float64))


def _in_bounds(pts: np.ndarray, w: int, h: int) -> np.ndarray:
    return (pts[:, 0] >= 0) & (pts[:, 0] <= w - 1) & (pts[:, 1] >= 0) & (pts[:, 1] <= h - 1)


def track_point(p, flow: FlowField, smoothed=None) -> np.ndarray:
    """Advance one point by the 3x3-median-filtered flow at its rounded position.

    Raises OutOfBounds when the new position leaves the frame.
    """
    mu, mv = smoothed if smoothed is not None else median_flow(flow)
    p = np.asarray(p, dtype=np.float64)
    if not _in_bounds(p[None], flow.width, flow.height)[0]:
        raise OutOfBounds(f"start point {tuple(p)} outside frame")
    x, y = round_half_up(p)
    q = p + np.array([mu[y, x], mv[y, x]])
    if not _in_bounds(q[None], flow.width, flow.height)[0]:
        raise OutOfBounds(f"point moved to {tuple(q)}")
    return q


def build_tracklets(seq, flows: Sequence[FlowField], params: TrackletParams = TrackletParams(),
                    scale_level: int = 0, scale=(1.0, 1.0)) -> List[Tracklet]:
    """Seed every frame, track L steps, keep trajectories that pass the pruning rules.

    ``seq`` is a FrameSequence or a list of gray planes at the flows' resolution.
    """
    grays = [f.gray for f in seq.frames] if isinstance(seq, FrameSequence) else list(seq)
    n_frames = len(grays)
    if len(flows) != n_frames - 1:
        raise ValueError(f"{len(flows)} flows for {n_frames} frames")
    L = params.length
    if n_frames < L + 1:
        return []
    h, w = grays[0].shape
    hist = np.empty((0, L + 1, 2))
    age = np.empty(0, dtype=np.int64)
    start = np.empty(0, dtype=np.int64)
    out: List[Tracklet] = []
    rows = np.arange(0)
    for t in range(n_frames - 1):
        if t + L <= n_frames - 1:
            current = hist[rows, age] if len(age) else np.empty((0, 2))
            new = seed_points(grays[t], current, params.step, params.eig_ratio)
            if len(new):
                block = np.zeros((len(new), L + 1, 2))
                block[:, 0] = new
                hist = np.concatenate([hist, block])
                age = np.concatenate([age, np.zeros(len(new), dtype=np.int64)])
                start = np.concatenate([start, np.full(len(new), t, dtype=np.int64)])
        if not len(age):
            continue
        rows = np.arange(len(age))
        mu, mv = median_flow(flows[t])
        pos = hist[rows, age]
        xi, yi = round_half_up(pos[:, 0]), round_half_up(pos[:, 1])
        d = np.column_stack([mu[yi, xi], mv[yi, xi]])
        nxt = pos + d
        alive = (np.hypot(d[:, 0], d[:, 1]) < params.max_step) & _in_bounds(nxt, w, h)
        hist[rows, np.minimum(age + 1, L)] = nxt
        age = age + 1
        done = alive & (age == L)
        for i in np.flatnonzero(done):
            steps = np.diff(hist[i], axis=0)
            if np.hypot(steps[:, 0], steps[:, 1]).sum() > params.min_total:
                out.append(Tracklet(points=hist[i].copy(), start_frame=int(start[i]),
                                    scale_level=scale_level, scale=tuple(scale)))
        keep = alive & (age < L)
        hist, age, start = hist[keep], age[keep], start[keep]
        rows = np.arange(len(age))
    out.sort(key=lambda tr: (tr.start_frame, tr.points[0, 1], tr.points[0, 0]))
    return out


def coords_block(tr: Tracklet, params: TrackletParams = TrackletParams(),
                 frame_size: Optional[Tuple[int, int]] = None) -> np.ndarray:
    if params.coords == "position":
        # alternative reading: frame-size-normalized absolute positions
        w, h = frame_size
        return (tr.points[:-1] / np.array([w, h])).ravel()
    steps = np.diff(tr.points, axis=0)
    total = np.hypot(steps[:, 0], steps[:, 1]).sum()
    if total == 0:
        raise DegenerateTrajectory("trajectory has zero total displacement")
    return (steps / total).ravel()


def _orientation_channels(a: np.ndarray, b: np.ndarray, n_bins: int) -> np.ndarray:
    """Magnitude-weighted one-hot orientation planes, shape (H, W, n_bins)."""
    ang = np.mod(np.arctan2(b, a), 2 * np.pi)
    idx = np.minimum((ang / (2 * np.pi / n_bins)).astype(np.int64), n_bins - 1)
    mag = np.hypot(a, b)
    out = np.zeros(a.shape + (n_bins,))
    np.put_along_axis(out, idx[..., None], mag[..., None], axis=2)
    return out


def _integral(channels: np.ndarray) -> np.ndarray:
    return cv2.integral(np.ascontiguousarray(channels), sdepth=cv2.CV_64F).reshape(
        channels.shape[0] + 1, channels.shape[1] + 1, channels.shape[2])


def pair_histograms(tracklets: Sequence[Tracklet], kin: Sequence[KinematicMaps],
                    params: TrackletParams = TrackletParams()) -> np.ndarray:
    """Raw (unnormalized) pair histograms, shape (n, 3, hist_dim).

    Layout within a block: temporal cell, row, column, orientation bin.
    """
    n = len(tracklets)
    L, nb = params.length, params.orientation_bins
    sc, tc = params.spatial_cells, params.temporal_cells
    out = np.zeros((n, len(PAIRS), tc, sc, sc, nb))
    if n == 0:
        return out.reshape(n, len(PAIRS), -1)
    starts = np.array([t.start_frame for t in tracklets])
    pts = np.stack([t.points for t in tracklets])
    centers = round_half_up(pts)
    half = params.patch // 2
    cell = params.patch // sc
    t_cell = (np.arange(L) * tc) // L
    for f in range(starts.min(), starts.max() + L):
        sel = np.flatnonzero((starts <= f) & (f < starts + L))
        if not len(sel):
            continue
        km = kin[f]
        h, w = km.div.shape
        ii = _integral(np.concatenate(
            [_orientation_channels(getattr(km, a), getattr(km, b), nb) for a, b in PAIRS], axis=2))
        j = f - starts[sel]
        cx, cy = centers[sel, j, 0], centers[sel, j, 1]
        for r in range(sc):
            y0 = np.clip(cy - half + r * cell, 0, h)
            y1 = np.clip(cy - half + (r + 1) * cell, 0, h)
            for c in range(sc):
                x0 = np.clip(cx - half + c * cell, 0, w)
                x1 = np.clip(cx - half + (c + 1) * cell, 0, w)
                s = ii[y1, x1] - ii[y0, x1] - ii[y1, x0] + ii[y0, x0]
                s = s.reshape(len(sel), len(PAIRS), nb)
                out[sel, :, t_cell[j], r, c, :] += s
    return out.reshape(n, len(PAIRS), -1)


def _l2(block: np.ndarray) -> np.ndarray:
    # block: (n, pairs, dim). Integral-image sums leave ~1e-14 residue where
    # the true histogram is empty; such blocks are zeroed, not inflated.
    norm = np.linalg.norm(block, axis=-1, keepdims=True)
    ref = norm.max(axis=-2, keepdims=True)
    keep = norm > np.maximum(1e-9 * ref, 1e-300)
    return np.divide(block, norm, out=np.zeros_like(block), where=keep)


def dcs_descriptors(tracklets: Sequence[Tracklet], kin: Sequence[KinematicMaps],
                    params: TrackletParams = TrackletParams()) -> List[DcsDescriptor]:
    frame_size = (kin[0].width, kin[0].height) if len(kin) else None
    hists = _l2(pair_histograms(tracklets, kin, params))
    out = []
    L = params.length
    for tr, hb in zip(tracklets, hists):
        fp = tr.frame_points
        out.append(DcsDescriptor(
            coords=coords_block(tr, params, frame_size),
            div_curl=hb[0], curl_shear=hb[1], div_shear=hb[2],
            anchor=(float(fp[:, 0].mean()), float(fp[:, 1].mean())),
            mid_frame=tr.start_frame + L // 2,
        ))
    return out


def dcs_descriptor(t: Tracklet, kin: Sequence[KinematicMaps],
                   params: TrackletParams = TrackletParams()) -> DcsDescriptor:
    return dcs_descriptors([t], kin, params)[0]


def scale_levels(width: int, height: int, params: TrackletParams = TrackletParams()):
    """(level, width, height) for each sampling scale large enough to use."""
    levels = []
    for lvl in range(params.n_scales):
        s = params.scale_factor ** lvl
        w, h = int(round(width * s)), int(round(height * s))
        if min(w, h) < params.min_scale_side:
            break
        levels.append((lvl, w, h))
    return levels


def extract(seq: FrameSequence, params: TrackletParams = TrackletParams()):
    """Tracklets and descriptors over all sampling scales of a sequence."""
    tracklets: List[Tracklet] = []
    descriptors: List[DcsDescriptor] = []
    for lvl, w, h in scale_levels(seq.width, seq.height, params):
        if lvl == 0:
            grays = [f.gray for f in seq.frames]
        else:
            grays = [cv2.resize(f.gray, (w, h), interpolation=cv2.INTER_AREA) for f in seq.frames]
        flows = [estimate_flow(a, b, params.flow) for a, b in zip(grays, grays[1:])]
        trs = build_tracklets(grays, flows, params, lvl, (w / seq.width, h / seq.height))
        if not trs:
            continue
        kin = [kinematic_maps(f) for f in flows]
        tracklets.extend(trs)
        descriptors.extend(dcs_descriptors(trs, kin, params))
    return tracklets, descriptors


def write_dump(path, tracklets: Sequence[Tracklet], descriptors: Sequence[DcsDescriptor]) -> None:
    """One line per tracklet: start_frame scale x0 y0 ... xL yL d0 ... d317.

    Point coordinates are full-resolution frame coordinates.
    """
    with open(path, "w") as fh:
        for tr, d in zip(tracklets, descriptors):
            vals = [str(tr.start_frame), str(tr.scale_level)]
            vals += [repr(float(v)) for v in tr.frame_points.ravel()]
            vals += [repr(float(v)) for v in d.full]
            fh.write(" ".join(vals) + "\n")


def read_dump(path, params: TrackletParams = TrackletParams()):
    """Inverse of write_dump: list of (start_frame, scale_level, points, vector)."""
    rows = []
    npts = 2 * (params.length + 1)
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2 + npts + params.dim:
                raise ValueError(f"{path}:{lineno}: expected {2 + npts + params.dim} fields, got {len(parts)}")
            vals = np.array(parts[2:], dtype=np.float64)
            rows.append((int(parts[0]), int(parts[1]), vals[:npts].reshape(-1, 2), vals[npts:]))
    return rows
