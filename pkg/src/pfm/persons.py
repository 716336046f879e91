"""Person localization: detector fusion, NMS, tracking-by-detection, track
linking by color, and selection of person-related tracklets."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .media import FrameSequence

FULL_BODY = "fb"
UPPER_BODY = "ub"
FUSED = "fused"
KINDS = (FULL_BODY, UPPER_BODY, FUSED)

CHI2_EPS = 1e-10


@dataclass(frozen=True)
class BoundingBox:
    cx: float
    cy: float
    w: float
    h: float
    score: float = 1.0
    kind: str = FULL_BODY
    frame: int = 0

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h", "score"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "frame", int(self.frame))
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box size must be positive, got {self.w}x{self.h}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown box kind {self.kind!r}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def corners(self) -> Tuple[float, float, float, float]:
        return (self.cx - self.w / 2, self.cy - self.h / 2, self.cx + self.w / 2, self.cy + self.h / 2)

    def contains(self, x, y):
        return (np.abs(np.asarray(x) - self.cx) <= self.w / 2) & (np.abs(np.asarray(y) - self.cy) <= self.h / 2)

    def mirrored(self, width: int) -> "BoundingBox":
        return dataclasses.replace(self, cx=width - 1 - self.cx)


@dataclass(frozen=True)
class TransformParams:
    mu_x: float = 0.0
    mu_y: float = 0.0
    mu_w: float = 1.0
    mu_h: float = 1.0


@dataclass
class PersonTrack:
    boxes: List[BoundingBox]
    track_id: str
    mean_color_hist: Optional[np.ndarray] = None

    def __post_init__(self):
        self.boxes = sorted(self.boxes, key=lambda b: b.frame)
        frames = [b.frame for b in self.boxes]
        if len(set(frames)) != len(frames):
            raise ValueError(f"track {self.track_id}: more than one box per frame")

    def __len__(self):
        return len(self.boxes)

    @property
    def frames(self) -> List[int]:
        return [b.frame for b in self.boxes]

    @property
    def first_frame(self) -> int:
        return self.boxes[0].frame

    @property
    def last_frame(self) -> int:
        return self.boxes[-1].frame

    @property
    def mean_score(self) -> float:
        return float(np.mean([b.score for b in self.boxes]))

    def box_at(self, frame: int) -> Optional[BoundingBox]:
        for b in self.boxes:
            if b.frame == frame:
                return b
        return None

    def nearest_box(self, frame: int) -> BoundingBox:
        return min(self.boxes, key=lambda b: (abs(b.frame - frame), b.frame))

    def box_table(self, n_frames: int) -> np.ndarray:
        """(n_frames, 4) array of cx, cy, w, h with NaN where absent."""
        tab = np.full((n_frames, 4), np.nan)
        for b in self.boxes:
            if 0 <= b.frame < n_frames:
                tab[b.frame] = (b.cx, b.cy, b.w, b.h)
        return tab


def iou(a: BoundingBox, b: BoundingBox) -> float:
    ax0, ay0, ax1, ay1 = a.corners
    bx0, by0, bx1, by1 = b.corners
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def fit_transform_params(pairs: Sequence[Tuple[BoundingBox, BoundingBox]]) -> TransformParams:
    """Mean relative offset and scale of full-body boxes w.r.t. upper-body boxes."""
    if not pairs:
        raise ValueError("need at least one (full-body, upper-body) pair")
    rel = []
    for fb, ub in pairs:
        if ub.w <= 0 or ub.h <= 0:
            raise ValueError("upper-body box must have positive size")
        rel.append(((fb.cx - ub.cx) / ub.h, (fb.cy - ub.cy) / ub.h, fb.w / ub.w, fb.h / ub.h))
    mx, my, mw, mh = np.mean(np.array(rel), axis=0)
    return TransformParams(float(mx), float(my), float(mw), float(mh))


def ub_to_fb(ub: BoundingBox, params: TransformParams) -> BoundingBox:
    return dataclasses.replace(ub, cx=ub.cx + params.mu_x * ub.h, cy=ub.cy + params.mu_y * ub.h,
                               w=params.mu_w * ub.w, h=params.mu_h * ub.h)


def scale_scores(boxes: Sequence[BoundingBox]) -> List[BoundingBox]:
    """Min-max scale scores to [0, 1]; a lone box (or equal scores) maps to 1."""
    if not boxes:
        return []
    s = np.array([b.score for b in boxes], dtype=np.float64)
    lo, hi = s.min(), s.max()
    scaled = (s - lo) / (hi - lo) if hi > lo else np.ones_like(s)
    return [dataclasses.replace(b, score=float(v)) for b, v in zip(boxes, scaled)]


def combine_detections(fbs: Sequence[BoundingBox], ubs: Sequence[BoundingBox],
                       params: TransformParams, tau_c: float = 0.5) -> List[BoundingBox]:
    """Merge full-body and (transformed) upper-body detections of one frame.

    Scores are expected already scaled per class. NMS is left to the caller.
    """
    tubs = [ub_to_fb(u, params) for u in ubs]
    used = [False] * len(tubs)
    out: List[BoundingBox] = []
    leftover: List[BoundingBox] = []
    for fb in sorted(fbs, key=lambda b: -b.score):
        best, best_iou = -1, -1.0
        for i, u in enumerate(tubs):
            if used[i]:
                continue
            o = iou(fb, u)
            if o > best_iou:
                best, best_iou = i, o
        if best >= 0 and best_iou > tau_c:
            u = tubs[best]
            used[best] = True
            big = fb if fb.area >= u.area else u
            out.append(dataclasses.replace(big, score=fb.score * u.score * best_iou, kind=FUSED))
        else:
            leftover.append(fb)
    out.extend(u for u, flag in zip(tubs, used) if not flag)
    out.extend(leftover)
    return out


def nms(boxes: Sequence[BoundingBox], iou_max: float = 0.4) -> List[BoundingBox]:
    kept: List[BoundingBox] = []
    for b in sorted(boxes, key=lambda b: -b.score):
        if all(iou(b, k) <= iou_max for k in kept):
            kept.append(b)
    return kept


@dataclass(frozen=True)
class TrackingParams:
    tau_c: float = 0.5
    nms_iou: float = 0.4
    assoc_iou: float = 0.3
    max_gap: int = 5
    min_length: int = 10
    min_mean_score: float = 0.2
    static_ratio: float = 0.5
    chi2_max: float = 0.25
    hist_bins: int = 16


def fuse_frame(fbs, ubs, params: TransformParams, cfg: TrackingParams = TrackingParams()):
    """Score scaling, combination and NMS for one frame's raw detections."""
    return nms(combine_detections(scale_scores(fbs), scale_scores(ubs), params, cfg.tau_c), cfg.nms_iou)


def _center_extent(track: PersonTrack) -> float:
    c = np.array([(b.cx, b.cy) for b in track.boxes])
    span = c.max(axis=0) - c.min(axis=0)
    return float(np.hypot(span[0], span[1]))


def is_static(track: PersonTrack, ratio: float = 0.5) -> bool:
    mean_w = np.mean([b.w for b in track.boxes])
    return _center_extent(track) < ratio * mean_w


def build_tracks(detections_per_frame: Sequence[Sequence[BoundingBox]],
                 cfg: TrackingParams = TrackingParams()) -> List[PersonTrack]:
    """Greedy IoU association of per-frame detections into person tracks.

    The list position is the frame number; box ``frame`` fields are
    overwritten to match it.
    """
    open_tracks: List[List[BoundingBox]] = []
    for f, dets in enumerate(detections_per_frame):
        claimed = set()
        for d in sorted(dets, key=lambda b: -b.score):
            d = dataclasses.replace(d, frame=f)
            best, best_iou = -1, cfg.assoc_iou
            for i, tr in enumerate(open_tracks):
                last = tr[-1]
                if i in claimed or last.frame >= f or f - last.frame > cfg.max_gap:
                    continue
                o = iou(last, d)
                if o > best_iou:
                    best, best_iou = i, o
            if best >= 0:
                open_tracks[best].append(d)
                claimed.add(best)
            else:
                open_tracks.append([d])
                claimed.add(len(open_tracks) - 1)
    out = []
    for boxes in open_tracks:
        tr = PersonTrack(boxes=boxes, track_id="")
        if len(tr) < cfg.min_length and tr.mean_score < cfg.min_mean_score:
            continue
        if is_static(tr, cfg.static_ratio):
            continue
        out.append(tr)
    for k, tr in enumerate(out):
        tr.track_id = f"t{k}"
    return out


def box_color_hist(rgb: np.ndarray, box: BoundingBox, bins: int = 16) -> np.ndarray:
    """Per-channel L1-normalized histograms over the box pixels, 3*bins values."""
    h, w = rgb.shape[:2]
    x0, y0, x1, y1 = box.corners
    xa, xb = max(int(np.ceil(x0)), 0), min(int(np.floor(x1)), w - 1)
    ya, yb = max(int(np.ceil(y0)), 0), min(int(np.floor(y1)), h - 1)
    out = np.zeros(3 * bins)
    if xa > xb or ya > yb:
        return out
    patch = rgb[ya:yb + 1, xa:xb + 1].reshape(-1, 3)
    idx = np.minimum((patch * bins).astype(np.int64), bins - 1)
    for c in range(3):
        hist = np.bincount(idx[:, c], minlength=bins).astype(np.float64)
        out[c * bins:(c + 1) * bins] = hist / hist.sum()
    return out


def track_color_hist(track: PersonTrack, seq: FrameSequence, bins: int = 16) -> np.ndarray:
    hists = [box_color_hist(seq.frames[b.frame].rgb(), b, bins)
             for b in track.boxes if 0 <= b.frame < len(seq)]
    return np.mean(hists, axis=0) if hists else np.zeros(3 * bins)


def chi2_distance(h: np.ndarray, g: np.ndarray, eps: float = CHI2_EPS) -> float:
    h, g = np.asarray(h, dtype=np.float64), np.asarray(g, dtype=np.float64)
    return float(0.5 * np.sum((h - g) ** 2 / (h + g + eps)))


def _overlap(a: Tuple[int, int], b: Tuple[int, int]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def link_tracks(tracks: Sequence[PersonTrack], seq: FrameSequence, chi2_max: float = 0.25,
                bins: int = 16) -> List[PersonTrack]:
    """Merge temporally disjoint tracks whose mean color histograms are close."""
    tracks = list(tracks)
    hists = [track_color_hist(t, seq, bins) for t in tracks]
    spans = [[(t.first_frame, t.last_frame)] for t in tracks]
    group = list(range(len(tracks)))
    candidates = []
    for i in range(len(tracks)):
        for j in range(i + 1, len(tracks)):
            if _overlap(spans[i][0], spans[j][0]):
                continue
            d = chi2_distance(hists[i], hists[j])
            if d < chi2_max:
                candidates.append((d, i, j))
    candidates.sort()

    def root(i):
        while group[i] != i:
            i = group[i]
        return i

    for _, i, j in candidates:
        ri, rj = root(i), root(j)
        if ri == rj or any(_overlap(a, b) for a in spans[ri] for b in spans[rj]):
            continue
        first = min(ri, rj, key=lambda r: (min(s[0] for s in spans[r]), r))
        other = rj if first == ri else ri
        group[other] = first
        spans[first] = spans[first] + spans[other]
    members: Dict[int, List[int]] = {}
    for i in range(len(tracks)):
        members.setdefault(root(i), []).append(i)
    out = []
    for r in sorted(members, key=lambda r: (tracks[r].first_frame, r)):
        idx = members[r]
        boxes = [b for i in idx for b in tracks[i].boxes]
        merged = PersonTrack(boxes=boxes, track_id=tracks[r].track_id)
        merged.mean_color_hist = track_color_hist(merged, seq, bins)
        out.append(merged)
    return out


def filter_tracklets(tracklets, tracks: Sequence[PersonTrack], n_frames: Optional[int] = None):
    """Keep tracklets with at least one point inside a track box at that frame.

    Returns (tracklet, track_id) pairs; each tracklet goes to the track
    holding most of its points (ties: higher mean score, then earlier track).
    """
    tracklets = list(tracklets)
    if not tracklets or not tracks:
        return []
    pts = np.stack([t.frame_points for t in tracklets])
    frames = np.stack([t.frames for t in tracklets])
    if n_frames is None:
        n_frames = int(max(frames.max(), max(tr.last_frame for tr in tracks))) + 1
    counts = np.zeros((len(tracklets), len(tracks)), dtype=np.int64)
    inside_f = frames < n_frames
    fidx = np.where(inside_f, frames, 0)
    for k, tr in enumerate(tracks):
        tab = tr.box_table(n_frames)[fidx]
        with np.errstate(invalid="ignore"):
            inside = ((np.abs(pts[..., 0] - tab[..., 0]) <= tab[..., 2] / 2)
                      & (np.abs(pts[..., 1] - tab[..., 1]) <= tab[..., 3] / 2) & inside_f)
        counts[:, k] = inside.sum(axis=1)
    scores = np.array([tr.mean_score for tr in tracks])
    out = []
    for i, t in enumerate(tracklets):
        if counts[i].max() == 0:
            continue
        best = max(range(len(tracks)), key=lambda k: (counts[i, k], scores[k], -k))
        out.append((t, tracks[best].track_id))
    return out


def read_detections(path) -> Dict[int, List[BoundingBox]]:
    """Parse ``frame kind cx cy w h score`` lines (kind is fb or ub)."""
    out: Dict[int, List[BoundingBox]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 7 or parts[1] not in (FULL_BODY, UPPER_BODY):
                raise ValueError(f"{path}:{lineno}: malformed detection line")
            try:
                f = int(parts[0])
                cx, cy, w, h, s = (float(p) for p in parts[2:])
                box = BoundingBox(cx, cy, w, h, s, parts[1], f)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            out.setdefault(f, []).append(box)
    return out


def write_detections(path, boxes: Sequence[BoundingBox]) -> None:
    with open(path, "w") as fh:
        for b in sorted(boxes, key=lambda b: (b.frame, b.kind)):
            fh.write(f"{b.frame} {b.kind} {b.cx!r} {b.cy!r} {b.w!r} {b.h!r} {b.score!r}\n")


def read_transform_params(path) -> TransformParams:
    vals = open(path).read().split()
    if len(vals) != 4:
        raise ValueError(f"{path}: expected four reals, found {len(vals)} fields")
    return TransformParams(*(float(v) for v in vals))


def write_transform_params(path, p: TransformParams) -> None:
    with open(path, "w") as fh:
        fh.write(f"{p.mu_x!r} {p.mu_y!r} {p.mu_w!r} {p.mu_h!r}\n")
