"""Synthetic multiview gait data: a textured articulated walker crossing a
textured static background.

Identity lives only in the motion: each subject draws a gait signature
(cadence, swing amplitudes, arm phase, bob, lean, foot lift) from the
seed. Appearance textures are shared by all subjects.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from scipy import ndimage

from ..media import write_frame
from ..persons import (FULL_BODY, UPPER_BODY, BoundingBox, fit_transform_params,
                       write_detections, write_transform_params)
from .dataset import UB_PARAMS, SequenceRecord, write_manifest

TEX = 64
LEG_LEN = 24.0
ARM_LEN = 16.0


@dataclass(frozen=True)
class GaitSignature:
    freq: float       # gait cycles per frame
    leg_amp: float    # leg swing (rad)
    arm_amp: float    # arm swing (rad)
    arm_phase: float  # arm phase relative to legs (rad)
    bob: float        # vertical torso bob (px)
    lean: float       # forward torso lean (rad)
    lift: float       # foot lift during swing (px)


@dataclass(frozen=True)
class Part:
    name: str
    center: Tuple[float, float]  # body coordinates, hip at origin, y down
    angle: float
    axes: Tuple[float, float]
    texture: int


def draw_signature(rng: np.random.Generator) -> GaitSignature:
    return GaitSignature(
        freq=float(rng.uniform(0.045, 0.095)),
        leg_amp=float(rng.uniform(0.25, 0.65)),
        arm_amp=float(rng.uniform(0.15, 0.8)),
        arm_phase=float(rng.uniform(np.pi - 1.0, np.pi + 1.0)),
        bob=float(rng.uniform(0.0, 3.0)),
        lean=float(rng.uniform(-0.05, 0.25)),
        lift=float(rng.uniform(0.0, 5.0)),
    )


def body_parts(sig: GaitSignature, t: float, phase0: float) -> List[Part]:
    """Part layout at time ``t``; drawing order back to front."""
    phi = 2 * np.pi * sig.freq * t + phase0
    bob = sig.bob * math.cos(2 * phi)
    sl, cl = math.sin(sig.lean), math.cos(sig.lean)
    shoulder = (19 * sl, -19 * cl + bob)

    def limb(origin, theta, length, width, tex, name):
        c = (origin[0] + 0.5 * length * math.sin(theta), origin[1] + 0.5 * length * math.cos(theta))
        return Part(name, c, -theta, (width, 0.55 * length), tex)

    def foot(theta, ph, name):
        lift = sig.lift * max(0.0, math.cos(ph))
        return Part(name, (LEG_LEN * math.sin(theta) + 3.0, LEG_LEN * math.cos(theta) - lift), 0.0, (4.5, 2.5), 4)

    th_l, th_r = sig.leg_amp * math.sin(phi), sig.leg_amp * math.sin(phi + np.pi)
    ar_l = sig.arm_amp * math.sin(phi + sig.arm_phase)
    ar_r = sig.arm_amp * math.sin(phi + sig.arm_phase + np.pi)
    return [
        limb(shoulder, ar_r, ARM_LEN, 2.6, 3, "arm_back"),
        limb((0.0, bob), th_r, LEG_LEN, 3.6, 2, "leg_back"),
        foot(th_r, phi + np.pi, "foot_back"),
        Part("torso", (9.5 * sl, -9.5 * cl + bob), -sig.lean, (6.0, 11.0), 0),
        Part("head", (27 * sl, -27 * cl + bob), 0.0, (5.0, 5.5), 1),
        limb((0.0, bob), th_l, LEG_LEN, 3.6, 2, "leg_front"),
        foot(th_l, phi, "foot_front"),
        limb(shoulder, ar_l, ARM_LEN, 2.6, 3, "arm_front"),
    ]


UB_PARTS = ("torso", "head")


def smooth_noise(rng, shape, sigma, lo, hi) -> np.ndarray:
    n = ndimage.gaussian_filter(rng.random(shape), sigma, mode="wrap")
    n = (n - n.min()) / max(n.max() - n.min(), 1e-12)
    return lo + (hi - lo) * n


def camera_affine(index: int, rng: np.random.Generator) -> np.ndarray:
    """2x2 view transform of camera ``index``: direction, scale, shear, tilt."""
    presets = [
        np.array([[1.0, 0.0], [0.0, 1.0]]),
        np.array([[-0.95, 0.0], [0.0, 0.95]]),
        np.array([[0.85, 0.18], [0.0, 0.9]]),
        np.array([[-1.05, -0.12], [0.06, 1.08]]),
    ]
    if index < len(presets):
        return presets[index]
    s = rng.uniform(0.85, 1.1)
    sign = -1.0 if index % 2 else 1.0
    return np.array([[sign * s, rng.uniform(-0.15, 0.15)], [rng.uniform(-0.05, 0.05), s]])


def render_part(canvas, alpha_acc, part: Part, hip_img, A, A_inv, tex):
    h, w = canvas.shape
    ca, sa = math.cos(part.angle), math.sin(part.angle)
    a, b = part.axes
    center = hip_img + A @ np.array(part.center)
    r = max(a, b) * np.abs(A).sum(axis=1).max() + 2
    x0, x1 = max(int(center[0] - r), 0), min(int(center[0] + r) + 1, w)
    y0, y1 = max(int(center[1] - r), 0), min(int(center[1] + r) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return None
    ys, xs = np.mgrid[y0:y1, x0:x1].astype(np.float64)
    bx = A_inv[0, 0] * (xs - hip_img[0]) + A_inv[0, 1] * (ys - hip_img[1]) - part.center[0]
    by = A_inv[1, 0] * (xs - hip_img[0]) + A_inv[1, 1] * (ys - hip_img[1]) - part.center[1]
    lx = ca * bx + sa * by
    ly = -sa * bx + ca * by
    rr = np.sqrt((lx / a) ** 2 + (ly / b) ** 2)
    alpha = np.clip((1.0 - rr) * min(a, b) + 0.5, 0.0, 1.0)
    if not alpha.any():
        return None
    val = ndimage.map_coordinates(tex, [ly + TEX / 2, lx + TEX / 2], order=1, mode="wrap")
    region = canvas[y0:y1, x0:x1]
    canvas[y0:y1, x0:x1] = region * (1 - alpha) + val * alpha
    alpha_acc[y0:y1, x0:x1] = np.maximum(alpha_acc[y0:y1, x0:x1], alpha)
    return center


def _mask_box(mask: np.ndarray, frame: int, kind: str):
    ys, xs = np.nonzero(mask)
    if not len(xs):
        return None
    x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
    return BoundingBox((x0 + x1) / 2.0, (y0 + y1) / 2.0, float(x1 - x0 + 1), float(y1 - y0 + 1),
                       1.0, kind, frame)


@dataclass
class RenderedSequence:
    frames: List[np.ndarray]
    fb: List[BoundingBox]
    ub: List[BoundingBox]
    part_centers: List[Dict[str, np.ndarray]]


def render_sequence(sig: GaitSignature, A: np.ndarray, background: np.ndarray, textures,
                    n_frames: int, phase0: float, speed_factor: float, y_offset: float) -> RenderedSequence:
    h, w = background.shape
    A_inv = np.linalg.inv(A)
    speed = 28.0 * sig.freq * math.sin(sig.leg_amp) * speed_factor
    mid_img = np.array([w / 2.0, h / 2.0 + 4.0 + y_offset])
    out = RenderedSequence([], [], [], [])
    for t in range(n_frames):
        hip_world = np.array([speed * (t - (n_frames - 1) / 2.0), 0.0])
        hip_img = mid_img + A @ hip_world
        canvas = background.copy()
        full = np.zeros_like(background)
        upper = np.zeros_like(background)
        centers = {}
        for part in body_parts(sig, t, phase0):
            acc = upper if part.name in UB_PARTS else np.zeros_like(background)
            c = render_part(canvas, acc, part, hip_img, A, A_inv, textures[part.texture])
            if c is not None:
                centers[part.name] = c
            np.maximum(full, acc, out=full)
        out.frames.append(canvas)
        out.fb.append(_mask_box(full > 0.5, t, FULL_BODY))
        out.ub.append(_mask_box(upper > 0.5, t, UPPER_BODY))
        out.part_centers.append(centers)
    return out


def subject_ids(n):
    return [f"s{i:02d}" for i in range(n)]


def synth_generate(root, n_subjects: int = 10, n_cameras: int = 4, n_trajectories: int = 3,
                   frames: int = 48, seed: int = 0, width: int = 128, height: int = 96,
                   shared_signature: bool = False, min_frames: int = 30) -> List[SequenceRecord]:
    """Render a dataset under ``root`` and write its manifest.

    With ``shared_signature`` every subject walks with subject 0's gait, which
    removes the identity signal (ablation).
    """
    if n_subjects < 2:
        raise ValueError("need at least two subjects")
    if n_cameras < 1 or n_trajectories < 1:
        raise ValueError("camera and trajectory counts must be positive")
    if frames < min_frames:
        raise ValueError(f"need at least {min_frames} frames per sequence")
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    tex_rng = np.random.default_rng([seed, 1])
    textures = [smooth_noise(tex_rng, (TEX, TEX), s, lo, hi)
                for s, lo, hi in ((1.2, 0.45, 1.0), (1.0, 0.55, 0.95), (1.0, 0.4, 1.0),
                                  (1.0, 0.5, 1.0), (1.0, 0.3, 0.8))]
    background = smooth_noise(tex_rng, (height, width), 2.0, 0.05, 0.4)
    cams = [camera_affine(c, rng) for c in range(n_cameras)]
    sigs = [draw_signature(rng) for _ in range(n_subjects)]
    if shared_signature:
        sigs = [sigs[0]] * n_subjects
    records, pairs = [], []
    with open(root / "signatures.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        fields = list(asdict(sigs[0]))
        wr.writerow(["subject"] + fields)
        for sid, sig in zip(subject_ids(n_subjects), sigs):
            wr.writerow([sid] + [repr(getattr(sig, f)) for f in fields])
    for sid, sig in zip(subject_ids(n_subjects), sigs):
        for traj in range(1, n_trajectories + 1):
            inst = np.random.default_rng([seed, 2, int(sid[1:]), traj])
            phase0 = float(inst.uniform(0, 2 * np.pi))
            speed_factor = float(inst.uniform(0.93, 1.07))
            y_off = float(inst.uniform(-6.0, 6.0))
            for cam, A in enumerate(cams):
                seq = render_sequence(sig, A, background, textures, frames, phase0, speed_factor, y_off)
                rel = Path("seqs") / sid / str(traj) / f"c{cam}"
                d = root / rel
                d.mkdir(parents=True, exist_ok=True)
                for t, img in enumerate(seq.frames):
                    write_frame(d / f"{t:03d}.pgm", img)
                boxes = [b for b in seq.fb + seq.ub if b is not None]
                det = root / rel.parent / f"c{cam}.det"
                write_detections(det, boxes)
                pairs.extend((f, u) for f, u in zip(seq.fb, seq.ub) if f is not None and u is not None)
                records.append(SequenceRecord(sid, str(traj), f"c{cam}", d, det))
    write_transform_params(root / UB_PARAMS, fit_transform_params(pairs))
    write_manifest(root, records)
    return records
