"""Frame sequences on disk (binary PGM/PPM) and mirror augmentation."""
from __future__ import annotations

import dataclasses
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

MIN_SIDE = 16
LUMA = np.array([0.299, 0.587, 0.114])


class MediaError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Frame:
    """One image. ``gray`` is (height, width) in [0, 1]; ``color`` is
    (height, width, 3) in [0, 1] or None."""

    gray: np.ndarray
    color: Optional[np.ndarray] = None
    index: int = 0

    def __post_init__(self):
        gray = np.asarray(self.gray, dtype=np.float64)
        if gray.ndim != 2:
            raise MediaError(f"gray plane must be 2-D, got shape {gray.shape}")
        h, w = gray.shape
        if h < MIN_SIDE or w < MIN_SIDE:
            raise MediaError(f"frame {w}x{h} smaller than {MIN_SIDE}x{MIN_SIDE}")
        gray.setflags(write=False)
        object.__setattr__(self, "gray", gray)
        if self.color is not None:
            color = np.asarray(self.color, dtype=np.float64)
            if color.shape != (h, w, 3):
                raise MediaError(f"color plane {color.shape} does not match gray {gray.shape}")
            color.setflags(write=False)
            object.__setattr__(self, "color", color)

    @property
    def width(self) -> int:
        return self.gray.shape[1]

    @property
    def height(self) -> int:
        return self.gray.shape[0]

    def rgb(self) -> np.ndarray:
        """Color plane, or the gray plane replicated on three channels."""
        if self.color is not None:
            return self.color
        return np.repeat(self.gray[:, :, None], 3, axis=2)

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        if self.index != other.index or not np.array_equal(self.gray, other.gray):
            return False
        if (self.color is None) != (other.color is None):
            return False
        return self.color is None or np.array_equal(self.color, other.color)


@dataclass(frozen=True)
class FrameSequence:
    frames: tuple
    camera_id: str
    subject_id: Optional[str] = None
    trajectory_id: Optional[str] = None
    mirrored: bool = False

    def __post_init__(self):
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        for a, b in zip(frames, frames[1:]):
            if b.index <= a.index:
                raise MediaError("frame indices must be strictly increasing")
            if a.gray.shape != b.gray.shape:
                raise MediaError("all frames of a sequence must share dimensions")

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height


_TOKEN = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)")


def _read_netpbm(path: Path):
    data = path.read_bytes()
    pos = 0
    tokens = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise MediaError(f"{path.name}: truncated header")
        tokens.append(m.group(2))
        pos = m.end()
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise MediaError(f"{path.name}: unsupported format {magic!r}, expected P5 or P6")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MediaError(f"{path.name}: malformed header") from None
    if maxval != 255:
        raise MediaError(f"{path.name}: maxval {maxval} not supported (need 255)")
    pos += 1  # single whitespace after maxval
    channels = 3 if magic == b"P6" else 1
    size = w * h * channels
    raster = data[pos:pos + size]
    if len(raster) != size:
        raise MediaError(f"{path.name}: expected {size} raster bytes, found {len(raster)}")
    arr = np.frombuffer(raster, dtype=np.uint8).astype(np.float64) / 255.0
    if channels == 3:
        return arr.reshape(h, w, 3)
    return arr.reshape(h, w)


def read_frame(path, index: int = 0) -> Frame:
    path = Path(path)
    try:
        arr = _read_netpbm(path)
    except OSError as exc:
        raise MediaError(f"{path.name}: {exc}") from exc
    try:
        if arr.ndim == 3:
            return Frame(gray=arr @ LUMA, color=arr, index=index)
        return Frame(gray=arr, index=index)
    except MediaError as exc:
        raise MediaError(f"{path.name}: {exc}") from None


def write_frame(path, frame_or_array) -> None:
    """Write a PGM (2-D input) or PPM (H x W x 3 input); values in [0, 1]."""
    if isinstance(frame_or_array, Frame):
        arr = frame_or_array.color if frame_or_array.color is not None else frame_or_array.gray
    else:
        arr = np.asarray(frame_or_array)
    raster = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    magic = b"P6" if raster.ndim == 3 else b"P5"
    h, w = raster.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(raster.tobytes())


def load_sequence(directory, camera_id: str, subject_id=None, trajectory_id=None) -> FrameSequence:
    directory = Path(directory)
    if not directory.is_dir():
        raise MediaError(f"missing sequence directory: {directory}")
    entries = []
    for name in os.listdir(directory):
        stem, ext = os.path.splitext(name)
        if ext.lower() in (".pgm", ".ppm") and stem.isdigit():
            entries.append((int(stem), name))
    if not entries:
        raise MediaError(f"no PGM/PPM frames in {directory}")
    entries.sort()
    frames = [read_frame(directory / name, index=idx) for idx, name in entries]
    shape = frames[0].gray.shape
    for (_, name), fr in zip(entries, frames):
        if fr.gray.shape != shape:
            raise MediaError(f"{name}: dimensions {fr.gray.shape[::-1]} differ from {shape[::-1]}")
    return FrameSequence(frames=tuple(frames), camera_id=camera_id,
                         subject_id=subject_id, trajectory_id=trajectory_id)


def mirror_frame(frame: Frame) -> Frame:
    color = None if frame.color is None else frame.color[:, ::-1, :].copy()
    return Frame(gray=frame.gray[:, ::-1].copy(), color=color, index=frame.index)


def mirror_sequence(seq: FrameSequence) -> FrameSequence:
    """Horizontal flip of every plane; toggles ``mirrored``."""
    return dataclasses.replace(seq, frames=tuple(mirror_frame(f) for f in seq.frames),
                               mirrored=not seq.mirrored)
