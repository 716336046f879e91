"""Experiment configuration: a flat ``key = value`` text file."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from ..tracklets import SUBTYPES, TrackletParams


class ConfigError(ValueError):
    pass


def parse_ft(ft: str) -> Tuple[bool, bool, bool, bool]:
    """'ft1011' (or '1011') -> flags for coords, div+curl, curl+shear, div+shear."""
    bits = ft[2:] if ft.startswith("ft") else ft
    if len(bits) != 4 or set(bits) - {"0", "1"}:
        raise ConfigError(f"feature string must be 'ft' + four 0/1 flags, got {ft!r}")
    flags = tuple(b == "1" for b in bits)
    if not any(flags):
        raise ConfigError("feature string selects no descriptor subtype")
    return flags


def feature_mask(ft: str, params: TrackletParams = TrackletParams()) -> np.ndarray:
    flags = parse_ft(ft)
    return np.concatenate([np.full(n, f) for n, f in zip(params.block_dims, flags)])


def selected_split(ft: str, params: TrackletParams = TrackletParams()) -> Tuple[int, ...]:
    return tuple(n for n, f in zip(params.block_dims, parse_ft(ft)) if f)


def selected_names(ft: str):
    return tuple(n for n, f in zip(SUBTYPES, parse_ft(ft)) if f)


def _parse_dim(text: str) -> Union[None, int, float]:
    """'none' | '64' | '40%' | '0.4'."""
    t = text.strip().lower()
    if t in ("", "none", "off", "0"):
        return None
    if t.endswith("%"):
        return float(t[:-1]) / 100.0
    if "." in t:
        return float(t)
    return int(t)


def _fmt_dim(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return f"{v * 100:g}%"
    return str(v)


def _parse_levels(text: str) -> Tuple[Tuple[int, int], ...]:
    t = text.strip().lower()
    if t in ("baseline", ""):
        return ((2, 1),)
    if t == "pyr":
        return ((1, 1), (2, 1))
    levels = []
    for part in t.split(","):
        r, _, c = part.strip().partition("x")
        levels.append((int(r), int(c)))
    return tuple(levels)


def _parse_list(text: str) -> Tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _opt_int(text: str) -> Optional[int]:
    t = text.strip().lower()
    return None if t in ("", "none") else int(t)


@dataclass
class ExperimentConfig:
    dataset_root: str = "."
    train_trajectories: Tuple[str, ...] = ("1", "2")
    test_trajectories: Tuple[str, ...] = ("3",)
    dict_trajectories: Tuple[str, ...] = ()
    cameras: Tuple[str, ...] = ()
    features: str = "ft1111"
    K: int = 16
    pcal: Union[None, int, float] = 32
    pcah: Union[None, int, float] = 64
    pyramid: Tuple[Tuple[int, int], ...] = ((2, 1),)
    temporal_cells: int = 1
    subseq_len: Optional[int] = None
    subseq_overlap: int = 0
    C: float = 1.0
    seed: int = 0
    mirror: bool = True
    detections: str = "files"
    bg_train_frames: int = 40
    n_scales: int = 8
    max_fit_descriptors: int = 20000
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        parse_ft(self.features)
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if set(self.train_trajectories) & set(self.test_trajectories):
            raise ConfigError("train and test trajectories overlap")
        if self.detections not in ("files", "background"):
            raise ConfigError("detections must be 'files' or 'background'")
        if self.C <= 0:
            raise ConfigError("C must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def tracklet_params(self) -> TrackletParams:
        return TrackletParams(n_scales=self.n_scales)

    @property
    def dictionary_trajectories(self) -> Tuple[str, ...]:
        return self.dict_trajectories or self.train_trajectories

    _PARSERS = {
        "train_trajectories": _parse_list, "test_trajectories": _parse_list,
        "dict_trajectories": _parse_list, "cameras": _parse_list,
        "K": int, "pcal": _parse_dim, "pcah": _parse_dim, "pyramid": _parse_levels,
        "temporal_cells": int, "subseq_len": _opt_int, "subseq_overlap": int,
        "C": float, "seed": int, "mirror": _parse_bool, "bg_train_frames": int,
        "n_scales": int, "max_fit_descriptors": int, "workers": int,
    }

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or key not in names:
                raise ConfigError(f"line {lineno}: unknown or malformed entry {raw.strip()!r}")
            try:
                kwargs[key] = cls._PARSERS.get(key, str)(value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        kwargs.update(overrides)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        path = Path(path)
        cfg = cls.from_text(path.read_text(), **overrides)
        root = Path(cfg.dataset_root)
        if not root.is_absolute():
            cfg.dataset_root = str((path.parent / root).resolve())
        return cfg

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name in ("pcal", "pcah"):
                s = _fmt_dim(v)
            elif f.name == "pyramid":
                s = ",".join(f"{r}x{c}" for r, c in v)
            elif isinstance(v, tuple):
                s = ",".join(v)
            elif isinstance(v, bool):
                s = "true" if v else "false"
            elif v is None:
                s = "none"
            else:
                s = str(v)
            lines.append(f"{f.name} = {s}")
        return "\n".join(lines) + "\n"

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)
