"""Dense optical flow and first-order kinematic fields of the flow."""
from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .media import Frame


@dataclass(frozen=True)
class FlowParams:
    levels: int = 3
    pyr_scale: float = 0.5
    poly_n: int = 5
    poly_sigma: float = 1.1
    winsize: int = 15
    iterations: int = 3
    # reflective padding; the solver is unstable in the outermost rows/cols
    pad: int = 16


@dataclass(frozen=True, eq=False)
class FlowField:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise ValueError("u and v must be 2-D planes of equal shape")

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def height(self) -> int:
        return self.u.shape[0]

    def resized(self, width: int, height: int) -> "FlowField":
        """Resample to another resolution, rescaling displacements."""
        sx, sy = width / self.width, height / self.height
        u = cv2.resize(self.u, (width, height), interpolation=cv2.INTER_LINEAR) * sx
        v = cv2.resize(self.v, (width, height), interpolation=cv2.INTER_LINEAR) * sy
        return FlowField(u, v)


@dataclass(frozen=True, eq=False)
class KinematicMaps:
    div: np.ndarray
    curl: np.ndarray
    hyp1: np.ndarray
    hyp2: np.ndarray
    shear: np.ndarray

    @property
    def width(self) -> int:
        return self.div.shape[1]

    @property
    def height(self) -> int:
        return self.div.shape[0]


def _plane(x) -> np.ndarray:
    g = x.gray if isinstance(x, Frame) else np.asarray(x, dtype=np.float64)
    return g


def estimate_flow(prev, next, params: FlowParams = FlowParams()) -> FlowField:
    """Pyramidal polynomial-expansion flow from ``prev`` to ``next``.

    Accepts Frames or bare gray planes in [0, 1].
    """
    a, b = _plane(prev), _plane(next)
    if a.shape != b.shape:
        raise ValueError(f"frame dimensions differ: {a.shape[::-1]} vs {b.shape[::-1]}")
    p = params.pad
    a32 = cv2.copyMakeBorder((a * 255.0).astype(np.float32), p, p, p, p, cv2.BORDER_REFLECT_101)
    b32 = cv2.copyMakeBorder((b * 255.0).astype(np.float32), p, p, p, p, cv2.BORDER_REFLECT_101)
    f = cv2.calcOpticalFlowFarneback(a32, b32, None, params.pyr_scale, params.levels,
                                     params.winsize, params.iterations, params.poly_n,
                                     params.poly_sigma, 0)
    f = f[p:p + a.shape[0], p:p + a.shape[1]].astype(np.float64)
    return FlowField(np.ascontiguousarray(f[..., 0]), np.ascontiguousarray(f[..., 1]))


def kinematic_maps(flow: FlowField) -> KinematicMaps:
    # central differences inside, one-sided on the border rows/columns
    du_dy, du_dx = np.gradient(flow.u)
    dv_dy, dv_dx = np.gradient(flow.v)
    hyp1 = du_dx - dv_dy
    hyp2 = du_dy + dv_dx
    return KinematicMaps(
        div=du_dx + dv_dy,
        curl=-du_dy + dv_dx,
        hyp1=hyp1,
        hyp2=hyp2,
        shear=np.hypot(hyp1, hyp2),
    )
