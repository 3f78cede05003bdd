"""Pinhole camera model: 3x4 projection matrix, image size, padding state."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .validation import as_float_array


def next_multiple_of_64(value: int) -> int:
    return int(math.ceil(value / 64.0)) * 64


@dataclass(frozen=True)
class CameraModel:
    """Projection p ~ P @ [x y z 1]^T with P = [[fx,0,cx,t1],[0,fy,cy,t2],[0,0,1,t3]].

    The fourth column carries the stereo-rig offset of pre-rectified setups.
    pad_right/pad_bottom stay zero until padding is applied; padded dimensions
    are always multiples of 64.
    """

    projection: np.ndarray
    width: int
    height: int
    pad_right: int = 0
    pad_bottom: int = 0

    def __post_init__(self):
        p = as_float_array(self.projection, "projection matrix")
        if p.shape != (3, 4):
            raise ValueError(f"projection matrix must be 3x4, got {p.shape}")
        if p[0, 0] <= 0 or p[1, 1] <= 0:
            raise ValueError("focal entries P[0,0] and P[1,1] must be positive")
        p.setflags(write=False)
        object.__setattr__(self, "projection", p)
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.pad_right or self.pad_bottom:
            if (self.width + self.pad_right) % 64 or (self.height + self.pad_bottom) % 64:
                raise ValueError("padded dimensions must be multiples of 64")

    @property
    def fx(self) -> float:
        return float(self.projection[0, 0])

    @property
    def fy(self) -> float:
        return float(self.projection[1, 1])

    @property
    def cx(self) -> float:
        return float(self.projection[0, 2])

    @property
    def cy(self) -> float:
        return float(self.projection[1, 2])

    @property
    def padded_width(self) -> int:
        return self.width + self.pad_right

    @property
    def padded_height(self) -> int:
        return self.height + self.pad_bottom

    def padded(self) -> "CameraModel":
        """Camera with right/bottom padding up to the next multiples of 64.

        Padding never changes the projection matrix; it only extends the
        canvas, so it must be applied after projection.
        """
        return replace(
            self,
            pad_right=next_multiple_of_64(self.width) - self.width,
            pad_bottom=next_multiple_of_64(self.height) - self.height,
        )

    def project_points(self, cam_points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Homogeneous projection of (N, 3) camera-frame points.

        Returns continuous pixel columns/rows (u, v); callers decide rounding
        and validity (w > 0 is the caller's responsibility via a z cut).
        """
        p = self.projection
        uvw = cam_points @ p[:, :3].T + p[:, 3]
        return uvw[:, 0] / uvw[:, 2], uvw[:, 1] / uvw[:, 2]

    def back_project(self, u: np.ndarray, v: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Camera-frame points for pixel coordinates and metric depth z.

        Inverts the pinhole structure documented on this class; raises if the
        projection matrix does not have that zero pattern.
        """
        p = self.projection
        zero_slots = [p[0, 1], p[1, 0], p[2, 0], p[2, 1]]
        if max(abs(s) for s in zero_slots) > 1e-9 or abs(p[2, 2] - 1.0) > 1e-9:
            raise ValueError("back_project requires a pinhole-structured projection matrix")
        w = z + p[2, 3]
        x = (np.asarray(u) * w - p[0, 2] * z - p[0, 3]) / p[0, 0]
        y = (np.asarray(v) * w - p[1, 2] * z - p[1, 3]) / p[1, 1]
        return np.stack([x, y, np.asarray(z, dtype=np.float64)], axis=-1)
