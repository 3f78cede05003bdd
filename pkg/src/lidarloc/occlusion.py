"""Occlusion-estimation filter: drop projected points hidden by closer ones.

A nonzero pixel is back-projected to its 3D point P_j. Among the nonzero
pixels of its window whose depth is strictly smaller, each neighbor P_i
subtends an angle theta = arccos(v . c) with the line of sight v (unit vector
from P_j to the pinhole), where c = (P_i - P_j) / |P_i - P_j|. The pixel is
occluded when the smallest such theta falls below `angle_min`: some closer
point sits almost exactly between P_j and the camera. Pixels with no closer
neighbor are visible. Per-pixel decisions are independent, which keeps the
filter embarrassingly parallel and the vectorized and reference paths exactly
equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .projection import DepthImage


@dataclass(frozen=True)
class OcclusionParams:
    """window: odd neighborhood side in pixels; angle_min: radians in (0, pi/2)."""

    window: int = 5
    angle_min: float = math.pi / 2 - math.atan(3.0)

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if not 0.0 < self.angle_min < math.pi / 2:
            raise ValueError(f"angle_min must lie in (0, pi/2), got {self.angle_min}")

    @staticmethod
    def from_threshold(window: int = 5, threshold: float = 3.0) -> "OcclusionParams":
        """Map the published dimensionless threshold onto angle_min.

        angle_min = pi/2 - arctan(threshold): a larger threshold gives a
        smaller cutoff angle and therefore a laxer filter. The mapping is a
        declared assumption kept in this one place.
        """
        if threshold <= 0:
            raise ValueError(f"threshold must be positive, got {threshold}")
        return OcclusionParams(window, math.pi / 2 - math.atan(threshold))


def _backproject_grid(img: DepthImage) -> np.ndarray:
    """(H, W, 3) camera-frame points for every pixel (garbage where depth = 0)."""
    rows, cols = np.indices(img.depth.shape)
    return img.camera.back_project(cols.astype(np.float64), rows.astype(np.float64), img.depth)


def occlusion_filter(img: DepthImage, params: OcclusionParams) -> DepthImage:
    """Zero out occluded pixels; vectorized over window offsets."""
    depth = img.depth
    nonzero = depth > 0
    pts = _backproject_grid(img)
    v = -pts
    v_norm = np.sqrt(pts[..., 0] ** 2 + pts[..., 1] ** 2 + pts[..., 2] ** 2)

    h, w = depth.shape
    half = params.window // 2
    min_angle = np.full((h, w), np.inf)

    for di in range(-half, half + 1):
        for dj in range(-half, half + 1):
            if di == 0 and dj == 0:
                continue
            # Overlap of the grid with itself shifted by (di, dj): the slice
            # [dst] indexes pixel j, [src] its neighbor i = j + (di, dj).
            dst_r = slice(max(0, -di), h - max(0, di))
            src_r = slice(max(0, di), h + min(0, di))
            dst_c = slice(max(0, -dj), w - max(0, dj))
            src_c = slice(max(0, dj), w + min(0, dj))

            d_j = depth[dst_r, dst_c]
            d_i = depth[src_r, src_c]
            mask = nonzero[dst_r, dst_c] & nonzero[src_r, src_c] & (d_i < d_j)
            if not mask.any():
                continue
            p_j = pts[dst_r, dst_c]
            p_i = pts[src_r, src_c]
            diff = p_i - p_j
            diff_norm = np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2 + diff[..., 2] ** 2)
            dot = (
                v[dst_r, dst_c, 0] * diff[..., 0]
                + v[dst_r, dst_c, 1] * diff[..., 1]
                + v[dst_r, dst_c, 2] * diff[..., 2]
            )
            with np.errstate(invalid="ignore", divide="ignore"):
                cosang = dot / (v_norm[dst_r, dst_c] * diff_norm)
            ang = np.arccos(np.clip(cosang, -1.0, 1.0))
            target = min_angle[dst_r, dst_c]
            np.copyto(target, ang, where=mask & (ang < target))

    occluded = nonzero & (min_angle < params.angle_min)
    out = depth.copy()
    out[occluded] = 0.0
    return DepthImage(out, img.generating_pose, img.camera)


def brute_force_visibility(img: DepthImage, params: OcclusionParams) -> np.ndarray:
    """Reference visibility mask from the direct per-pixel double loop.

    True where a nonzero pixel survives the angle rule, False for occluded
    and zero-depth pixels. Kept deliberately unoptimized as the oracle the
    fast path is tested against.
    """
    depth = img.depth
    h, w = depth.shape
    pts = _backproject_grid(img)
    half = params.window // 2
    visible = np.zeros((h, w), dtype=bool)

    for r in range(h):
        for c in range(w):
            if depth[r, c] <= 0:
                continue
            p_j = pts[r, c]
            v = -p_j
            v_norm = math.sqrt(p_j[0] ** 2 + p_j[1] ** 2 + p_j[2] ** 2)
            best = math.inf
            for ri in range(max(0, r - half), min(h, r + half + 1)):
                for ci in range(max(0, c - half), min(w, c + half + 1)):
                    if ri == r and ci == c:
                        continue
                    if depth[ri, ci] <= 0 or not depth[ri, ci] < depth[r, c]:
                        continue
                    diff = pts[ri, ci] - p_j
                    diff_norm = math.sqrt(diff[0] ** 2 + diff[1] ** 2 + diff[2] ** 2)
                    cosang = (v[0] * diff[0] + v[1] * diff[1] + v[2] * diff[2]) / (v_norm * diff_norm)
                    ang = math.acos(min(1.0, max(-1.0, cosang)))
                    if ang < best:
                        best = ang
            visible[r, c] = not best < params.angle_min
    return visible
