"""Point-cloud map container: voxel downsampling, local crops, persistence.

Maps are immutable after construction; crops and downsampling return fresh
instances, so concurrent readers need no coordination.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .se3 import PoseSE3, pose_apply
from .validation import check_points, check_positive

MAP_MAGIC = b"LIDARMAP"
MAP_VERSION = 1
_FLAG_INTENSITY = 1


class MapFormatError(ValueError):
    """Malformed map container; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class PointCloudMap:
    """3D map points in a fixed world frame, optionally with intensity in [0, 1]."""

    points: np.ndarray
    intensity: np.ndarray | None = None
    voxel_resolution: float = 0.0

    def __post_init__(self):
        pts = check_points(self.points)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.intensity is not None:
            inten = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
            if inten.shape[0] != pts.shape[0]:
                raise ValueError("intensity length must match point count")
            if inten.size and (inten.min() < 0.0 or inten.max() > 1.0):
                raise ValueError("intensity must lie in [0, 1]")
            inten.setflags(write=False)
            object.__setattr__(self, "intensity", inten)

    def __len__(self) -> int:
        return self.points.shape[0]

    @staticmethod
    def empty() -> "PointCloudMap":
        return PointCloudMap(np.zeros((0, 3)))


@dataclass(frozen=True)
class CropSpec:
    """Axis-aligned crop box in the virtual-camera frame, forward-only in z.

    Keeps points with z in (0, forward], |x| <= lateral, |y| <= vertical.
    """

    forward: float = 100.0
    lateral: float = 50.0
    vertical: float = 25.0

    def __post_init__(self):
        check_positive(self.forward, "forward")
        check_positive(self.lateral, "lateral")
        check_positive(self.vertical, "vertical")


def voxel_downsample(cloud: PointCloudMap, resolution: float) -> PointCloudMap:
    """Collapse each occupied voxel of side `resolution` to its centroid.

    Cell membership is floor(p / resolution) per axis. The output is sorted by
    voxel key, so it does not depend on input point order.
    """
    check_positive(resolution, "resolution")
    if len(cloud) == 0:
        return PointCloudMap(cloud.points, cloud.intensity, resolution)
    keys = np.floor(cloud.points / resolution).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    n_cells = counts.shape[0]
    sums = np.zeros((n_cells, 3))
    np.add.at(sums, inverse, cloud.points)
    centroids = sums / counts[:, None]
    intensity = None
    if cloud.intensity is not None:
        acc = np.zeros(n_cells)
        np.add.at(acc, inverse, cloud.intensity)
        intensity = acc / counts
    return PointCloudMap(centroids, intensity, resolution)


def crop_local(cloud: PointCloudMap, h_init: PoseSE3, spec: CropSpec) -> PointCloudMap:
    """Subset of map points inside the crop box of the camera at `h_init`.

    `h_init` is camera-from-map; the returned points keep their map-frame
    coordinates. Points behind the image plane (z <= 0) are always dropped.
    """
    if len(cloud) == 0:
        return cloud
    cam = pose_apply(h_init, cloud.points)
    keep = (
        (cam[:, 2] > 0.0)
        & (cam[:, 2] <= spec.forward)
        & (np.abs(cam[:, 0]) <= spec.lateral)
        & (np.abs(cam[:, 1]) <= spec.vertical)
    )
    intensity = cloud.intensity[keep] if cloud.intensity is not None else None
    return PointCloudMap(cloud.points[keep], intensity, cloud.voxel_resolution)


def save_map(cloud: PointCloudMap, path) -> None:
    """Write the binary map container (16-byte header, u64 count, f32 records)."""
    flags = _FLAG_INTENSITY if cloud.intensity is not None else 0
    header = MAP_MAGIC + struct.pack("<II", MAP_VERSION, flags)
    if cloud.intensity is not None:
        records = np.column_stack([cloud.points, cloud.intensity]).astype("<f4")
    else:
        records = cloud.points.astype("<f4")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(struct.pack("<Q", len(cloud)))
        fh.write(records.tobytes())


def load_map(path) -> PointCloudMap:
    """Read the binary map container; malformed input raises MapFormatError."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 24:
        raise MapFormatError("truncated header", len(data))
    if data[:8] != MAP_MAGIC:
        raise MapFormatError("bad magic", 0)
    version, flags = struct.unpack("<II", data[8:16])
    if version != MAP_VERSION:
        raise MapFormatError(f"unsupported version {version}", 8)
    (count,) = struct.unpack("<Q", data[16:24])
    has_intensity = bool(flags & _FLAG_INTENSITY)
    width = 4 if has_intensity else 3
    expected = 24 + count * width * 4
    if len(data) != expected:
        raise MapFormatError(
            f"expected {expected} bytes for {count} points, got {len(data)}", min(len(data), expected)
        )
    records = np.frombuffer(data, dtype="<f4", offset=24).reshape(count, width).astype(np.float64)
    intensity = records[:, 3] if has_intensity else None
    return PointCloudMap(records[:, :3], intensity)


def save_map_ascii(cloud: PointCloudMap, path) -> None:
    """Point-per-line debug dump: 'x y z' or 'x y z intensity'."""
    with open(path, "w") as fh:
        for i in range(len(cloud)):
            x, y, z = (float(v) for v in cloud.points[i])
            if cloud.intensity is not None:
                fh.write(f"{x!r} {y!r} {z!r} {float(cloud.intensity[i])!r}\n")
            else:
                fh.write(f"{x!r} {y!r} {z!r}\n")


def load_map_ascii(path) -> PointCloudMap:
    points = []
    intensity = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) not in (3, 4):
                raise ValueError(f"line {lineno}: expected 3 or 4 values, got {len(tokens)}")
            points.append([float(t) for t in tokens[:3]])
            if len(tokens) == 4:
                intensity.append(float(tokens[3]))
    if intensity and len(intensity) != len(points):
        raise ValueError("mixed lines with and without intensity")
    pts = np.array(points).reshape(-1, 3)
    return PointCloudMap(pts, np.array(intensity) if intensity else None)
