"""KITTI odometry ingestion: Velodyne scans, trajectory files, calibration.

Layout expected under a dataset root: sequences/NN/velodyne/*.bin,
sequences/NN/calib.txt and poses/NN.txt. Parsing is total: every input either
yields a value or a positioned error.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .camera import CameraModel
from .pointmap import PointCloudMap, voxel_downsample
from .se3 import PoseSE3, matrix_to_quat, pose_apply

VELODYNE_RECORD_BYTES = 16

# Split used for the experiments this pipeline mirrors.
DEFAULT_TRAIN_SEQUENCES = ("03", "04", "05", "06", "07", "08", "09")
DEFAULT_VALIDATION_SEQUENCE = "00"


class ScanFormatError(ValueError):
    """Malformed Velodyne scan; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def read_velodyne_scan(data: bytes) -> PointCloudMap:
    """Parse packed float32 LE (x, y, z, intensity) records into a cloud."""
    if len(data) % VELODYNE_RECORD_BYTES:
        offset = (len(data) // VELODYNE_RECORD_BYTES) * VELODYNE_RECORD_BYTES
        raise ScanFormatError(
            f"trailing partial record of {len(data) - offset} bytes", offset
        )
    records = np.frombuffer(data, dtype="<f4").reshape(-1, 4).astype(np.float64)
    if records.shape[0] == 0:
        return PointCloudMap.empty()
    return PointCloudMap(records[:, :3], np.clip(records[:, 3], 0.0, 1.0))


def read_velodyne_file(path) -> PointCloudMap:
    with open(path, "rb") as fh:
        return read_velodyne_scan(fh.read())


def _orthonormalize(r: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(r)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u[:, -1] *= -1
        out = u @ vt
    return out


def read_poses(text: str) -> list[PoseSE3]:
    """Parse a trajectory file: one row-major 3x4 [R|T] line per pose.

    R is re-orthonormalized when within 1e-3 of a rotation and rejected
    otherwise. Errors name the offending line.
    """
    poses = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 12:
            raise ValueError(f"line {lineno}: expected 12 values, got {len(tokens)}")
        try:
            vals = np.array([float(t) for t in tokens]).reshape(3, 4)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        r = vals[:, :3]
        deviation = np.max(np.abs(r.T @ r - np.eye(3)))
        if deviation > 1e-3 or np.linalg.det(r) < 0:
            raise ValueError(
                f"line {lineno}: rotation block deviates from a rotation by {deviation:.2e}"
            )
        poses.append(PoseSE3(matrix_to_quat(_orthonormalize(r)), vals[:, 3]))
    return poses


def read_poses_file(path) -> list[PoseSE3]:
    return read_poses(Path(path).read_text())


def read_calib(text: str, width: int, height: int) -> CameraModel:
    """Extract the left color camera projection (the 'P2:' entry) from calib.txt.

    Image dimensions are not stored in KITTI calibration files, so the caller
    supplies them.
    """
    for line in text.splitlines():
        if not line.startswith("P2:"):
            continue
        tokens = line.split()[1:]
        if len(tokens) != 12:
            raise ValueError(f"P2 entry must have 12 values, got {len(tokens)}")
        p = np.array([float(t) for t in tokens]).reshape(3, 4)
        return CameraModel(p, width, height)
    raise ValueError("calibration text has no 'P2:' entry")


def read_calib_file(path, width: int, height: int) -> CameraModel:
    return read_calib(Path(path).read_text(), width, height)


def build_map(
    scans: list[PointCloudMap], scan_poses: list[PoseSE3], resolution: float
) -> PointCloudMap:
    """Aggregate scans into one downsampled map.

    Each pose is map-from-sensor: scan points are transformed into the map
    frame, concatenated in index order, then voxel-downsampled. The voxel
    stage sorts by cell key, so the result does not depend on scan order
    beyond centroid arithmetic.
    """
    if len(scans) != len(scan_poses):
        raise ValueError(
            f"got {len(scans)} scans but {len(scan_poses)} poses"
        )
    parts = []
    intensities = []
    has_intensity = all(s.intensity is not None for s in scans)
    for scan, pose in zip(scans, scan_poses):
        parts.append(pose_apply(pose, scan.points))
        if has_intensity:
            intensities.append(scan.intensity)
    if not parts:
        return PointCloudMap.empty()
    merged = PointCloudMap(
        np.concatenate(parts),
        np.concatenate(intensities) if has_intensity else None,
    )
    return voxel_downsample(merged, resolution)


class SequencePaths:
    """Resolved file locations for one KITTI odometry sequence."""

    def __init__(self, root, sequence: str):
        self.root = Path(root)
        self.sequence = sequence
        self.velodyne_dir = self.root / "sequences" / sequence / "velodyne"
        self.calib_path = self.root / "sequences" / sequence / "calib.txt"
        self.poses_path = self.root / "poses" / f"{sequence}.txt"

    def scan_paths(self) -> list[Path]:
        if not self.velodyne_dir.is_dir():
            raise FileNotFoundError(f"missing velodyne directory: {self.velodyne_dir}")
        return sorted(self.velodyne_dir.glob("*.bin"))

    def validate(self) -> None:
        for path in (self.velodyne_dir, self.calib_path, self.poses_path):
            if not os.path.exists(path):
                raise FileNotFoundError(f"missing dataset entry: {path}")
