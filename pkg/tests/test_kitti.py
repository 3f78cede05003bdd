import math
import struct

import numpy as np
import pytest

from lidarloc.kitti import (
    ScanFormatError,
    build_map,
    read_calib,
    read_poses,
    read_velodyne_scan,
)
from lidarloc.pointmap import PointCloudMap
from lidarloc.se3 import (
    PoseSE3,
    Quat,
    pose_apply,
    pose_to_kitti_line,
    pose_to_matrix,
    quat_from_axis_angle,
)
from tests.test_pointmap import brute_force_voxel_count


def pack_scan(records) -> bytes:
    return b"".join(struct.pack("<4f", *r) for r in records)


class TestVelodyne:
    def test_single_record(self):
        cloud = read_velodyne_scan(pack_scan([(1.0, 2.0, 3.0, 0.5)]))
        assert np.allclose(cloud.points, [[1, 2, 3]])
        assert cloud.intensity[0] == pytest.approx(0.5)

    def test_empty(self):
        assert len(read_velodyne_scan(b"")) == 0

    def test_partial_record_positioned_error(self):
        data = pack_scan([(1.0, 2.0, 3.0, 0.5)]) + b"\x00"
        with pytest.raises(ScanFormatError) as err:
            read_velodyne_scan(data)
        assert err.value.offset == 16
        with pytest.raises(ScanFormatError) as err:
            read_velodyne_scan(b"\x00" * 17)
        assert err.value.offset == 16

    def test_many_records_bit_exact(self):
        rng = np.random.default_rng(41)
        recs = [(float(x), float(y), float(z), float(i)) for x, y, z, i in
                np.column_stack([rng.uniform(-50, 50, (64, 3)), rng.uniform(0, 1, 64)])]
        cloud = read_velodyne_scan(pack_scan(recs))
        expected = np.array(recs, dtype=np.float32).astype(np.float64)
        assert np.array_equal(cloud.points, expected[:, :3])
        assert np.array_equal(cloud.intensity, expected[:, 3])


class TestPoses:
    def test_identity_line(self):
        poses = read_poses("1 0 0 0 0 1 0 0 0 0 1 0\n")
        assert len(poses) == 1
        assert np.allclose(pose_to_matrix(poses[0]), np.eye(4))

    def test_round_trip_through_serializer(self):
        q = quat_from_axis_angle((0.3, -0.5, 0.8), 1.1)
        pose = PoseSE3(q, np.array([4.0, -2.0, 9.5]))
        text = pose_to_kitti_line(pose) + "\n"
        back = read_poses(text)[0]
        assert np.allclose(pose_to_matrix(back), pose_to_matrix(pose), atol=1e-12)

    def test_scaled_rotation_rejected(self):
        with pytest.raises(ValueError, match="line 1"):
            read_poses("2 0 0 0 0 2 0 0 0 0 2 0")

    def test_wrong_token_count_rejected(self):
        with pytest.raises(ValueError, match="line 2"):
            read_poses("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0\n")

    def test_slightly_off_rotation_reorthonormalized(self):
        r = np.eye(3) + 1e-4 * np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]])
        line = " ".join(repr(float(v)) for v in np.column_stack([r, np.zeros(3)]).reshape(-1))
        pose = read_poses(line)[0]
        m = pose_to_matrix(pose)[:3, :3]
        assert np.allclose(m.T @ m, np.eye(3), atol=1e-12)

    def test_blank_lines_skipped(self):
        poses = read_poses("\n1 0 0 0 0 1 0 0 0 0 1 0\n\n")
        assert len(poses) == 1


class TestCalib:
    TEXT = (
        "P0: 700 0 600 0 0 700 180 0 0 0 1 0\n"
        "P1: 701 0 601 0 0 701 181 0 0 0 1 0\n"
        "P2: 100 0 64 0 0 100 32 0 0 0 1 0\n"
        "P3: 703 0 603 0 0 703 183 0 0 0 1 0\n"
    )

    def test_reads_p2_only(self):
        cam = read_calib(self.TEXT, width=128, height=64)
        assert cam.fx == 100 and cam.fy == 100 and cam.cx == 64 and cam.cy == 32
        assert cam.width == 128 and cam.height == 64

    def test_missing_p2_names_key(self):
        with pytest.raises(ValueError, match="P2"):
            read_calib("P0: 1 0 0 0 0 1 0 0 0 0 1 0\n", 10, 10)

    def test_wrong_value_count(self):
        with pytest.raises(ValueError, match="12"):
            read_calib("P2: 1 2 3\n", 10, 10)


class TestBuildMap:
    def test_identity_pose_is_downsampled_scan(self):
        rng = np.random.default_rng(42)
        pts = rng.uniform(0, 5, (200, 3))
        scan = PointCloudMap(pts)
        out = build_map([scan], [PoseSE3.identity()], 0.1)
        assert len(out) == brute_force_voxel_count(pts, 0.1)

    def test_far_apart_poses_double_count(self):
        rng = np.random.default_rng(43)
        pts = rng.uniform(0, 2, (300, 3))
        scan = PointCloudMap(pts)
        shift = PoseSE3(Quat.identity(), np.array([100.0, 0.0, 0.0]))
        out = build_map([scan, scan], [PoseSE3.identity(), shift], 0.1)
        single = build_map([scan], [PoseSE3.identity()], 0.1)
        assert len(out) == 2 * len(single)

    def test_matches_transform_then_hash_oracle(self):
        rng = np.random.default_rng(44)
        scans = [PointCloudMap(rng.uniform(-3, 3, (150, 3))) for _ in range(3)]
        poses = [
            PoseSE3.identity(),
            PoseSE3(quat_from_axis_angle((0, 0, 1), math.pi / 5), np.array([4.0, 1.0, 0.0])),
            PoseSE3(quat_from_axis_angle((0, 1, 0), -math.pi / 7), np.array([-2.0, 3.0, 1.0])),
        ]
        merged = np.concatenate([pose_apply(p, s.points) for p, s in zip(poses, scans)])
        out = build_map(scans, poses, 0.1)
        assert len(out) == brute_force_voxel_count(merged, 0.1)

    def test_scan_order_independent_on_grid(self):
        grid = np.stack(np.meshgrid(*[np.arange(0.05, 3.0, 0.5)] * 3), axis=-1).reshape(-1, 3)
        s1, s2 = PointCloudMap(grid), PointCloudMap(grid + np.array([10.0, 0, 0]))
        i = PoseSE3.identity()
        a = build_map([s1, s2], [i, i], 0.1)
        b = build_map([s2, s1], [i, i], 0.1)
        assert np.array_equal(a.points, b.points)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="1 scans but 2 poses"):
            build_map([PointCloudMap.empty()], [PoseSE3.identity()] * 2, 0.1)
