import numpy as np
import pytest

from lidarloc.pointmap import (
    CropSpec,
    MapFormatError,
    PointCloudMap,
    crop_local,
    load_map,
    load_map_ascii,
    save_map,
    save_map_ascii,
    voxel_downsample,
)
from lidarloc.se3 import PoseSE3, pose_apply, pose_inverse
from tests.test_se3 import random_pose


def brute_force_voxel_count(points: np.ndarray, resolution: float) -> int:
    """Oracle: exhaustive hash of floor(p / r) triples."""
    cells = {tuple(np.floor(p / resolution).astype(int)) for p in points}
    return len(cells)


class TestVoxelDownsample:
    def test_same_cell_collapses_to_midpoint(self):
        cloud = PointCloudMap(np.array([[0.04, 0.04, 0.04], [0.05, 0.05, 0.05]]))
        out = voxel_downsample(cloud, 0.1)
        assert len(out) == 1
        assert np.allclose(out.points[0], [0.045, 0.045, 0.045])

    def test_distinct_cells_unchanged(self):
        grid = np.stack(np.meshgrid(*[np.arange(4.0)] * 3), axis=-1).reshape(-1, 3)
        cloud = PointCloudMap(grid + 0.5)
        out = voxel_downsample(cloud, 0.1)
        assert len(out) == len(cloud)

    def test_matches_brute_force_cell_count(self):
        rng = np.random.default_rng(31)
        pts = rng.uniform(0, 1, (10_000, 3))
        out = voxel_downsample(PointCloudMap(pts), 0.1)
        assert len(out) == brute_force_voxel_count(pts, 0.1)

    def test_negative_coordinates(self):
        pts = np.array([[-0.05, -0.05, -0.05], [-0.02, -0.02, -0.02], [0.02, 0.02, 0.02]])
        out = voxel_downsample(PointCloudMap(pts), 0.1)
        # floor semantics: the two negative points share cell (-1,-1,-1)
        assert len(out) == 2

    def test_idempotent_at_same_resolution(self):
        rng = np.random.default_rng(32)
        cloud = voxel_downsample(PointCloudMap(rng.uniform(0, 5, (5000, 3))), 0.25)
        again = voxel_downsample(cloud, 0.25)
        assert len(again) == len(cloud)
        assert np.allclose(np.sort(again.points, axis=0), np.sort(cloud.points, axis=0))

    def test_order_independent(self):
        rng = np.random.default_rng(33)
        pts = rng.uniform(0, 2, (3000, 3))
        a = voxel_downsample(PointCloudMap(pts), 0.2)
        b = voxel_downsample(PointCloudMap(pts[::-1]), 0.2)
        assert np.allclose(a.points, b.points)

    def test_intensity_averaged(self):
        cloud = PointCloudMap(np.array([[0.01, 0.0, 0.0], [0.02, 0.0, 0.0]]), np.array([0.2, 0.6]))
        out = voxel_downsample(cloud, 0.1)
        assert out.intensity[0] == pytest.approx(0.4)

    def test_rejects_non_positive_resolution(self):
        with pytest.raises(ValueError):
            voxel_downsample(PointCloudMap.empty(), 0.0)

    def test_count_never_increases(self):
        rng = np.random.default_rng(34)
        pts = rng.uniform(0, 1, (500, 3))
        assert len(voxel_downsample(PointCloudMap(pts), 0.05)) <= 500


class TestCropLocal:
    SPEC = CropSpec(forward=10.0, lateral=5.0, vertical=3.0)

    def test_point_behind_plane_excluded(self):
        cloud = PointCloudMap(np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 1.0]]))
        out = crop_local(cloud, PoseSE3.identity(), self.SPEC)
        assert len(out) == 1 and out.points[0, 2] == 1.0

    def test_empty_map(self):
        out = crop_local(PointCloudMap.empty(), PoseSE3.identity(), self.SPEC)
        assert len(out) == 0

    def test_matches_brute_force_membership(self):
        rng = np.random.default_rng(35)
        pts = rng.uniform(-15, 15, (1000, 3))
        pose = random_pose(rng)
        out = crop_local(PointCloudMap(pts), pose, self.SPEC)
        kept = {tuple(p) for p in out.points}
        for p in pts:
            q = pose_apply(pose, p)
            inside = 0 < q[2] <= 10 and abs(q[0]) <= 5 and abs(q[1]) <= 3
            assert (tuple(p) in kept) == inside

    def test_crop_is_subset(self):
        rng = np.random.default_rng(36)
        pts = rng.uniform(-15, 15, (500, 3))
        out = crop_local(PointCloudMap(pts), random_pose(rng), self.SPEC)
        source = {tuple(p) for p in pts}
        assert all(tuple(p) in source for p in out.points)

    def test_boundary_inclusive_on_forward(self):
        cloud = PointCloudMap(np.array([[0.0, 0.0, 10.0], [0.0, 0.0, 10.0001]]))
        out = crop_local(cloud, PoseSE3.identity(), self.SPEC)
        assert len(out) == 1

    def test_crop_downsample_commute_on_grids(self):
        # exact on integer grids where centroids are the points themselves
        grid = np.stack(np.meshgrid(*[np.arange(0.25, 8.0)] * 3), axis=-1).reshape(-1, 3)
        cloud = PointCloudMap(grid)
        pose = PoseSE3.identity()
        spec = CropSpec(6.0, 4.0, 4.0)
        a = voxel_downsample(crop_local(cloud, pose, spec), 0.5)
        b = crop_local(voxel_downsample(cloud, 0.5), pose, spec)
        assert np.allclose(np.sort(a.points, axis=0), np.sort(b.points, axis=0))


class TestPersistence:
    def test_binary_round_trip(self, tmp_path):
        rng = np.random.default_rng(37)
        pts = rng.uniform(-100, 100, (257, 3)).astype(np.float32).astype(np.float64)
        cloud = PointCloudMap(pts, rng.uniform(0, 1, 257).astype(np.float32).astype(np.float64))
        path = tmp_path / "map.bin"
        save_map(cloud, path)
        back = load_map(path)
        assert np.array_equal(back.points, cloud.points)
        assert np.array_equal(back.intensity, cloud.intensity)
        save_map(back, tmp_path / "map2.bin")
        assert (tmp_path / "map.bin").read_bytes() == (tmp_path / "map2.bin").read_bytes()

    def test_binary_layout(self, tmp_path):
        cloud = PointCloudMap(np.array([[1.0, 2.0, 3.0]]))
        path = tmp_path / "one.bin"
        save_map(cloud, path)
        data = path.read_bytes()
        assert data[:8] == b"LIDARMAP"
        assert len(data) == 16 + 8 + 12
        assert int.from_bytes(data[16:24], "little") == 1

    def test_truncated_rejected(self, tmp_path):
        cloud = PointCloudMap(np.array([[1.0, 2.0, 3.0]]))
        path = tmp_path / "bad.bin"
        save_map(cloud, path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(MapFormatError):
            load_map(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTAMAP!" + b"\x00" * 32)
        with pytest.raises(MapFormatError) as err:
            load_map(path)
        assert err.value.offset == 0

    def test_ascii_round_trip(self, tmp_path):
        cloud = PointCloudMap(np.array([[1.5, -2.25, 3.0], [0.0, 0.5, 9.75]]), np.array([0.25, 1.0]))
        path = tmp_path / "map.txt"
        save_map_ascii(cloud, path)
        back = load_map_ascii(path)
        assert np.array_equal(back.points, cloud.points)
        assert np.array_equal(back.intensity, cloud.intensity)


class TestInvariants:
    def test_intensity_range_validated(self):
        with pytest.raises(ValueError):
            PointCloudMap(np.zeros((1, 3)), np.array([1.5]))

    def test_crop_spec_positive(self):
        with pytest.raises(ValueError):
            CropSpec(forward=-1.0)
