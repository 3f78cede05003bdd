import io
import math

import numpy as np
import pytest
from PIL import Image

from lidarloc.camera import CameraModel
from lidarloc.pointmap import CropSpec, PointCloudMap, crop_local
from lidarloc.projection import (
    AugmentParams,
    DepthImage,
    augment,
    depth_to_png_bytes,
    load_depth_raw,
    mirror_map_points,
    mirror_pose,
    pad_image,
    project,
    rotate_pose_about_optical_axis,
    save_depth_raw,
    transform_to_camera,
)
from lidarloc.se3 import PoseSE3, Quat, pose_compose, pose_to_matrix
from lidarloc.synthetic import synthetic_camera, synthetic_gt_poses, synthetic_scene


def small_camera() -> CameraModel:
    p = np.array([[100.0, 0, 64.0, 0], [0, 100.0, 32.0, 0], [0, 0, 1.0, 0]])
    return CameraModel(p, width=128, height=64)


@pytest.fixture(scope="module")
def scene():
    return synthetic_scene()


@pytest.fixture(scope="module")
def scene_camera():
    return synthetic_camera()


@pytest.fixture(scope="module")
def scene_pose():
    return synthetic_gt_poses(3)[1]


class TestProject:
    def test_principal_point(self):
        cloud = PointCloudMap(np.array([[0.0, 0.0, 10.0]]))
        img = project(cloud, PoseSE3.identity(), small_camera())
        assert img.depth[32, 64] == 10.0
        assert img.nonzero_count() == 1

    def test_offset_point_matches_hand_projection(self):
        # oracle: u = fx * x / z + cx = 100 * 1 / 10 + 64 = 74
        cloud = PointCloudMap(np.array([[1.0, 0.0, 10.0]]))
        img = project(cloud, PoseSE3.identity(), small_camera())
        assert img.depth[32, 74] == 10.0

    def test_z_buffer_keeps_minimum(self):
        cloud = PointCloudMap(np.array([[0.0, 0.0, 10.0], [0.0, 0.0, 20.0]]))
        img = project(cloud, PoseSE3.identity(), small_camera())
        assert img.depth[32, 64] == 10.0
        assert img.nonzero_count() == 1

    def test_point_order_irrelevant(self, scene, scene_camera, scene_pose):
        rng = np.random.default_rng(51)
        perm = rng.permutation(len(scene))
        shuffled = PointCloudMap(scene.points[perm])
        a = project(scene, scene_pose, scene_camera)
        b = project(shuffled, scene_pose, scene_camera)
        assert np.array_equal(a.depth, b.depth)

    def test_every_depth_is_a_point_z(self, scene, scene_camera, scene_pose):
        # exhaustive: nonzero depths must be camera-frame z values, never blends
        img = project(scene, scene_pose, scene_camera)
        z_values = set(transform_to_camera(scene, scene_pose)[:, 2])
        rendered = img.depth[img.depth > 0]
        assert all(d in z_values for d in rendered)

    def test_worker_count_independence(self, scene, scene_camera, scene_pose):
        a = project(scene, scene_pose, scene_camera, workers=1)
        b = project(scene, scene_pose, scene_camera, workers=8)
        assert np.array_equal(a.depth, b.depth)

    def test_z_near_cut(self):
        cloud = PointCloudMap(np.array([[0.0, 0.0, 0.01], [0.0, 0.0, -5.0]]))
        img = project(cloud, PoseSE3.identity(), small_camera(), z_near=0.05)
        assert img.nonzero_count() == 0

    def test_single_point_per_ray_needs_no_buffer(self):
        rng = np.random.default_rng(52)
        cam = small_camera()
        cols = rng.choice(128, 30, replace=False)
        depths = rng.uniform(5, 40, 30)
        pts = np.stack([(cols - 64.0) * depths / 100.0, np.zeros(30), depths], axis=1)
        img = project(PointCloudMap(pts), PoseSE3.identity(), cam)
        for c, d in zip(cols, depths):
            assert img.depth[32, c] == d

    def test_crop_containing_frustum_changes_nothing(self, scene, scene_camera, scene_pose):
        full = project(scene, scene_pose, scene_camera)
        cropped_cloud = crop_local(scene, scene_pose, CropSpec(200.0, 100.0, 50.0))
        cropped = project(cropped_cloud, scene_pose, scene_camera)
        assert np.array_equal(full.depth, cropped.depth)

    def test_nonzero_pixels_bounded_by_points(self, scene, scene_camera, scene_pose):
        img = project(scene, scene_pose, scene_camera)
        assert img.nonzero_count() <= len(scene)


class TestPadding:
    def test_kitti_dimensions(self):
        cam = CameraModel(small_camera().projection, width=1224, height=370)
        img = DepthImage(np.zeros((370, 1224)), PoseSE3.identity(), cam)
        padded = pad_image(img)
        assert (padded.width, padded.height) == (1280, 384)
        assert padded.camera.cx == cam.cx and padded.camera.cy == cam.cy

    def test_aligned_unchanged(self):
        cam = CameraModel(small_camera().projection, width=1280, height=384)
        img = DepthImage(np.zeros((384, 1280)), PoseSE3.identity(), cam)
        padded = pad_image(img)
        assert (padded.width, padded.height) == (1280, 384)

    def test_tiny_image(self):
        cam = CameraModel(small_camera().projection, width=1, height=1)
        img = DepthImage(np.ones((1, 1)), PoseSE3.identity(), cam)
        padded = pad_image(img)
        assert (padded.width, padded.height) == (64, 64)
        assert padded.nonzero_count() == 1
        assert int(np.sum(padded.depth == 0)) == 64 * 64 - 1

    def test_content_preserved_top_left(self):
        cam = small_camera()
        depth = np.zeros((64, 128))
        depth[10, 20] = 7.5
        padded = pad_image(DepthImage(depth, PoseSE3.identity(), cam))
        assert padded.depth[10, 20] == 7.5


def centered_camera(width=256, height=128, f=140.0) -> CameraModel:
    # principal point at (W-1)/2 so a horizontal flip is exactly u -> W-1-u
    p = np.array(
        [[f, 0, (width - 1) / 2.0, 0], [0, f, (height - 1) / 2.0, 0], [0, 0, 1.0, 0]]
    )
    return CameraModel(p, width, height)


@pytest.fixture(scope="module")
def jittered_cloud():
    # sparse enough that z-buffer collisions are rare, so resampling oracles
    # can demand per-pixel agreement
    rng = np.random.default_rng(53)
    pts = rng.uniform([-8, -4, 4], [8, 4, 30], (1500, 3))
    return PointCloudMap(pts)


class TestAugment:
    def test_identity_params_change_nothing(self, jittered_cloud):
        rgb = Image.fromarray(np.random.default_rng(0).integers(0, 255, (64, 96, 3), dtype=np.uint8))
        pose = PoseSE3.identity()
        out = augment(rgb, jittered_cloud, pose, AugmentParams.identity(), seed=3)
        assert np.array_equal(np.asarray(out.rgb), np.asarray(rgb))
        assert out.pose == pose and not out.mirrored
        assert (out.brightness, out.contrast, out.saturation, out.roll) == (1.0, 1.0, 1.0, 0.0)

    def test_mirror_pose_involution(self):
        from tests.test_se3 import random_pose

        pose = random_pose()
        twice = mirror_pose(mirror_pose(pose))
        assert np.allclose(pose_to_matrix(twice), pose_to_matrix(pose), atol=1e-9)

    def test_mirror_cloud_involution(self, jittered_cloud):
        twice = mirror_map_points(mirror_map_points(jittered_cloud))
        assert np.array_equal(twice.points, jittered_cloud.points)

    def test_mirrored_render_is_horizontal_flip(self, jittered_cloud):
        cam = centered_camera()
        pose = PoseSE3(Quat.identity(), np.array([0.3, -0.1, 0.5]))
        original = project(jittered_cloud, pose, cam)
        mirrored = project(mirror_map_points(jittered_cloud), mirror_pose(pose), cam)
        assert np.array_equal(mirrored.depth, np.fliplr(original.depth))

    def test_roll_matches_resampling_oracle(self, jittered_cloud):
        # oracle: move each rendered pixel through the +angle rotation about
        # the principal point and compare against the rotated-pose render
        cam = centered_camera()
        pose = PoseSE3.identity()
        angle = math.radians(5.0)
        base = project(jittered_cloud, pose, cam)
        turned = project(jittered_cloud, rotate_pose_about_optical_axis(pose, angle), cam)

        rows, cols = np.nonzero(base.depth)
        depths = base.depth[rows, cols]
        du = cols - cam.cx
        dv = rows - cam.cy
        u2 = math.cos(angle) * du - math.sin(angle) * dv + cam.cx
        v2 = math.sin(angle) * du + math.cos(angle) * dv + cam.cy
        u2 = np.floor(u2 + 0.5).astype(int)
        v2 = np.floor(v2 + 0.5).astype(int)
        ok = (u2 >= 0) & (u2 < cam.width) & (v2 >= 0) & (v2 < cam.height)

        matched = 0
        total = 0
        for u, v, d in zip(u2[ok], v2[ok], depths[ok]):
            total += 1
            window = turned.depth[max(0, v - 1) : v + 2, max(0, u - 1) : u + 2]
            if np.any(np.abs(window - d) < 1e-9):
                matched += 1
        assert total > 200
        assert matched / total >= 0.95

    def test_mirror_applied_twice_restores_pose(self, jittered_cloud):
        rgb = Image.new("RGB", (96, 64), (120, 60, 30))
        pose = PoseSE3(Quat.identity(), np.array([1.0, 2.0, 3.0]))
        params = AugmentParams((1, 1), (1, 1), (1, 1), mirror_prob=1.0, max_roll=0.0)
        once = augment(rgb, jittered_cloud, pose, params, seed=1)
        assert once.mirrored
        twice = augment(once.rgb, jittered_cloud, once.pose, params, seed=2)
        assert np.allclose(pose_to_matrix(twice.pose), pose_to_matrix(pose), atol=1e-9)
        assert np.array_equal(np.asarray(twice.rgb), np.asarray(rgb))

    def test_factors_within_ranges(self, jittered_cloud):
        rgb = Image.new("RGB", (32, 32), (100, 100, 100))
        params = AugmentParams()
        for seed in range(20):
            out = augment(rgb, jittered_cloud, PoseSE3.identity(), params, seed)
            for f in (out.brightness, out.contrast, out.saturation):
                assert 0.9 <= f <= 1.1
            assert abs(out.roll) <= math.radians(5.0)

    def test_deterministic_per_seed(self, jittered_cloud):
        rgb = Image.new("RGB", (32, 32), (90, 140, 190))
        a = augment(rgb, jittered_cloud, PoseSE3.identity(), AugmentParams(), 9)
        b = augment(rgb, jittered_cloud, PoseSE3.identity(), AugmentParams(), 9)
        assert a.pose == b.pose and a.mirrored == b.mirrored
        assert np.array_equal(np.asarray(a.rgb), np.asarray(b.rgb))


class TestExport:
    def test_png_quantization(self):
        cam = small_camera()
        depth = np.zeros((64, 128))
        depth[5, 7] = 12.25
        depth[6, 8] = 300.0  # clips at the 16-bit ceiling
        img = DepthImage(depth, PoseSE3.identity(), cam)
        png = Image.open(io.BytesIO(depth_to_png_bytes(img)))
        arr = np.asarray(png)
        assert arr.dtype == np.uint16 or arr.dtype == np.int32
        assert arr[5, 7] == round(12.25 * 256)
        assert arr[6, 8] == 65535
        assert arr[0, 0] == 0

    def test_png_scale_recorded(self):
        img = DepthImage(np.zeros((8, 8)), PoseSE3.identity(), CameraModel(small_camera().projection, 8, 8))
        png = Image.open(io.BytesIO(depth_to_png_bytes(img)))
        assert "256" in png.text["depth_scale"]

    def test_raw_round_trip(self, tmp_path):
        rng = np.random.default_rng(54)
        depth = np.where(rng.random((32, 48)) < 0.3, rng.uniform(1, 80, (32, 48)), 0.0)
        img = DepthImage(depth, PoseSE3.identity(), CameraModel(small_camera().projection, 48, 32))
        path = tmp_path / "img.raw"
        save_depth_raw(img, path)
        back = load_depth_raw(path)
        assert np.array_equal(back, depth.astype(np.float32).astype(np.float64))

    def test_raw_rejects_garbage(self, tmp_path):
        path = tmp_path / "junk.raw"
        path.write_bytes(b"\x01" * 40)
        with pytest.raises(ValueError):
            load_depth_raw(path)
