"""Bundled procedural test scene: a street of walls, poles, boxes and ground.

Everything here is deterministic for a given seed, so tests and the CLI can
run against a realistic ~50k-point map with zero external downloads. The map
frame matches the camera frame of the first trajectory pose: x right, y down,
z forward along the street.
"""

from __future__ import annotations

import math

import numpy as np

from .camera import CameraModel
from .pointmap import PointCloudMap, voxel_downsample
from .se3 import PoseSE3, euler_zyx_to_quat, pose_compose, pose_inverse

DEFAULT_SCENE_SEED = 20240
GROUND_Y = 1.65  # camera height above the road, y points down


def synthetic_camera(width: int = 384, height: int = 192) -> CameraModel:
    """Pinhole camera with a centered principal point and ~77 deg horizontal FOV."""
    f = 240.0 * width / 384.0
    p = np.array(
        [
            [f, 0.0, width / 2.0, 0.0],
            [0.0, f, height / 2.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ]
    )
    return CameraModel(p, width, height)


def _grid_surface(rng, u_lo, u_hi, v_lo, v_hi, step, jitter):
    u = np.arange(u_lo, u_hi + 1e-9, step)
    v = np.arange(v_lo, v_hi + 1e-9, step)
    uu, vv = np.meshgrid(u, v)
    pts = np.stack([uu.ravel(), vv.ravel()], axis=1)
    pts += rng.uniform(-jitter, jitter, pts.shape)
    return pts


def _wall(rng, x, z_lo, z_hi, y_top, step=0.16, n_pilasters=0):
    """Vertical plane at fixed x spanning [z_lo, z_hi] x [y_top, GROUND_Y].

    Pilasters (columns proud of the face) at aperiodic random positions add
    depth texture that breaks the translation-along-wall ambiguity of a flat
    plane; regular spacing would instead manufacture shift-symmetric traps.
    """
    zy = _grid_surface(rng, z_lo, z_hi, y_top, GROUND_Y, step, 0.03)
    pts = np.column_stack([np.full(len(zy), x), zy[:, 1], zy[:, 0]])
    pts[:, 0] += rng.uniform(-0.02, 0.02, len(pts))
    for _ in range(n_pilasters):
        center = rng.uniform(z_lo + 0.5, z_hi - 0.5)
        width = rng.uniform(0.35, 0.8)
        depth = rng.uniform(0.3, 0.6)
        on_column = np.abs(pts[:, 2] - center) < width / 2
        pts[on_column, 0] -= math.copysign(depth, x)
    return pts


def _facade(rng, z, x_lo, x_hi, y_top, step=0.18, n_recesses=0):
    """Vertical plane at fixed z facing the camera, optionally with recesses
    at aperiodic random positions."""
    xy = _grid_surface(rng, x_lo, x_hi, y_top, GROUND_Y, step, 0.03)
    pts = np.column_stack([xy[:, 0], xy[:, 1], np.full(len(xy), z)])
    pts[:, 2] += rng.uniform(-0.02, 0.02, len(pts))
    for _ in range(n_recesses):
        cx = rng.uniform(x_lo + 0.6, x_hi - 0.6)
        cy = rng.uniform(y_top + 0.5, GROUND_Y - 0.8)
        half_w = rng.uniform(0.4, 0.9)
        half_h = rng.uniform(0.35, 0.7)
        inside = (np.abs(pts[:, 0] - cx) < half_w) & (np.abs(pts[:, 1] - cy) < half_h)
        pts[inside, 2] += rng.uniform(0.4, 0.8)
    return pts


def _pole(rng, x, z, radius, y_top, n=420):
    ang = rng.uniform(0, 2 * math.pi, n)
    y = rng.uniform(y_top, GROUND_Y, n)
    return np.column_stack([x + radius * np.cos(ang), y, z + radius * np.sin(ang)])


def _box(rng, center_x, center_z, size_x, size_y, size_z, step=0.16):
    """Axis-aligned cuboid resting on the ground (four sides + top)."""
    y_top = GROUND_Y - size_y
    faces = []
    for x in (center_x - size_x / 2, center_x + size_x / 2):
        zy = _grid_surface(rng, center_z - size_z / 2, center_z + size_z / 2, y_top, GROUND_Y, step, 0.01)
        faces.append(np.column_stack([np.full(len(zy), x), zy[:, 1], zy[:, 0]]))
    for z in (center_z - size_z / 2, center_z + size_z / 2):
        xy = _grid_surface(rng, center_x - size_x / 2, center_x + size_x / 2, y_top, GROUND_Y, step, 0.01)
        faces.append(np.column_stack([xy[:, 0], xy[:, 1], np.full(len(xy), z)]))
    xz = _grid_surface(rng, center_x - size_x / 2, center_x + size_x / 2, center_z - size_z / 2, center_z + size_z / 2, step, 0.01)
    faces.append(np.column_stack([xz[:, 0], np.full(len(xz), y_top), xz[:, 1]]))
    return np.concatenate(faces)


def synthetic_scene(seed: int = DEFAULT_SCENE_SEED, resolution: float = 0.1) -> PointCloudMap:
    """Street scene of ~50k points, voxel-downsampled at `resolution`.

    The two street sides are deliberately asymmetric (different setbacks,
    pole spacing and parked boxes) so that depth-based scoring has unambiguous
    structure to lock onto.
    """
    rng = np.random.default_rng(seed)
    parts = []

    ground = _grid_surface(rng, -12.0, 12.0, -4.0, 64.0, 0.34, 0.05)
    ripple = 0.03 * np.sin(0.35 * ground[:, 1]) * np.cos(0.5 * ground[:, 0])
    parts.append(np.column_stack([ground[:, 0], GROUND_Y + ripple, ground[:, 1]]))

    # Left side: near continuous wall with varying setbacks and a little
    # aperiodic pilaster texture.
    for x, z_lo, z_hi, y_top, pil in [
        (-7.5, -2.0, 14.0, -4.2, 3),
        (-9.0, 14.0, 27.0, -2.8, 2),
        (-6.8, 27.0, 41.0, -5.0, 3),
        (-8.2, 41.0, 58.0, -3.5, 2),
    ]:
        parts.append(_wall(rng, x, z_lo, z_hi, y_top, n_pilasters=pil))

    # Right side: facades with gaps and different setback rhythm.
    for x, z_lo, z_hi, y_top, pil in [
        (6.5, 0.0, 9.0, -3.8, 2),
        (8.8, 12.0, 22.0, -4.6, 2),
        (7.2, 30.0, 44.0, -2.5, 3),
    ]:
        parts.append(_wall(rng, x, z_lo, z_hi, y_top, n_pilasters=pil))
    parts.append(_facade(rng, 24.0, 5.0, 10.5, -3.2, n_recesses=2))
    parts.append(_facade(rng, 47.0, 6.0, 11.0, -4.0, n_recesses=2))

    # Street furniture: poles at irregular spacing, more on the left.
    pole_layout = [
        (-5.6, 3.0), (-5.9, 9.5), (-5.4, 17.0), (-6.1, 24.5), (-5.7, 33.0),
        (-6.0, 43.0), (-5.5, 52.0), (5.0, 5.5), (4.6, 15.5), (5.2, 27.5),
        (4.8, 38.0), (5.1, 50.0),
    ]
    for x, z in pole_layout:
        parts.append(_pole(rng, x, z, rng.uniform(0.06, 0.14), rng.uniform(-4.5, -2.5)))

    # Parked boxes, car-sized, mostly on the right side.
    for cx, cz, sx, sy, sz in [
        (3.6, 8.0, 1.8, 1.5, 4.2), (3.9, 19.0, 1.7, 1.3, 3.8),
        (3.4, 35.0, 1.8, 1.4, 4.5), (-4.6, 28.5, 1.9, 1.6, 4.0),
        (-4.3, 8.5, 1.7, 1.2, 3.5),
    ]:
        parts.append(_box(rng, cx, cz, sx, sy, sz))

    # Far cross-street facade closing the view.
    parts.append(_facade(rng, 62.0, -12.0, 12.0, -6.0, step=0.22, n_recesses=3))

    cloud = PointCloudMap(np.concatenate(parts))
    return voxel_downsample(cloud, resolution)


def synthetic_gt_poses(n_frames: int, spacing: float = 1.5) -> list[PoseSE3]:
    """Camera-from-map ground-truth poses walking down the street.

    The camera drifts gently in x and yaw so consecutive frames are not
    trivially identical.
    """
    poses = []
    for i in range(n_frames):
        z = spacing * i
        x = 0.8 * math.sin(0.05 * z)
        yaw = 0.04 * math.cos(0.05 * z)
        # map-from-camera: where the camera sits in the map
        world = PoseSE3(euler_zyx_to_quat(0.0, yaw, 0.0), np.array([x, 0.0, z]))
        poses.append(pose_inverse(world))
    return poses


def wall_and_fence_fixture(seed: int = 7):
    """Small occlusion fixture: a sparse fence behind a denser near wall.

    Returns (cloud, camera, pose, fence_mask_fn) where fence points sit at
    z = 16 behind a wall at z = 8 covering the central image region. Because
    the wall sampling is sparse, fence points leak through z-buffer gaps and
    only the occlusion filter removes them.
    """
    rng = np.random.default_rng(seed)
    cam = synthetic_camera(256, 128)

    wall_xy = _grid_surface(rng, -3.0, 3.0, -2.0, 1.4, 0.16, 0.01)
    wall = np.column_stack([wall_xy[:, 0], wall_xy[:, 1], np.full(len(wall_xy), 8.0)])
    fence_xy = _grid_surface(rng, -2.4, 2.4, -1.4, 1.2, 0.3, 0.01)
    fence = np.column_stack([fence_xy[:, 0], fence_xy[:, 1], np.full(len(fence_xy), 16.0)])

    cloud = PointCloudMap(np.concatenate([wall, fence]))
    pose = PoseSE3.identity()
    return cloud, cam, pose, fence
