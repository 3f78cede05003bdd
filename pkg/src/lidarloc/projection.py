"""Depth-image synthesis: z-buffered point projection, padding, augmentation.

Each map point splats to exactly one pixel (nearest integer of the perspective
division) and a pixel keeps the minimum camera-frame depth of its candidates,
so the output is independent of point order and of how points are partitioned
across workers. Zero depth means no return.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .camera import CameraModel
from .pointmap import PointCloudMap
from .se3 import PoseSE3, matrix_to_quat, pose_compose, quat_from_axis_angle, quat_to_matrix
from .validation import check_non_negative

DEFAULT_Z_NEAR = 0.05

DEPTH_PNG_COUNTS_PER_METER = 256.0
DEPTH_RAW_MAGIC = b"LIDARIMG"
DEPTH_RAW_VERSION = 1


@dataclass(frozen=True)
class DepthImage:
    """Synthesized depth image: per-pixel meters, 0 = no return."""

    depth: np.ndarray
    generating_pose: PoseSE3
    camera: CameraModel

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError(f"depth must be 2-D, got shape {d.shape}")
        if not np.all(np.isfinite(d)) or d.min() < 0:
            raise ValueError("depths must be finite and non-negative")
        d.setflags(write=False)
        object.__setattr__(self, "depth", d)

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.depth))


def _rasterize(cam_pts: np.ndarray, camera: CameraModel, width: int, height: int) -> np.ndarray:
    """Min-depth buffer for camera-frame points already cut at z_near."""
    buf = np.full((height, width), np.inf)
    if cam_pts.shape[0]:
        u, v = camera.project_points(cam_pts)
        col = np.floor(u + 0.5).astype(np.int64)
        row = np.floor(v + 0.5).astype(np.int64)
        ok = (col >= 0) & (col < width) & (row >= 0) & (row < height)
        np.minimum.at(buf, (row[ok], col[ok]), cam_pts[ok, 2])
    return buf


def project(
    cloud: PointCloudMap,
    pose: PoseSE3,
    camera: CameraModel,
    z_near: float = DEFAULT_Z_NEAR,
    workers: int = 1,
) -> DepthImage:
    """Render the cloud through `camera` at the camera-from-map `pose`.

    Points at camera-frame z <= z_near are dropped before projection (a free
    z cut would let u, v blow up near the pinhole). With workers > 1 the
    points are partitioned and per-worker tiles merged by pixel minimum; the
    result is bit-identical for any worker count.
    """
    check_non_negative(z_near, "z_near")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    width, height = camera.padded_width, camera.padded_height
    r = quat_to_matrix(pose.rotation)
    cam_pts = cloud.points @ r.T + pose.translation
    cam_pts = cam_pts[cam_pts[:, 2] > z_near]

    if workers == 1 or cam_pts.shape[0] < 2 * workers:
        buf = _rasterize(cam_pts, camera, width, height)
    else:
        chunks = np.array_split(cam_pts, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tiles = list(pool.map(lambda c: _rasterize(c, camera, width, height), chunks))
        buf = np.minimum.reduce(tiles)

    depth = np.where(np.isinf(buf), 0.0, buf)
    return DepthImage(depth, pose, camera)


def pad_image(img: DepthImage) -> DepthImage:
    """Zero-pad right/bottom to the next multiples of 64.

    Padding extends the canvas only; the projection matrix (and with it the
    principal point) is untouched, which is why padding must follow
    projection rather than precede it.
    """
    cam = img.camera.padded()
    out = np.zeros((cam.padded_height, cam.padded_width))
    out[: img.height, : img.width] = img.depth
    return DepthImage(out, img.generating_pose, cam)


def transform_to_camera(cloud: PointCloudMap, pose: PoseSE3) -> np.ndarray:
    """Camera-frame coordinates of all map points (the renderer's transform)."""
    r = quat_to_matrix(pose.rotation)
    return cloud.points @ r.T + pose.translation


# --- geometric augmentation -------------------------------------------------

_MIRROR = np.diag([-1.0, 1.0, 1.0])


def mirror_pose(pose: PoseSE3) -> PoseSE3:
    """Conjugate a camera-from-map pose by the x-mirror map.

    The result is a proper rotation again. Rendering the conjugated pose
    against mirror_map_points(cloud) equals mirroring the original render
    horizontally about the camera x = 0 plane. Involutive.
    """
    r = quat_to_matrix(pose.rotation)
    return PoseSE3(matrix_to_quat(_MIRROR @ r @ _MIRROR), _MIRROR @ pose.translation)


def mirror_map_points(cloud: PointCloudMap) -> PointCloudMap:
    """Map points reflected through the map x = 0 plane (mirror_pose's partner)."""
    return PointCloudMap(cloud.points * np.array([-1.0, 1.0, 1.0]), cloud.intensity, cloud.voxel_resolution)


def rotate_pose_about_optical_axis(pose: PoseSE3, angle: float) -> PoseSE3:
    """Compose a camera-frame rotation about the optical axis onto the pose.

    A positive angle moves rendered pixels by the rotation [[c,-s],[s,c]]
    about the principal point in (u, v) coordinates; with image y pointing
    down that reads as a clockwise turn of the image content.
    """
    return pose_compose(PoseSE3(quat_from_axis_angle((0.0, 0.0, 1.0), angle), np.zeros(3)), pose)


@dataclass(frozen=True)
class AugmentParams:
    """Sampling ranges for the run-time augmentation scheme."""

    brightness: tuple[float, float] = (0.9, 1.1)
    contrast: tuple[float, float] = (0.9, 1.1)
    saturation: tuple[float, float] = (0.9, 1.1)
    mirror_prob: float = 0.5
    max_roll: float = math.radians(5.0)

    @staticmethod
    def identity() -> "AugmentParams":
        return AugmentParams((1.0, 1.0), (1.0, 1.0), (1.0, 1.0), 0.0, 0.0)


@dataclass(frozen=True)
class AugmentResult:
    """Augmented RGB frame plus the pose that keeps the render aligned.

    When `mirrored` is set the consumer must render against
    mirror_map_points(cloud); an image flip is orientation-reversing, so no
    pose alone can reproduce it against the unmirrored cloud.
    """

    rgb: object  # PIL.Image.Image; PIL is imported lazily
    pose: PoseSE3
    mirrored: bool
    brightness: float
    contrast: float
    saturation: float
    roll: float


def augment(
    rgb_image,
    cloud: PointCloudMap,
    h_gt: PoseSE3,
    params: AugmentParams,
    seed: int,
    camera: CameraModel | None = None,
) -> AugmentResult:
    """Color-jitter, mirror and roll an (RGB, pose) training pair.

    Draw order per seed: brightness, contrast, saturation factors, mirror
    coin, roll angle. Color jitter touches only the RGB image. Mirroring
    flips the RGB horizontally and conjugates the pose (see mirror_pose);
    the roll rotates the RGB about the principal point and composes the same
    camera-frame rotation onto the pose. Pass `camera` so the RGB flip/turn
    use the true principal point; without it they fall back to the image
    center, which is exact only for centered principal points.
    """
    from PIL import Image, ImageEnhance, ImageOps

    rng = np.random.default_rng(seed)
    b = float(rng.uniform(*params.brightness))
    c = float(rng.uniform(*params.contrast))
    s = float(rng.uniform(*params.saturation))
    mirrored = bool(rng.random() < params.mirror_prob)
    roll = float(rng.uniform(-params.max_roll, params.max_roll)) if params.max_roll > 0 else 0.0

    img = rgb_image if isinstance(rgb_image, Image.Image) else Image.fromarray(np.asarray(rgb_image))
    if b != 1.0:
        img = ImageEnhance.Brightness(img).enhance(b)
    if c != 1.0:
        img = ImageEnhance.Contrast(img).enhance(c)
    if s != 1.0:
        img = ImageEnhance.Color(img).enhance(s)

    pose = h_gt
    if mirrored:
        img = ImageOps.mirror(img)
        pose = mirror_pose(pose)
    if roll != 0.0:
        pose = rotate_pose_about_optical_axis(pose, roll)
        pp = (camera.cx, camera.cy) if camera is not None else None
        # PIL rotates counter-clockwise on screen; a positive roll turns the
        # rendered content clockwise, hence the sign flip.
        img = img.rotate(-math.degrees(roll), resample=Image.BILINEAR, center=pp)

    return AugmentResult(img, pose, mirrored, b, c, s, roll)


# --- export -----------------------------------------------------------------


def depth_to_png_bytes(img: DepthImage) -> bytes:
    """Encode as 16-bit grayscale PNG at a fixed 256 counts/m scale (0-256 m).

    The scale is recorded in a tEXt chunk so files are self-describing.
    """
    import io

    from PIL import Image
    from PIL.PngImagePlugin import PngInfo

    counts = np.clip(np.round(img.depth * DEPTH_PNG_COUNTS_PER_METER), 0, 65535).astype(np.uint16)
    pil = Image.fromarray(counts)
    info = PngInfo()
    info.add_text("depth_scale", f"{DEPTH_PNG_COUNTS_PER_METER:g} counts per meter")
    out = io.BytesIO()
    pil.save(out, format="PNG", pnginfo=info)
    return out.getvalue()


def save_depth_png(img: DepthImage, path) -> None:
    with open(path, "wb") as fh:
        fh.write(depth_to_png_bytes(img))


def save_depth_raw(img: DepthImage, path) -> None:
    """Raw dump: 8-byte magic, u32 version/width/height LE, f32 LE row-major."""
    header = DEPTH_RAW_MAGIC + struct.pack("<III", DEPTH_RAW_VERSION, img.width, img.height)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.depth.astype("<f4").tobytes())


def load_depth_raw(path) -> np.ndarray:
    """Depth array from a raw dump (float32 precision)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 20 or data[:8] != DEPTH_RAW_MAGIC:
        raise ValueError("not a depth raw dump")
    version, width, height = struct.unpack("<III", data[8:20])
    if version != DEPTH_RAW_VERSION:
        raise ValueError(f"unsupported raw dump version {version}")
    expected = 20 + width * height * 4
    if len(data) != expected:
        raise ValueError(f"expected {expected} bytes, got {len(data)}")
    return np.frombuffer(data, dtype="<f4", offset=20).reshape(height, width).astype(np.float64)


def depth_overlay_rgb(img: DepthImage, rgb_image=None, max_depth: float | None = None) -> np.ndarray:
    """RGB visualization: depth pixels colored blue (near) to red (far).

    When an RGB frame is given the colored returns are splatted on top of it,
    for eyeballing alignment between a frame and a render.
    """
    h, w = img.depth.shape
    if rgb_image is not None:
        base = np.asarray(rgb_image).astype(np.uint8)
        if base.shape[:2] != (h, w):
            raise ValueError(f"RGB shape {base.shape[:2]} does not match depth {(h, w)}")
        out = base.copy()
    else:
        out = np.zeros((h, w, 3), dtype=np.uint8)
    mask = img.depth > 0
    if not mask.any():
        return out
    d = img.depth[mask]
    top = max_depth if max_depth is not None else float(d.max())
    frac = np.clip(d / max(top, 1e-9), 0.0, 1.0)
    out[mask, 0] = (255 * frac).astype(np.uint8)
    out[mask, 1] = (255 * (1.0 - np.abs(2.0 * frac - 1.0))).astype(np.uint8)
    out[mask, 2] = (255 * (1.0 - frac)).astype(np.uint8)
    return out
