"""Quaternion and SE(3) primitives: composition, sampling, error decomposition.

Quaternions are scalar-first Hamilton quaternions (a + b*i + c*j + d*k).
Throughout the localization pipeline a pose maps map-frame coordinates into
the camera frame (p_cam = R @ p_map + t); the same type also carries generic
rigid transforms such as scan poses. All values are immutable and every
function is pure, so concurrent use needs no locking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .validation import check_non_negative, check_vector3

UNIT_TOL = 1e-6


@dataclass(frozen=True)
class Quat:
    """Rotation quaternion, scalar-first. a = cos(theta/2) for angle theta."""

    a: float
    b: float
    c: float
    d: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d], dtype=np.float64)

    @staticmethod
    def from_array(q) -> "Quat":
        arr = np.asarray(q, dtype=np.float64).reshape(4)
        return Quat(float(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]))

    @staticmethod
    def identity() -> "Quat":
        return Quat(1.0, 0.0, 0.0, 0.0)

    def norm(self) -> float:
        return math.sqrt(self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d)

    def normalized(self) -> "Quat":
        n = self.norm()
        if n < 1e-12:
            raise ValueError("cannot normalize a near-zero quaternion")
        return Quat(self.a / n, self.b / n, self.c / n, self.d / n)


def _check_unit(q: Quat, name: str = "quaternion") -> None:
    if abs(q.norm() - 1.0) > UNIT_TOL:
        raise ValueError(f"{name} must be unit-norm within {UNIT_TOL}, got norm {q.norm()}")


def quat_mul(q1: Quat, q2: Quat) -> Quat:
    """Hamilton product q1 * q2. Inputs need not be normalized."""
    a1, b1, c1, d1 = q1.a, q1.b, q1.c, q1.d
    a2, b2, c2, d2 = q2.a, q2.b, q2.c, q2.d
    return Quat(
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    )


def quat_inv(q: Quat) -> Quat:
    """Inverse of a unit quaternion (its conjugate). Rejects non-unit input."""
    _check_unit(q)
    return Quat(q.a, -q.b, -q.c, -q.d)


def angular_distance(q: Quat, q_tilde: Quat) -> float:
    """Angular distance atan2(sqrt(b^2+c^2+d^2), |a|) of the relative quaternion.

    `q` must be unit-norm; `q_tilde` is normalized internally. The result lies
    in [0, pi/2] and equals half the geodesic angle between the two rotations.
    Sign flips of either argument do not change the value.
    """
    _check_unit(q)
    m = quat_mul(q, quat_inv(q_tilde.normalized()))
    vec = math.sqrt(m.b * m.b + m.c * m.c + m.d * m.d)
    return math.atan2(vec, abs(m.a))


def quat_to_matrix(q: Quat) -> np.ndarray:
    """3x3 rotation matrix of a unit quaternion."""
    _check_unit(q)
    a, b, c, d = q.a, q.b, q.c, q.d
    return np.array(
        [
            [1 - 2 * (c * c + d * d), 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), 1 - 2 * (b * b + d * d), 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), 1 - 2 * (b * b + c * c)],
        ],
        dtype=np.float64,
    )


def check_rotation_matrix(matrix, tol: float = UNIT_TOL) -> np.ndarray:
    """Validate orthonormality and det = +1; returns the matrix as float64."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"rotation matrix must be 3x3, got {m.shape}")
    err = np.max(np.abs(m.T @ m - np.eye(3)))
    det = np.linalg.det(m)
    if err > tol or abs(det - 1.0) > tol:
        raise ValueError(
            f"matrix is not a rotation (orthonormality error {err:.2e}, det {det:.6f})"
        )
    return m


def matrix_to_quat(matrix) -> Quat:
    """Unit quaternion of a rotation matrix (sign chosen with a >= 0)."""
    m = check_rotation_matrix(matrix)
    # Shepperd's method: branch on the largest diagonal combination.
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = (0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s)
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = ((m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s)
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = ((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s)
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = ((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s)
    quat = Quat(*q).normalized()
    if quat.a < 0:
        quat = Quat(-quat.a, -quat.b, -quat.c, -quat.d)
    return quat


def quat_from_axis_angle(axis, angle: float) -> Quat:
    """Unit quaternion rotating by `angle` radians about `axis`."""
    ax = check_vector3(axis, "axis")
    n = float(np.linalg.norm(ax))
    if n < 1e-12:
        raise ValueError("axis must be nonzero")
    ax = ax / n
    half = 0.5 * angle
    s = math.sin(half)
    return Quat(math.cos(half), ax[0] * s, ax[1] * s, ax[2] * s)


def euler_zyx_to_quat(angle_z: float, angle_y: float, angle_x: float) -> Quat:
    """Quaternion of the intrinsic Z-Y-X rotation Rz(az) @ Ry(ay) @ Rx(ax)."""
    qz = quat_from_axis_angle((0.0, 0.0, 1.0), angle_z)
    qy = quat_from_axis_angle((0.0, 1.0, 0.0), angle_y)
    qx = quat_from_axis_angle((1.0, 0.0, 0.0), angle_x)
    return quat_mul(quat_mul(qz, qy), qx)


def quat_to_euler_zyx(q: Quat) -> tuple[float, float, float]:
    """Intrinsic Z-Y-X Euler angles (az, ay, ax) of a unit quaternion.

    Inverse of euler_zyx_to_quat away from the ay = +-pi/2 gimbal lock, where
    the az/ax split is not unique and az is set to 0.
    """
    m = quat_to_matrix(q)
    sy = -m[2, 0]
    sy = min(1.0, max(-1.0, sy))
    ay = math.asin(sy)
    if abs(sy) < 1.0 - 1e-12:
        az = math.atan2(m[1, 0], m[0, 0])
        ax = math.atan2(m[2, 1], m[2, 2])
    else:
        az = 0.0
        ax = math.atan2(m[1, 2], m[1, 1]) if sy > 0 else math.atan2(-m[1, 2], m[1, 1])
    return az, ay, ax


@dataclass(frozen=True, eq=False)
class PoseSE3:
    """Rigid transform: p_out = R(rotation) @ p_in + translation."""

    rotation: Quat
    translation: np.ndarray

    def __post_init__(self):
        _check_unit(self.rotation, "pose rotation")
        t = check_vector3(self.translation, "translation").copy()
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PoseSE3)
            and self.rotation == other.rotation
            and np.array_equal(self.translation, other.translation)
        )

    __hash__ = None

    @staticmethod
    def identity() -> "PoseSE3":
        return PoseSE3(Quat.identity(), np.zeros(3))


def pose_to_matrix(h: PoseSE3) -> np.ndarray:
    """4x4 homogeneous matrix of a pose."""
    m = np.eye(4)
    m[:3, :3] = quat_to_matrix(h.rotation)
    m[:3, 3] = h.translation
    return m


def pose_from_matrix(matrix) -> PoseSE3:
    """Pose from a 4x4 homogeneous matrix; rejects non-rigid input."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.shape != (4, 4):
        raise ValueError(f"homogeneous matrix must be 4x4, got {m.shape}")
    if np.max(np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0]))) > 1e-9:
        raise ValueError("last row of a homogeneous matrix must be [0, 0, 0, 1]")
    return PoseSE3(matrix_to_quat(m[:3, :3]), m[:3, 3])


def pose_compose(h1: PoseSE3, h2: PoseSE3) -> PoseSE3:
    """Composition h1 then applied after h2; matches the 4x4 product H1 @ H2."""
    r1 = quat_to_matrix(h1.rotation)
    return PoseSE3(quat_mul(h1.rotation, h2.rotation), r1 @ h2.translation + h1.translation)


def pose_inverse(h: PoseSE3) -> PoseSE3:
    r = quat_to_matrix(h.rotation)
    return PoseSE3(quat_inv(h.rotation), -(r.T @ h.translation))


def pose_apply(h: PoseSE3, points) -> np.ndarray:
    """Apply the transform to one (3,) point or an (N, 3) batch."""
    r = quat_to_matrix(h.rotation)
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape == (3,):
        return r @ pts + h.translation
    return pts @ r.T + h.translation


def camera_center(h: PoseSE3) -> np.ndarray:
    """Map-frame position of the camera pinhole for a camera-from-map pose."""
    r = quat_to_matrix(h.rotation)
    return -(r.T @ h.translation)


def optical_axis(h: PoseSE3) -> np.ndarray:
    """Map-frame direction of the camera z axis for a camera-from-map pose."""
    return quat_to_matrix(h.rotation).T @ np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class NoiseSpec:
    """Uniform perturbation bounds: meters per axis, radians per Euler axis."""

    max_translation: float
    max_rotation: float

    def __post_init__(self):
        check_non_negative(self.max_translation, "max_translation")
        check_non_negative(self.max_rotation, "max_rotation")


def sample_init_pose(h_gt: PoseSE3, spec: NoiseSpec, seed: int) -> PoseSE3:
    """Perturb a pose by uniform noise expressed in the camera's local frame.

    Translation offsets are drawn per axis from U[-max_translation, +max_translation]
    and Euler angles (intrinsic Z-Y-X, drawn in z, y, x order) per axis from
    U[-max_rotation, +max_rotation]. The perturbation D acts on camera-frame
    coordinates, i.e. the result is compose(D, h_gt); recover it with
    compose(h_init, inverse(h_gt)). Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    t = rng.uniform(-spec.max_translation, spec.max_translation, size=3)
    az, ay, ax = rng.uniform(-spec.max_rotation, spec.max_rotation, size=3)
    delta = PoseSE3(euler_zyx_to_quat(az, ay, ax), t)
    return pose_compose(delta, h_gt)


def pose_error(h_gt: PoseSE3, h_est: PoseSE3) -> np.ndarray:
    """Six-component error (longitudinal, lateral, vertical, roll, pitch, yaw).

    Both poses are camera-from-map. Translation error is the estimated camera
    center expressed in the ground-truth camera frame, reported as
    (z longitudinal/optical, x lateral, y vertical). Rotation error comes from
    the intrinsic Z-Y-X decomposition of the camera-side relative rotation
    q_est * inv(q_gt): roll about z, pitch about x, yaw about y. Meters and
    radians.
    """
    e_cam = pose_apply(h_gt, camera_center(h_est))
    q_rel = quat_mul(h_est.rotation, quat_inv(h_gt.rotation))
    az, ay, ax = quat_to_euler_zyx(q_rel.normalized())
    return np.array([e_cam[2], e_cam[0], e_cam[1], az, ax, ay])


def geodesic_angle(h_gt: PoseSE3, h_est: PoseSE3) -> float:
    """Total rotation angle between two poses, 2 * angular_distance, in [0, pi]."""
    return 2.0 * angular_distance(h_gt.rotation, h_est.rotation)


def pose_to_kitti_line(h: PoseSE3) -> str:
    """Serialize as 12 whitespace-separated decimals, row-major 3x4 [R|T]."""
    m = pose_to_matrix(h)[:3, :]
    return " ".join(repr(float(v)) for v in m.reshape(-1))


def pose_from_kitti_line(line: str) -> PoseSE3:
    """Parse a 12-decimal row-major [R|T] line; see kitti.read_poses for files."""
    tokens = line.split()
    if len(tokens) != 12:
        raise ValueError(f"pose line must have 12 values, got {len(tokens)}")
    vals = np.array([float(t) for t in tokens]).reshape(3, 4)
    return PoseSE3(matrix_to_quat(vals[:, :3]), vals[:, 3])
