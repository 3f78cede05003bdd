"""Pose regression objective: smooth-L1 translation + quaternion angular loss.

All functions are pure. The angular loss is built on atan2; on unit
quaternions its argument pair never reaches the non-differentiable set
(y = 0 with x <= 0 would need a zero quaternion), so the loss stays finite
and well-behaved everywhere the regressor can produce output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .se3 import Quat, angular_distance
from .validation import check_positive, check_vector3


@dataclass(frozen=True)
class PoseTarget:
    """Regression target or prediction: translation (m) + unit rotation."""

    translation: np.ndarray
    rotation: Quat

    def __post_init__(self):
        t = check_vector3(self.translation, "translation").copy()
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", self.rotation.normalized())

    @staticmethod
    def identity() -> "PoseTarget":
        return PoseTarget(np.zeros(3), Quat.identity())


def smooth_l1(x: np.ndarray) -> np.ndarray:
    """Elementwise 0.5 x^2 for |x| < 1, |x| - 0.5 beyond."""
    ax = np.abs(x)
    return np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)


def translation_loss(t_pred, t_gt) -> float:
    """Smooth-L1 of the componentwise difference, summed over the 3 axes."""
    diff = check_vector3(t_pred, "t_pred") - check_vector3(t_gt, "t_gt")
    return float(np.sum(smooth_l1(diff)))


def rotation_loss(q_gt: Quat, q_pred_raw) -> float:
    """Angular distance between the truth and the normalized raw prediction.

    `q_pred_raw` is a 4-vector straight from a regressor head; it is
    normalized here, so only its direction matters. Range [0, pi/2].
    """
    raw = np.asarray(q_pred_raw, dtype=np.float64).reshape(4)
    if not np.all(np.isfinite(raw)):
        raise ValueError("q_pred_raw must be finite")
    norm = float(np.linalg.norm(raw))
    if norm < 1e-12:
        raise ValueError("q_pred_raw has (near-)zero norm")
    return angular_distance(q_gt, Quat.from_array(raw))


def total_loss(t_pred, t_gt, q_gt: Quat, q_pred_raw) -> float:
    """Unweighted sum of translation and rotation losses."""
    return translation_loss(t_pred, t_gt) + rotation_loss(q_gt, q_pred_raw)


def numerical_gradient(f: Callable[[np.ndarray], float], x, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient (f(x + eps e_i) - f(x - eps e_i)) / (2 eps)."""
    check_positive(eps, "eps")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = eps
        grad.flat[i] = (f(x + step) - f(x - step)) / (2.0 * eps)
    return grad
