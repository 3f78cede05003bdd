import math

import numpy as np
import pytest

from lidarloc.losses import (
    PoseTarget,
    numerical_gradient,
    rotation_loss,
    smooth_l1,
    total_loss,
    translation_loss,
)
from lidarloc.se3 import Quat, quat_mul
from tests.test_se3 import Q90Z, random_quat, trace_angle
from lidarloc.se3 import quat_to_matrix


class TestTranslationLoss:
    def test_zero_for_exact(self):
        t = np.array([1.0, -2.0, 3.0])
        assert translation_loss(t, t) == 0.0

    def test_quadratic_region(self):
        # 0.5 * 0.5^2 = 0.125
        assert translation_loss([0.5, 0, 0], [0, 0, 0]) == pytest.approx(0.125, abs=1e-12)

    def test_linear_region(self):
        # 2 - 0.5 = 1.5
        assert translation_loss([2.0, 0, 0], [0, 0, 0]) == pytest.approx(1.5, abs=1e-12)

    def test_componentwise_sum(self):
        loss = translation_loss([0.5, 2.0, -0.5], [0, 0, 0])
        assert loss == pytest.approx(0.125 + 1.5 + 0.125, abs=1e-12)

    def test_transition_point(self):
        # both branches give 0.5 at |x| = 1
        assert smooth_l1(np.array([1.0]))[0] == pytest.approx(0.5, abs=1e-15)

    def test_convexity_by_midpoint_inequality(self):
        rng = np.random.default_rng(70)
        gt = np.zeros(3)
        for _ in range(10_000):
            a = rng.uniform(-4, 4, 3)
            b = rng.uniform(-4, 4, 3)
            mid = translation_loss((a + b) / 2, gt)
            assert mid <= 0.5 * (translation_loss(a, gt) + translation_loss(b, gt)) + 1e-12


class TestRotationLoss:
    def test_scaled_prediction_is_zero(self):
        q = random_quat()
        assert rotation_loss(q, 2.0 * q.as_array()) == pytest.approx(0.0, abs=1e-12)

    def test_negated_prediction_is_zero(self):
        q = random_quat()
        assert rotation_loss(q, -q.as_array()) == pytest.approx(0.0, abs=1e-12)

    def test_quarter_turn(self):
        # oracle: half the trace-formula angle of the relative rotation
        expected = 0.5 * trace_angle(np.eye(3), quat_to_matrix(Q90Z))
        assert rotation_loss(Quat.identity(), Q90Z.as_array()) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(math.pi / 4, abs=1e-12)

    def test_symmetric_for_unit_predictions(self):
        rng = np.random.default_rng(71)
        for _ in range(100):
            q1, q2 = random_quat(rng), random_quat(rng)
            assert rotation_loss(q1, q2.as_array()) == pytest.approx(
                rotation_loss(q2, q1.as_array()), abs=1e-9
            )

    def test_left_invariance(self):
        rng = np.random.default_rng(72)
        for _ in range(100):
            q1, q2, g = random_quat(rng), random_quat(rng), random_quat(rng)
            a = rotation_loss(q1, q2.as_array())
            b = rotation_loss(quat_mul(g, q1), quat_mul(g, q2).as_array())
            assert a == pytest.approx(b, abs=1e-9)

    def test_rejects_zero_norm(self):
        with pytest.raises(ValueError):
            rotation_loss(Quat.identity(), [0.0, 0.0, 0.0, 0.0])


class TestTotalLoss:
    def test_perfect_prediction(self):
        q = random_quat()
        t = np.array([0.5, -1.0, 2.0])
        assert total_loss(t, t, q, q.as_array()) == pytest.approx(0.0, abs=1e-12)

    def test_translation_only_error(self):
        q = random_quat()
        assert total_loss([2.0, 0, 0], [0, 0, 0], q, q.as_array()) == pytest.approx(1.5, abs=1e-12)

    def test_is_sum_of_components(self):
        rng = np.random.default_rng(73)
        for _ in range(50):
            q_gt, q_pred = random_quat(rng), random_quat(rng)
            t_pred, t_gt = rng.uniform(-3, 3, 3), rng.uniform(-3, 3, 3)
            total = total_loss(t_pred, t_gt, q_gt, q_pred.as_array())
            parts = translation_loss(t_pred, t_gt) + rotation_loss(q_gt, q_pred.as_array())
            assert total == pytest.approx(parts, abs=1e-12)

    def test_nonnegative_zero_iff_exact(self):
        rng = np.random.default_rng(74)
        for _ in range(200):
            q_gt, q_pred = random_quat(rng), random_quat(rng)
            t_pred, t_gt = rng.uniform(-3, 3, 3), rng.uniform(-3, 3, 3)
            value = total_loss(t_pred, t_gt, q_gt, q_pred.as_array())
            assert value >= 0.0
        q = random_quat(rng)
        t = rng.uniform(-3, 3, 3)
        assert total_loss(t, t, q, -q.as_array()) == pytest.approx(0.0, abs=1e-12)


class TestNumericalGradient:
    def test_quadratic(self):
        grad = numerical_gradient(lambda x: float(np.sum(x * x)), np.array([1.0, 2.0]), eps=1e-5)
        assert np.allclose(grad, [2.0, 4.0], atol=1e-6)

    def test_rotation_loss_gradient_finite_and_consistent(self):
        # consistency oracle: central differences at two step sizes agree
        rng = np.random.default_rng(75)
        checked = 0
        while checked < 500:
            q_gt = random_quat(rng)
            raw = rng.normal(size=4)
            loss = rotation_loss(q_gt, raw)
            if not 0.1 < loss < 1.4:  # keep away from the kink at 0 and the pi/2 cap
                continue
            f = lambda x: rotation_loss(q_gt, x)
            g1 = numerical_gradient(f, raw, eps=1e-5)
            g2 = numerical_gradient(f, raw, eps=2e-5)
            assert np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))
            denom = max(float(np.linalg.norm(g1)), 1e-12)
            assert np.linalg.norm(g1 - g2) / denom < 1e-4
            checked += 1

    def test_gradient_near_max_distance_stays_finite(self):
        # sweep toward the a = 0 face of the relative quaternion (loss -> pi/2)
        rng = np.random.default_rng(76)
        worst = 0.0
        for scale in (1e-1, 1e-2, 1e-3, 1e-4, 1e-6):
            for _ in range(20):
                vec = rng.normal(size=3)
                vec /= np.linalg.norm(vec)
                m = np.concatenate([[scale], vec * math.sqrt(1 - scale**2)])
                q_gt = random_quat(rng)
                # prediction whose relative quaternion has scalar part = scale
                raw = quat_mul(Quat.from_array(m), q_gt).as_array()
                g = numerical_gradient(lambda x: rotation_loss(q_gt, x), raw, eps=1e-7)
                assert np.all(np.isfinite(g))
                worst = max(worst, float(np.linalg.norm(g)))
        # frozen sweep bound: the gradient stays O(1) near the cap
        assert worst < 10.0


class TestPoseTarget:
    def test_normalizes_rotation(self):
        target = PoseTarget(np.zeros(3), Quat(2.0, 0.0, 0.0, 0.0))
        assert target.rotation == Quat(1.0, 0.0, 0.0, 0.0)

    def test_identity(self):
        t = PoseTarget.identity()
        assert np.array_equal(t.translation, np.zeros(3))
