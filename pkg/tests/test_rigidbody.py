import numpy as np
import pytest

from fidtrack.rigidbody import (
    DEFAULT_FIDUCIALS,
    OcclusionBias,
    Pose,
    SimConfig,
    orthonormalize_rotation,
    pairwise_distances,
    propagate_rotation,
    propagate_translation,
    simulate_session,
    skew,
    transform_point,
)

PAPER_DISTANCES = (481.04, 121.66, 28.28, 382.88)


class TestSkew:
    def test_unit_x(self):
        expected = np.array([[0, 0, 0], [0, 0, -1], [0, 1, 0]], dtype=float)
        assert np.array_equal(skew((1, 0, 0)), expected)

    def test_zero(self):
        assert np.array_equal(skew((0, 0, 0)), np.zeros((3, 3)))

    def test_antisymmetric_and_annihilates_own_axis(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            w = rng.uniform(-10, 10, 3)
            M = skew(w)
            assert np.array_equal(M, -M.T)
            np.testing.assert_allclose(M @ w, np.zeros(3), atol=1e-12)


class TestPropagateRotation:
    def test_zero_rate(self):
        assert np.array_equal(propagate_rotation(np.eye(3), (0, 0, 0), 0.005), np.eye(3))

    def test_single_step_about_z(self):
        R = propagate_rotation(np.eye(3), (0, 0, 1), 0.005)
        np.testing.assert_allclose(R, np.eye(3) + 0.005 * skew((0, 0, 1)), atol=1e-15)
        assert R[0, 1] == -0.005

    def test_first_order_drift_stays_small(self):
        R = np.eye(3)
        for _ in range(1000):
            R = propagate_rotation(R, (0.001, 0.001, 0.001), 0.005)
        assert np.abs(R.T @ R - np.eye(3)).max() <= 1e-4

    def test_orthonormalized_update_is_exact_rotation(self):
        R = np.eye(3)
        for _ in range(200):
            R = propagate_rotation(R, (0.2, -0.1, 0.3), 0.005, orthonormalize=True)
            assert np.abs(R.T @ R - np.eye(3)).max() <= 1e-12
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)

    def test_orthonormalize_projects_back(self):
        rng = np.random.default_rng(1)
        M = np.eye(3) + 0.01 * rng.standard_normal((3, 3))
        R = orthonormalize_rotation(M)
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)


class TestPropagateTranslation:
    def test_paper_start_of_motion(self):
        t, v, a = propagate_translation((0, 0, 0), (0, 0, 0), (0.1, 0.1, 0.1), 0.005)
        np.testing.assert_allclose(t, np.full(3, 1.25e-6))
        np.testing.assert_allclose(v, np.full(3, 5e-4))
        np.testing.assert_allclose(a, np.full(3, 0.1))

    def test_dt_zero(self):
        t, v, a = propagate_translation((1, 2, 3), (4, 5, 6), (7, 8, 9), 0.0)
        assert np.array_equal(t, [1, 2, 3])
        assert np.array_equal(v, [4, 5, 6])
        assert np.array_equal(a, [7, 8, 9])

    def test_matches_closed_form_from_rest(self):
        # The per-step update is the exact discretization: after n steps
        # from rest, t = a (n dt)^2 / 2 exactly (no accumulated error).
        dt, n = 0.005, 1000
        a0 = np.array([0.1, 0.1, 0.1])
        t = np.zeros(3)
        v = np.zeros(3)
        a = a0
        for _ in range(n):
            t, v, a = propagate_translation(t, v, a, dt)
        np.testing.assert_allclose(t, 0.5 * a0 * (n * dt) ** 2, rtol=1e-12)


class TestTransformPoint:
    def test_identity_pose(self):
        p = np.array([1.0, 2.0, 3.0])
        assert np.array_equal(transform_point(Pose.identity(), p), p)

    def test_translation_only(self):
        pose = Pose(R=np.eye(3), t=np.array([1.0, 2.0, 3.0]))
        assert np.array_equal(transform_point(pose, np.zeros(3)), [1, 2, 3])

    def test_small_rotation_about_z(self):
        pose = Pose(R=np.eye(3) + 0.005 * skew((0, 0, 1)), t=np.zeros(3))
        np.testing.assert_allclose(transform_point(pose, (1, 0, 0)), [1, 0.005, 0], atol=1e-12)


class TestPairwiseDistances:
    def test_reference_array_geometry(self):
        np.testing.assert_allclose(pairwise_distances(DEFAULT_FIDUCIALS), PAPER_DISTANCES, atol=0.01)

    def test_identical_points(self):
        assert np.array_equal(pairwise_distances([(1, 1, 1), (1, 1, 1)]), [0.0, 0.0])

    def test_unit_square(self):
        square = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)]
        np.testing.assert_allclose(pairwise_distances(square), [1, 1, 1, 1])

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            pairwise_distances([(0, 0, 0)])


class TestSimulateSession:
    def test_default_session_shape_and_noise_level(self):
        session = simulate_session(SimConfig(seed=0))
        assert session.measured.shape == (1000, 4, 3)
        resid = session.measured - session.truth
        var = resid.var(axis=(0, 1))
        expected = np.array([0.0225, 0.0225, 0.0441])
        assert np.all(np.abs(var - expected) <= 0.15 * expected)

    def test_noise_empirics(self):
        # >= 1e4 samples per axis: mean within 3 sigma/sqrt(n), variance
        # within 10% of the configured value.
        session = simulate_session(SimConfig(seed=4, duration=15.0))
        resid = (session.measured - session.truth).reshape(-1, 3)
        n = resid.shape[0]
        assert n >= 10_000
        sigma = np.array([0.15, 0.15, 0.21])
        assert np.all(np.abs(resid.mean(axis=0)) <= 3 * sigma / np.sqrt(n))
        assert np.all(np.abs(resid.var(axis=0) - sigma**2) <= 0.1 * sigma**2)

    def test_zero_noise_is_exact(self):
        session = simulate_session(SimConfig(seed=0, noise_std=(0, 0, 0)))
        assert np.array_equal(session.measured, session.truth)

    def test_same_seed_is_bit_identical(self):
        a = simulate_session(SimConfig(seed=123))
        b = simulate_session(SimConfig(seed=123))
        assert a == b
        assert np.array_equal(a.measured, b.measured)

    def test_rigid_distances_preserved(self):
        session = simulate_session(SimConfig(seed=0, noise_std=(0, 0, 0)))
        d0 = pairwise_distances(session.truth[0])
        for k in (1, 250, 500, 999):
            dk = pairwise_distances(session.truth[k])
            assert np.abs(dk - d0).max() <= 0.02

    def test_bias_segment_applied(self):
        seg = OcclusionBias(fiducial_id=1, start_k=10, end_k=20, offset=(0, 0, 1.0))
        clean = simulate_session(SimConfig(seed=7))
        biased = simulate_session(SimConfig(seed=7, bias_segments=[seg]))
        delta = biased.measured - clean.measured
        np.testing.assert_allclose(delta[11:20, 1], [[0, 0, 1.0]] * 9)
        np.testing.assert_allclose(delta[10, 1], [0.5, 0.5, 1.7])  # offset + spike
        np.testing.assert_allclose(delta[20, 1], [0.5, 0.5, 1.7])
        assert np.array_equal(delta[:10], np.zeros_like(delta[:10]))
        assert biased.occluded[10:21, 1].all()
        assert not biased.occluded[:, 0].any()

    def test_truth_is_noise_independent(self):
        a = simulate_session(SimConfig(seed=1))
        b = simulate_session(SimConfig(seed=2))
        assert np.array_equal(a.truth, b.truth)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"fps": 0.0},
            {"duration": -1.0},
            {"noise_std": (0.1, -0.1, 0.1)},
            {"fiducial_initials": ()},
            {"omega": (0.0, float("inf"), 0.0)},
        ],
    )
    def test_invalid_config_rejected(self, kwargs):
        with pytest.raises(ValueError):
            simulate_session(SimConfig(**kwargs))

    def test_bias_segment_validation(self):
        seg = OcclusionBias(fiducial_id=9, start_k=0, end_k=5)
        with pytest.raises(ValueError):
            simulate_session(SimConfig(bias_segments=[seg]))
        seg = OcclusionBias(fiducial_id=0, start_k=5, end_k=5)
        with pytest.raises(ValueError):
            simulate_session(SimConfig(bias_segments=[seg]))
