import numpy as np
import pytest

from fidtrack.bank import filter_session
from fidtrack.errors import NoGroundTruthError, SchemaError
from fidtrack.kalman import FilterConfig
from fidtrack.metrics import build_report, error_variance, format_table, mse, report_to_csv
from fidtrack.rigidbody import SimConfig, simulate_session


class TestMse:
    def test_identical_series(self):
        x = np.arange(10.0)
        assert mse(x, x) == 0.0

    def test_constant_error(self):
        truth = np.zeros(50)
        assert mse(truth + 0.1, truth) == pytest.approx(0.01)

    def test_burnout_drops_leading_samples(self):
        truth = np.zeros(10)
        measured = truth.copy()
        measured[:5] = 100.0
        assert mse(measured, truth, burnout=5) == 0.0

    def test_simulated_raw_x_axis_level(self):
        session = simulate_session(SimConfig(seed=0))
        value = mse(session.measured[:, 0, 0], session.truth[:, 0, 0], burnout=100)
        assert value == pytest.approx(2.1e-2, rel=0.2)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mse(np.zeros(5), np.zeros(6))

    def test_burnout_exhausts_series(self):
        with pytest.raises(ValueError):
            mse(np.zeros(5), np.zeros(5), burnout=5)


class TestErrorVariance:
    def test_constant_error_has_zero_variance(self):
        truth = np.zeros(50)
        assert error_variance(truth + 0.3, truth) == pytest.approx(0.0, abs=1e-30)

    def test_zero_mean_error_matches_mse(self):
        rng = np.random.default_rng(0)
        truth = np.zeros(10_000)
        measured = rng.standard_normal(10_000) * 0.15
        v = error_variance(measured, truth)
        m = mse(measured, truth)
        assert v == pytest.approx(m, rel=0.01)

    def test_koenig_huygens_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            truth = rng.standard_normal(500)
            measured = truth + rng.standard_normal(500) * 0.2 + rng.uniform(-1, 1)
            err = measured - truth
            lhs = mse(measured, truth)
            rhs = error_variance(measured, truth) + float(np.mean(err)) ** 2
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


@pytest.fixture(scope="module")
def run():
    session = simulate_session(SimConfig(seed=0))
    filtered = filter_session(session, FilterConfig.default())
    return session, filtered


class TestBuildReport:
    def test_filtered_mse_improves_on_raw(self, run):
        session, filtered = run
        report = build_report(session, filtered)
        assert report.mse_raw.shape == (4, 3)
        assert np.all(report.mse_filtered <= 1e-2)
        assert np.all(report.mse_filtered < report.mse_raw)
        assert report.n_used == 900

    def test_zero_noise_zero_motion_is_exact(self):
        config = SimConfig(seed=0, noise_std=(0, 0, 0), v0=(0, 0, 0),
                           a0=(0, 0, 0), omega=(0, 0, 0))
        session = simulate_session(config)
        filtered = filter_session(session, FilterConfig.default())
        report = build_report(session, filtered)
        assert report.mse_raw.max() <= 1e-12
        assert report.mse_filtered.max() <= 1e-12

    def test_requires_ground_truth(self, run):
        session, filtered = run
        session_no_truth = simulate_session(SimConfig(seed=0))
        session_no_truth.truth = None
        with pytest.raises(NoGroundTruthError):
            build_report(session_no_truth, filtered)

    def test_requires_aligned_shapes(self, run):
        session, _ = run
        short = simulate_session(SimConfig(seed=0, duration=1.0))
        filtered_short = filter_session(short, FilterConfig.default())
        with pytest.raises(SchemaError):
            build_report(session, filtered_short)

    def test_burnout_bounds(self, run):
        session, filtered = run
        with pytest.raises(ValueError):
            build_report(session, filtered, burnout=1000)

    def test_permutation_stability(self, run):
        session, filtered = run
        report = build_report(session, filtered)
        perm = [3, 1, 0, 2]
        p_session = simulate_session(SimConfig(seed=0))
        p_session.measured = session.measured[:, perm, :].copy()
        p_session.truth = session.truth[:, perm, :].copy()
        p_filtered = filter_session(p_session, FilterConfig.default())
        p_report = build_report(p_session, p_filtered)
        np.testing.assert_allclose(p_report.mse_raw, report.mse_raw[perm])
        np.testing.assert_allclose(p_report.mse_filtered, report.mse_filtered[perm])

    def test_renderings(self, run):
        session, filtered = run
        report = build_report(session, filtered)
        table = format_table(report)
        assert "Fiducial 1, X" in table
        assert "Fiducial 4, Z" in table
        csv = report_to_csv(report)
        lines = csv.strip().split("\n")
        assert lines[0] == "fiducial,axis,mse_raw,mse_filtered,var_raw,var_filtered"
        assert len(lines) == 13
