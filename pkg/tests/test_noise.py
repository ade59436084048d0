import math

import numpy as np
import pytest

from fidtrack.noise import normal_stream, splitmix64, uniform_stream
from oracle import splitmix64_reference


class TestSplitmix64:
    @pytest.mark.parametrize("seed", [0, 1, 42, 2**63, 2**64 - 1])
    def test_matches_integer_reference(self, seed):
        got = splitmix64(seed, 64)
        for i in range(64):
            assert int(got[i]) == splitmix64_reference(seed, i + 1)

    def test_count_zero(self):
        assert splitmix64(0, 0).size == 0

    def test_negative_count(self):
        with pytest.raises(ValueError):
            splitmix64(0, -1)

    def test_streams_differ_across_seeds(self):
        assert not np.array_equal(splitmix64(1, 100), splitmix64(2, 100))

    def test_prefix_stability(self):
        # Draw i is a pure function of (seed, i): extending the stream
        # never changes earlier values.
        assert np.array_equal(splitmix64(9, 10), splitmix64(9, 1000)[:10])


class TestUniformStream:
    def test_open_unit_interval(self):
        u = uniform_stream(3, 100_000)
        assert u.min() > 0.0
        assert u.max() < 1.0

    def test_mean_and_variance(self):
        u = uniform_stream(5, 200_000)
        assert abs(u.mean() - 0.5) < 0.005
        assert abs(u.var() - 1.0 / 12.0) < 0.001

    def test_mapping_from_bits(self):
        bits = splitmix64(7, 8)
        expected = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        assert np.array_equal(uniform_stream(7, 8), expected)


class TestNormalStream:
    def test_draw_pairing(self):
        # Normal i consumes uniforms (2i, 2i+1) via the Box-Muller cosine
        # branch; recompute by hand.
        u = uniform_stream(11, 20)
        expected = np.sqrt(-2.0 * np.log(u[0::2])) * np.cos(2.0 * math.pi * u[1::2])
        assert np.array_equal(normal_stream(11, 10), expected)

    def test_moments(self):
        x = normal_stream(13, 200_000)
        assert abs(x.mean()) < 0.01
        assert abs(x.var() - 1.0) < 0.01
        # Kurtosis separates a normal from a plain uniform stretch.
        assert abs(np.mean(x**4) - 3.0) < 0.1

    def test_deterministic(self):
        assert np.array_equal(normal_stream(17, 1000), normal_stream(17, 1000))
