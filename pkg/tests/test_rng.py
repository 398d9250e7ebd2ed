import numpy as np

from chiralcal import rng


class TestStreams:
    def test_pure_function_of_key(self):
        idx = np.arange(1000)
        u = rng.stream_uniform(7, "source", idx)
        assert np.array_equal(u, rng.stream_uniform(7, "source", idx))
        assert np.array_equal(u[::-1], rng.stream_uniform(7, "source", idx[::-1]))
        assert np.array_equal(u[500:], rng.stream_uniform(7, "source", idx[500:]))

    def test_streams_are_distinct(self):
        idx = np.arange(100)
        a = rng.stream_uniform(7, "axis:alice", idx)
        assert not np.array_equal(a, rng.stream_uniform(7, "axis:bob", idx))
        assert not np.array_equal(a, rng.stream_uniform(8, "axis:alice", idx))

    def test_uniform_range_and_moments(self):
        u = rng.stream_uniform(0, "source", np.arange(200_000))
        assert u.min() >= 0 and u.max() < 1
        assert abs(u.mean() - 0.5) < 0.005
        assert abs(u.var() - 1 / 12) < 0.002

    def test_negative_and_large_seeds(self):
        assert rng.to_u64(-1) == 2**64 - 1
        assert rng.derived_seed(-1, "x") == rng.derived_seed(2**64 - 1, "x")

    def test_generator_is_seeded(self):
        assert rng.generator(3, "bootstrap").integers(1 << 30) == rng.generator(3, "bootstrap").integers(1 << 30)
