"""Tests for the field container, summary statistics, and the seeded RNG."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gradlab.field import (
    DimensionError,
    Field,
    ParameterError,
    Rng,
    field_stats,
    new_field,
    sample_gaussian,
)


class TestField:
    def test_promotes_two_dimensional_input(self):
        """A (h, w) array becomes a (h, w, 1) field."""
        f = Field(np.zeros((4, 5)))
        assert f.shape == (4, 5, 1)
        assert f.height == 4 and f.width == 5 and f.channels == 1

    def test_rejects_wrong_rank(self):
        with pytest.raises(DimensionError):
            Field(np.zeros(7))
        with pytest.raises(DimensionError):
            Field(np.zeros((2, 2, 2, 2)))

    def test_rejects_empty_axis(self):
        with pytest.raises(DimensionError):
            Field(np.zeros((0, 4)))
        with pytest.raises(DimensionError):
            Field(np.zeros((4, 4, 0)))

    def test_rejects_non_finite_entries(self):
        bad = np.ones((3, 3))
        bad[1, 2] = np.nan
        with pytest.raises(ValueError):
            Field(bad)
        bad[1, 2] = np.inf
        with pytest.raises(ValueError):
            Field(bad)

    def test_data_is_read_only_copy(self):
        """Mutating the source array or the .data view must not alias."""
        src = np.ones((2, 2))
        f = Field(src)
        src[0, 0] = 9.0
        assert f.data[0, 0, 0] == 1.0
        with pytest.raises(ValueError):
            f.data[0, 0, 0] = 5.0

    def test_data_dtype_and_order(self):
        f = Field(np.arange(12, dtype=np.int64).reshape(3, 4))
        assert f.data.dtype == np.float64
        assert f.data.flags["C_CONTIGUOUS"]


class TestNewField:
    def test_constant_fill(self):
        f = new_field(3, 4, 2, 0.25)
        assert f.shape == (3, 4, 2)
        assert np.all(f.data == 0.25)

    def test_rejects_bad_dimensions(self):
        with pytest.raises(DimensionError):
            new_field(0, 4, 1, 0.0)
        with pytest.raises(DimensionError):
            new_field(4, -1, 1, 0.0)

    def test_rejects_non_finite_fill(self):
        with pytest.raises(ParameterError):
            new_field(2, 2, 1, float("nan"))


class TestRng:
    def test_same_seed_reproduces(self):
        a = Rng(123).normal((5, 5))
        b = Rng(123).normal((5, 5))
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        a = Rng(123).normal((5, 5))
        b = Rng(124).normal((5, 5))
        assert not np.array_equal(a, b)

    def test_child_streams_are_stateless(self):
        """child(i) depends only on the parent seed and i, not on how much
        of the parent stream was consumed."""
        fresh = Rng(7).child(2).normal((4,))
        used = Rng(7)
        used.normal((100,))
        assert np.array_equal(used.child(2).normal((4,)), fresh)

    def test_child_streams_are_distinct(self):
        root = Rng(7)
        a = root.child(0).normal((8,))
        b = root.child(1).normal((8,))
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, Rng(7).normal((8,)))

    def test_seed_range_enforced(self):
        with pytest.raises(ParameterError):
            Rng(-1)
        with pytest.raises(ParameterError):
            Rng(1 << 64)
        Rng((1 << 64) - 1)

    def test_integers_and_uniform_ranges(self):
        r = Rng(5)
        ints = r.integers(2, 9, size=1000)
        assert ints.min() >= 2 and ints.max() <= 8
        vals = r.uniform(-1.0, 3.0, size=1000)
        assert np.all(vals >= -1.0) and np.all(vals < 3.0)


class TestSampleGaussian:
    def test_sigma_scales_draws_exactly(self):
        """sigma multiplies the unit draw, so the same seed gives exactly
        proportional fields."""
        unit = sample_gaussian((6, 7, 2), 1.0, Rng(9))
        twice = sample_gaussian((6, 7, 2), 2.0, Rng(9))
        assert np.array_equal(twice.data, 2.0 * unit.data)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ParameterError):
            sample_gaussian((2, 2, 1), 0.0, Rng(0))
        with pytest.raises(ParameterError):
            sample_gaussian((2, 2, 1), -1.0, Rng(0))
        with pytest.raises(ParameterError):
            sample_gaussian((2, 2, 1), float("inf"), Rng(0))

    def test_unit_variance_large_sample(self):
        """A million unit-sigma draws land within 1% of variance 1."""
        f = sample_gaussian((1000, 1000, 1), 1.0, Rng(31))
        v = float(np.var(f.data))
        assert 0.99 <= v <= 1.01
        assert abs(float(np.mean(f.data))) < 3.0 / 1000.0

    def test_sigma_two_variance(self):
        f = sample_gaussian((1000, 1000, 1), 2.0, Rng(32))
        assert_allclose(float(np.var(f.data)), 4.0, rtol=0.02)


class TestFieldStats:
    def test_two_point_field(self):
        """Values {-1, +1} give mean 0 and unbiased variance 2."""
        st = field_stats(Field(np.array([[-1.0, 1.0]])))
        assert st.mean == 0.0
        assert st.variance == 2.0
        assert st.min == -1.0 and st.max == 1.0
        assert not st.degenerate

    def test_constant_field_is_degenerate(self):
        st = field_stats(new_field(4, 4, 1, 3.5))
        assert st.degenerate
        assert st.variance == 0.0
        assert st.excess_kurtosis == 0.0
        assert st.mean == st.min == st.max == 3.5

    def test_gaussian_kurtosis_near_zero(self):
        """Excess kurtosis of a large normal sample is close to 0."""
        f = sample_gaussian((1000, 1000, 1), 1.0, Rng(33))
        st = field_stats(f)
        assert abs(st.excess_kurtosis) < 0.05

    def test_affine_transform_of_stats(self):
        """mean maps to a*mean + b, variance to a^2 * variance, and excess
        kurtosis is invariant under x -> a x + b."""
        x = Rng(8).normal((50, 40, 3)) ** 3
        a, b = 2.5, -1.25
        base = field_stats(Field(x))
        moved = field_stats(Field(a * x + b))
        assert_allclose(moved.mean, a * base.mean + b, rtol=1e-12, atol=1e-12)
        assert_allclose(moved.variance, a * a * base.variance, rtol=1e-12)
        assert_allclose(moved.excess_kurtosis, base.excess_kurtosis, rtol=1e-9)

    def test_ordering_invariant(self):
        for seed in range(5):
            st = field_stats(sample_gaussian((16, 16, 1), 1.0, Rng(seed)))
            assert st.min <= st.mean <= st.max
            assert st.variance >= 0.0
