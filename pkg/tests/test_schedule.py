"""Tests for noise schedules and the cumulative signal fraction gamma."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gradlab.field import ParameterError
from gradlab.schedule import Schedule, default_schedule, gamma_at, make_schedule


class TestMakeSchedule:
    def test_linear_hits_both_endpoints(self):
        """The linear ramp includes beta_start at t=1 and beta_end at t=T."""
        s = make_schedule("linear", 1000, 1e-4, 0.02)
        assert s.beta_at(1) == 1e-4
        assert s.beta_at(1000) == 0.02
        assert s.T == 1000

    def test_alpha_complements_beta(self):
        s = make_schedule("linear", 50, 1e-3, 0.05)
        for t in (1, 7, 50):
            assert s.alpha_at(t) == 1.0 - s.beta_at(t)

    def test_constant_schedule_powers(self):
        """beta = 1/2 gives exact powers of two for gamma."""
        s = make_schedule("constant", 3, 0.5, 0.5)
        assert np.array_equal(s.gamma, np.array([0.5, 0.25, 0.125]))

    def test_single_step_gamma(self):
        s = make_schedule("constant", 1, 0.3, 0.3)
        assert gamma_at(s, 1) == 1.0 - 0.3

    def test_rejects_bad_parameters(self):
        with pytest.raises(ParameterError):
            make_schedule("linear", 0, 1e-4, 0.02)
        with pytest.raises(ParameterError):
            make_schedule("linear", 10, 0.0, 0.02)
        with pytest.raises(ParameterError):
            make_schedule("linear", 10, 1e-4, 1.0)
        with pytest.raises(ParameterError):
            make_schedule("linear", 10, 0.02, 1e-4)
        with pytest.raises(ParameterError):
            make_schedule("cosine", 10, 1e-4, 0.02)

    def test_default_schedule_parameters(self):
        s = default_schedule()
        assert s.T == 1000
        assert s.beta_at(1) == 1e-4
        assert s.beta_at(1000) == 0.02


class TestGamma:
    def test_gamma_zero_is_one(self):
        """t = 0 carries the clean signal untouched."""
        assert gamma_at(default_schedule(), 0) == 1.0

    def test_gamma_recurrence_is_bitwise(self):
        """gamma_t = gamma_{t-1} * alpha_t holds with no accumulated
        reassociation, for every t."""
        s = default_schedule()
        assert np.array_equal(s.gamma[1:], s.gamma[:-1] * s.alpha[1:])

    def test_gamma_strictly_decreasing(self):
        s = default_schedule()
        assert np.all(np.diff(s.gamma) < 0)
        assert 0.0 < s.gamma[-1] < 1.0

    def test_terminal_gamma_against_log_space_product(self):
        """The cumulative product agrees with an independently computed
        exp(sum of logs) to high relative accuracy."""
        s = default_schedule()
        logs = [math.log1p(-float(b)) for b in s.beta]
        oracle = math.exp(math.fsum(logs))
        assert_allclose(gamma_at(s, 1000), oracle, rtol=1e-12)

    def test_one_step_noise_fraction(self):
        """1 - gamma_1 equals beta_1 (one forward step injects exactly
        beta_1 of noise variance)."""
        s = default_schedule()
        assert_allclose(1.0 - gamma_at(s, 1), s.beta_at(1), rtol=1e-11)

    def test_step_indexing_bounds(self):
        s = make_schedule("linear", 10, 1e-4, 0.02)
        with pytest.raises(IndexError):
            s.beta_at(0)
        with pytest.raises(IndexError):
            s.beta_at(11)
        with pytest.raises(IndexError):
            gamma_at(s, -1)
        with pytest.raises(IndexError):
            gamma_at(s, 11)


class TestScheduleValidation:
    def test_rejects_inconsistent_arrays(self):
        s = default_schedule()
        with pytest.raises(ParameterError):
            Schedule(T=3, beta=s.beta, alpha=s.alpha, gamma=s.gamma)

    def test_rejects_nondecreasing_gamma(self):
        beta = np.array([0.1, 0.1])
        alpha = 1.0 - beta
        with pytest.raises(ParameterError):
            Schedule(T=2, beta=beta, alpha=alpha, gamma=np.array([0.9, 0.9]))
