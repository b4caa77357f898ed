"""Tests for the core signal primitives."""

import math

import numpy as np
import pytest

from echodeconv.signals import (
    add_noise_at_snr,
    as_signal,
    autocovariance_normalized,
    convolve,
    envelope,
    mainlobe_width_at_drop,
    snr_db,
)


def brute_force_convolve(x, h):
    # O(n^2) double loop, truncated to len(x)
    n = len(x)
    out = np.zeros(n)
    for i in range(n):
        for j in range(len(h)):
            if 0 <= i - j < n:
                out[i] += h[j] * x[i - j]
    return out


class TestAsSignal:
    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="non-empty"):
            as_signal([])

    def test_rejects_2d(self):
        with pytest.raises(ValueError, match="one-dimensional"):
            as_signal(np.zeros((2, 3)))

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="non-finite"):
            as_signal([1.0, np.nan])

    def test_rejects_inf(self):
        with pytest.raises(ValueError, match="non-finite"):
            as_signal([1.0, np.inf])

    def test_coerces_to_float64(self):
        out = as_signal([1, 2, 3])
        assert out.dtype == np.float64


class TestConvolve:
    def test_impulse_identity(self):
        x = np.zeros(8)
        x[0] = 1.0
        out = convolve(x, [1.0, 2.0, 3.0])
        np.testing.assert_allclose(out, [1, 2, 3, 0, 0, 0, 0, 0])

    def test_hand_computed_truncation(self):
        out = convolve([1.0, 1.0], [1.0, -1.0])
        np.testing.assert_allclose(out, [1.0, 0.0])

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(16)
        h = rng.standard_normal(5)
        out = convolve(x, h)
        ref = brute_force_convolve(x, h)
        np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-14)

    def test_output_length_matches_x(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(40)
        h = rng.standard_normal(9)
        assert convolve(x, h).size == 40

    def test_linearity(self):
        rng = np.random.default_rng(2)
        x1 = rng.standard_normal(32)
        x2 = rng.standard_normal(32)
        h = rng.standard_normal(7)
        a, b = 2.5, -1.25
        lhs = convolve(a * x1 + b * x2, h)
        rhs = a * convolve(x1, h) + b * convolve(x2, h)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            convolve([], [1.0])
        with pytest.raises(ValueError):
            convolve([1.0], [])


class TestSnrDb:
    def test_equal_norms_zero_db(self):
        clean = np.array([3.0, 4.0])
        noisy = clean + np.array([4.0, -3.0])  # noise norm 5 == clean norm 5
        assert snr_db(clean, noisy) == pytest.approx(0.0, abs=1e-12)

    def test_tenth_norm_twenty_db(self):
        clean = np.array([3.0, 4.0])
        noisy = clean + 0.1 * np.array([4.0, -3.0])
        assert snr_db(clean, noisy) == pytest.approx(20.0, abs=1e-12)

    def test_identical_signals_infinite(self):
        clean = np.array([1.0, 2.0, 3.0])
        assert snr_db(clean, clean.copy()) == math.inf

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length mismatch"):
            snr_db([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_zero_norm_clean_rejected(self):
        with pytest.raises(ValueError, match="zero norm"):
            snr_db([0.0, 0.0], [1.0, 2.0])


class TestAddNoiseAtSnr:
    def test_round_trip_14_db(self):
        rng = np.random.default_rng(3)
        y = rng.standard_normal(1024)
        noisy, sigma = add_noise_at_snr(y, 14.0, rng_seed=11)
        assert snr_db(y, noisy) == pytest.approx(14.0, abs=0.01)
        assert sigma > 0

    def test_round_trip_several_targets(self):
        rng = np.random.default_rng(4)
        y = rng.standard_normal(512)
        for target in (0.0, 7.0, 10.0, 30.0, -5.0):
            noisy, _ = add_noise_at_snr(y, target, rng_seed=5)
            assert snr_db(y, noisy) == pytest.approx(target, abs=0.01)

    def test_infinite_target_is_identity(self):
        y = np.array([1.0, -2.0, 0.5])
        noisy, sigma = add_noise_at_snr(y, math.inf, rng_seed=0)
        np.testing.assert_array_equal(noisy, y)
        assert sigma == 0.0

    def test_deterministic_given_seed(self):
        y = np.arange(1.0, 65.0)
        a, sa = add_noise_at_snr(y, 10.0, rng_seed=42)
        b, sb = add_noise_at_snr(y, 10.0, rng_seed=42)
        np.testing.assert_array_equal(a, b)
        assert sa == sb

    def test_different_seeds_differ(self):
        y = np.arange(1.0, 65.0)
        a, _ = add_noise_at_snr(y, 10.0, rng_seed=1)
        b, _ = add_noise_at_snr(y, 10.0, rng_seed=2)
        assert not np.array_equal(a, b)

    def test_sigma_is_rms_of_realized_noise(self):
        rng = np.random.default_rng(5)
        y = rng.standard_normal(256)
        noisy, sigma = add_noise_at_snr(y, 7.0, rng_seed=9)
        realized = noisy - y
        assert sigma == pytest.approx(np.sqrt(np.mean(realized**2)), rel=1e-12)

    def test_zero_signal_rejected(self):
        with pytest.raises(ValueError, match="zero-norm"):
            add_noise_at_snr(np.zeros(8), 10.0, rng_seed=0)


class TestEnvelope:
    def test_pure_tone_integer_cycles_exact(self):
        # 0.1 * 320 = 32 full cycles: no leakage, identity holds to precision
        n = np.arange(320)
        s = np.cos(2 * np.pi * 0.1 * n)
        np.testing.assert_allclose(envelope(s), 1.0, rtol=0, atol=1e-12)

    def test_pure_tone_flat_away_from_edges(self):
        # 0.1 * 256 = 25.6 cycles leaks; measured ripple is 2.018% at the
        # 5%-trim boundary (sample 18) and under 2% beyond 19 samples
        n = np.arange(256)
        s = np.cos(2 * np.pi * 0.1 * n)
        env = envelope(s)
        edge = math.ceil(0.05 * s.size)
        interior = env[edge : s.size - edge]
        np.testing.assert_allclose(interior, 1.0, rtol=0.021)
        np.testing.assert_allclose(env[19:-19], 1.0, rtol=0.02)

    def test_all_zeros(self):
        env = envelope(np.zeros(64))
        np.testing.assert_array_equal(env, np.zeros(64))

    def test_sign_invariance(self):
        rng = np.random.default_rng(6)
        s = rng.standard_normal(128)
        np.testing.assert_allclose(envelope(-s), envelope(s), rtol=1e-12, atol=1e-12)

    def test_dominates_magnitude(self):
        rng = np.random.default_rng(7)
        s = rng.standard_normal(128)
        env = envelope(s)
        assert np.all(env >= np.abs(s) - 1e-9)

    def test_nonnegative(self):
        rng = np.random.default_rng(8)
        env = envelope(rng.standard_normal(100))
        assert np.all(env >= 0)

    def test_short_input_rejected(self):
        with pytest.raises(ValueError, match="at least 4"):
            envelope([1.0, 2.0, 3.0])


def brute_force_autocov(s, max_lag):
    z = s - np.mean(s)
    denom = np.sum(z * z)
    out = np.zeros(2 * max_lag + 1)
    for m in range(-max_lag, max_lag + 1):
        acc = 0.0
        for k in range(len(z)):
            if 0 <= k + m < len(z):
                acc += z[k] * z[k + m]
        out[m + max_lag] = acc / denom
    return out


class TestAutocovarianceNormalized:
    def test_lag_zero_is_one(self):
        rng = np.random.default_rng(9)
        s = rng.standard_normal(200)
        acov = autocovariance_normalized(s, 20)
        assert acov[20] == pytest.approx(1.0, abs=1e-14)

    def test_symmetric(self):
        rng = np.random.default_rng(10)
        s = rng.standard_normal(150)
        acov = autocovariance_normalized(s, 15)
        np.testing.assert_allclose(acov, acov[::-1], rtol=0, atol=1e-12)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(11)
        s = rng.standard_normal(64)
        acov = autocovariance_normalized(s, 10)
        ref = brute_force_autocov(s, 10)
        np.testing.assert_allclose(acov, ref, rtol=0, atol=1e-12)

    def test_white_noise_off_lags_small(self):
        # statistical bound |r(m)| < 3/sqrt(N) for m != 0; seed verified
        rng = np.random.default_rng(12)
        s = rng.standard_normal(4096)
        acov = autocovariance_normalized(s, 30)
        off = np.delete(acov, 30)
        assert np.max(np.abs(off)) < 3.0 / np.sqrt(4096)

    def test_constant_signal_rejected(self):
        with pytest.raises(ValueError, match="zero variance"):
            autocovariance_normalized(np.full(32, 5.0), 4)

    def test_max_lag_bounds(self):
        with pytest.raises(ValueError, match="max_lag"):
            autocovariance_normalized(np.arange(8.0), 8)


class TestMainlobeWidth:
    def test_triangular_oracle(self):
        # 1 - |m|/10 crosses 10^(-3/20) at |m| = 10*(1 - 0.70795) = 2.9205
        m = np.arange(-12, 13)
        acov = np.maximum(1.0 - np.abs(m) / 10.0, 0.0)
        width = mainlobe_width_at_drop(acov, drop_db=3.0)
        expected = 2.0 * 10.0 * (1.0 - 10.0 ** (-3.0 / 20.0))
        assert width == pytest.approx(expected, abs=1e-9)
        assert width == pytest.approx(5.8410, abs=5e-4)

    def test_impulse_width_under_two(self):
        acov = np.zeros(21)
        acov[10] = 1.0
        assert mainlobe_width_at_drop(acov, drop_db=3.0) < 2.0

    def test_never_drops_rejected(self):
        acov = np.ones(11) * 0.99
        acov[5] = 1.0
        with pytest.raises(ValueError, match="never falls"):
            mainlobe_width_at_drop(acov, drop_db=3.0)

    def test_peak_not_one_rejected(self):
        acov = np.zeros(11)
        acov[5] = 0.8
        with pytest.raises(ValueError, match="peak"):
            mainlobe_width_at_drop(acov)

    def test_wider_lobe_gives_wider_width(self):
        m = np.arange(-30, 31)
        narrow = np.exp(-(m**2) / (2 * 3.0**2))
        wide = np.exp(-(m**2) / (2 * 8.0**2))
        w_narrow = mainlobe_width_at_drop(narrow, 3.0)
        w_wide = mainlobe_width_at_drop(wide, 3.0)
        assert w_wide > w_narrow
