"""Tests for the alignment-invariant quality metrics."""

import math

import numpy as np
import pytest

from echodeconv.metrics import aligned_mse, axial_resolution_gain, isnr_db


def canonical_replica(truth, estimate):
    # independent re-derivation: unit energy, circular xcorr alignment,
    # sign flip, unit peak, direct mean((a-b)^2)
    a = np.asarray(truth, dtype=float)
    b = np.asarray(estimate, dtype=float)
    a = a / np.sqrt(np.sum(a**2))
    b = b / np.sqrt(np.sum(b**2))
    n = max(a.size, b.size)
    a = np.pad(a, (0, n - a.size))
    b = np.pad(b, (0, n - b.size))
    xc = np.fft.ifft(np.fft.fft(a) * np.conj(np.fft.fft(b))).real
    k = int(np.argmax(np.abs(xc)))
    sign = 1.0 if xc[k] >= 0 else -1.0
    b = sign * np.roll(b, k)
    a = a / np.max(np.abs(a))
    b = b / np.max(np.abs(b))
    return float(np.mean((a - b) ** 2))


class TestAlignedMse:
    def test_identity_is_exactly_zero(self):
        rng = np.random.default_rng(3)
        s = rng.standard_normal(64)
        mse, al = aligned_mse(s, s)
        assert mse == 0.0
        assert al.shift == 0
        assert al.sign == 1.0

    def test_shift_and_sign_invariance(self):
        rng = np.random.default_rng(4)
        s = rng.standard_normal(128)
        mse, al = aligned_mse(s, -np.roll(s, 7))
        assert mse < 1e-12
        assert al.sign == -1.0

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        s = rng.standard_normal(96)
        mse, _ = aligned_mse(s, 3.7 * s)
        assert mse < 1e-12

    def test_symmetric_under_swap(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal(80)
        b = rng.standard_normal(80)
        assert aligned_mse(a, b)[0] == pytest.approx(aligned_mse(b, a)[0], abs=1e-12)

    def test_orthogonal_tones_match_direct_formula(self):
        # distinct Fourier modes stay orthogonal under every circular shift,
        # so the cross term vanishes and the direct formula is exact
        n = 64
        t = np.arange(n)
        a = np.cos(2 * np.pi * 3 * t / n)
        b = np.cos(2 * np.pi * 9 * t / n)
        mse, _ = aligned_mse(a, b)
        ae = a / np.sqrt(np.sum(a**2))
        be = b / np.sqrt(np.sum(b**2))
        direct = np.mean((ae / np.max(np.abs(ae))) ** 2) + np.mean(
            (be / np.max(np.abs(be))) ** 2
        )
        assert mse == pytest.approx(direct, abs=1e-12)

    def test_random_pair_matches_replica(self):
        rng = np.random.default_rng(42)
        a = rng.standard_normal(100)
        b = rng.standard_normal(100)
        mse, _ = aligned_mse(a, b)
        assert mse == pytest.approx(canonical_replica(a, b), abs=1e-14)

    def test_unequal_lengths_pad_before_alignment(self):
        rng = np.random.default_rng(8)
        s = rng.standard_normal(50)
        # shorter estimate is zero-padded, then aligns exactly
        mse, _ = aligned_mse(np.pad(s, (0, 14)), s)
        assert mse < 1e-12

    def test_rejects_zero_energy(self):
        with pytest.raises(ValueError, match="zero-energy"):
            aligned_mse(np.zeros(16), np.ones(16))

    def test_bounded_for_arbitrary_pairs(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            a = rng.standard_normal(64)
            b = rng.standard_normal(64)
            mse, _ = aligned_mse(a, b)
            assert mse >= 0.0


class TestIsnrDb:
    def test_estimate_equal_to_observation_is_exactly_zero(self):
        rng = np.random.default_rng(10)
        x = rng.standard_normal(128)
        y = x + 0.3 * rng.standard_normal(128)
        assert isnr_db(y, x, y) == 0.0

    def test_perfect_estimate_is_infinite(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal(128)
        y = x + 0.3 * rng.standard_normal(128)
        assert isnr_db(y, x, x) == math.inf

    def test_halved_error_gains_six_db(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal(128)
        d = 0.001 * rng.standard_normal(128)
        # estimate error is half the observation error in the aligned frame
        assert isnr_db(x + d, x, x + 0.5 * d) == pytest.approx(6.02, abs=0.05)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            isnr_db(np.ones(10), np.ones(10), np.ones(9))

    def test_positive_when_estimate_is_closer(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal(256)
        noise = rng.standard_normal(256)
        y = x + 0.5 * noise
        assert isnr_db(y, x, x + 0.05 * noise) > 0.0


class TestAxialResolutionGain:
    def test_identity_gain_is_exactly_one(self):
        t = np.arange(256) - 128.0
        s = np.exp(-(t**2) / (2 * 6.0**2)) * np.cos(0.3 * np.pi * t)
        report = axial_resolution_gain(s, s)
        assert report["axial_resolution_gain"] == 1.0

    def test_gain_is_ratio_of_reported_widths(self):
        t = np.arange(256) - 128.0
        broad = np.exp(-(t**2) / (2 * 8.0**2)) * np.cos(0.3 * np.pi * t)
        narrow = np.exp(-(t**2) / (2 * 4.0**2)) * np.cos(0.3 * np.pi * t)
        report = axial_resolution_gain(broad, narrow)
        ratio = report["width_before_samples"] / report["width_after_samples"]
        assert report["axial_resolution_gain"] == pytest.approx(ratio, abs=1e-12)

    def test_halved_envelope_width_doubles_gain(self):
        t = np.arange(256) - 128.0
        broad = np.exp(-(t**2) / (2 * 8.0**2)) * np.cos(0.3 * np.pi * t)
        narrow = np.exp(-(t**2) / (2 * 4.0**2)) * np.cos(0.3 * np.pi * t)
        report = axial_resolution_gain(broad, narrow)
        # envelope sigma halves, so the -3 dB width should roughly halve
        assert 1.75 < report["axial_resolution_gain"] < 2.1

    def test_width_tracks_gaussian_envelope_scale(self):
        # for a Gaussian envelope exp(-t^2/(2 s^2)) the normalized envelope
        # autocovariance is ~exp(-m^2/(4 s^2)); full width at the -3 dB drop
        # is 4 s sqrt(ln(1/r)) with r = 10**(-3/20)
        t = np.arange(256) - 128.0
        sig = 8.0
        s = np.exp(-(t**2) / (2 * sig**2)) * np.cos(0.3 * np.pi * t)
        report = axial_resolution_gain(s, s)
        analytic = 4 * sig * math.sqrt(math.log(1 / 10 ** (-3 / 20)))
        assert report["width_before_samples"] == pytest.approx(analytic, rel=0.10)

    def test_gain_scale_invariant(self):
        t = np.arange(256) - 128.0
        broad = np.exp(-(t**2) / (2 * 8.0**2)) * np.cos(0.3 * np.pi * t)
        narrow = np.exp(-(t**2) / (2 * 4.0**2)) * np.cos(0.3 * np.pi * t)
        base = axial_resolution_gain(broad, narrow)["axial_resolution_gain"]
        scaled = axial_resolution_gain(12.0 * broad, 0.25 * narrow)[
            "axial_resolution_gain"
        ]
        assert scaled == pytest.approx(base, abs=1e-12)
