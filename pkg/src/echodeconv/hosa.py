"""Pulse estimation from third-order statistics.

The observed trace is modeled as a pulse convolved with a sparse,
non-Gaussian reflectivity sequence plus Gaussian noise. Third-order
cumulants of the trace are blind to the Gaussian noise and to the
reflectivity's second-order structure, so the pulse's cepstrum can be
read off the bicepstrum (the 2D inverse transform of the log
bispectrum, computed here without explicit logarithms via the
lag-weighted transform ratio) and the pulse rebuilt by exponentiating
back.

Orientation note: with numpy's FFT sign conventions the pulse cepstrum
q appears on the bicepstrum's main diagonal as b(n, n) = n * q(-n)
(the first-lag weighting makes the anti-diagonal identically zero) and
again on the first axis as b(n, 0) = n * q(n). ``diagonal_cepstrum``
reads q(n) = b(-n, -n) / (-n); ``estimate_pulse`` averages that read
with the axis read, which is algebraically identical for exact
statistics and halves the read-out variance on estimated ones. The
deterministic round-trip tests pin this orientation; see the test
suite before changing it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from echodeconv.signals import as_signal


@dataclass(frozen=True)
class HosaConfig:
    """Segmentation and transform sizes for pulse estimation.

    ``lag_L`` lags must fit the FFT grid (2*lag_L + 1 <= fft_size) and
    the per-segment cumulant window (lag_L < segment_length / 2).

    Default fft_size is twice the lag-grid span: exponentiating the
    cepstrum doubles its effective support, and a tight grid wraps that
    overflow back onto the pulse. Default lag_L keeps the shortest
    estimation count per segment (segment_length - 2*lag_L) at 32, so
    the finite-window expectation correction stays bounded by 4x.
    """

    segment_length: int = 128
    lag_L: int = 48
    fft_size: int = 256
    pulse_length: int = 64

    def __post_init__(self):
        if self.segment_length < 32:
            raise ValueError("segment_length must be >= 32")
        if self.lag_L < 1:
            raise ValueError("lag_L must be positive")
        if self.lag_L >= self.segment_length / 2:
            raise ValueError(
                f"lag_L ({self.lag_L}) must be < segment_length/2 "
                f"({self.segment_length / 2:g})"
            )
        if self.fft_size < 2 * self.lag_L + 1:
            raise ValueError(
                f"fft_size ({self.fft_size}) must cover the lag grid "
                f"(2*{self.lag_L}+1 = {2 * self.lag_L + 1})"
            )
        if self.pulse_length < 8:
            raise ValueError("pulse_length must be >= 8")
        if self.pulse_length > self.fft_size:
            raise ValueError("pulse_length cannot exceed fft_size")


@dataclass
class CumulantMatrix:
    """Third-order cumulant grid over lags -L..L (both axes)."""

    values: np.ndarray  # (2L+1, 2L+1); [i, j] holds c(i - L, j - L)
    lag_L: int
    segment_count_M: int

    def at(self, m1: int, m2: int) -> float:
        return float(self.values[m1 + self.lag_L, m2 + self.lag_L])


@dataclass
class Bicepstrum:
    """Bicepstrum on the wrapped FFT grid.

    ``values[n1 % fft_size, n2 % fft_size]`` holds b(n1, n2) for signed
    lags up to +-fft_size/2.
    """

    values: np.ndarray
    fft_size: int
    stabilized_bins: int = 0
    diagnostics: dict = field(default_factory=dict)

    def at(self, n1: int, n2: int) -> float:
        return float(self.values[n1 % self.fft_size, n2 % self.fft_size])


@dataclass
class PulseEstimate:
    """Canonical pulse: unit energy, peak centered, peak positive."""

    pulse: np.ndarray
    cepstrum: np.ndarray  # centered: index i holds q(i - n_max)
    diagnostics: dict = field(default_factory=dict)


def third_order_cumulant(y, L: int) -> CumulantMatrix:
    """Biased third-order cumulant estimate over the (2L+1)^2 lag grid.

    c(m1, m2) = (1/M) * sum_k y(k) y(k+m1) y(k+m2) with M = len(y),
    out-of-range products dropped (treated as zero). The input is
    zero-meaned first.
    """
    y = as_signal(y, "y")
    M = y.size
    if L < 1:
        raise ValueError("L must be positive")
    if L >= M / 2:
        raise ValueError(f"L ({L}) must be < len(y)/2 ({M / 2:g})")
    z = y - y.mean()
    padded = np.concatenate([np.zeros(L), z, np.zeros(L)])
    # shifted[i] = z shifted by lag (i - L), zero outside the record
    shifted = np.lib.stride_tricks.sliding_window_view(padded, M)[: 2 * L + 1]
    weighted = shifted * z[None, :]
    values = (weighted @ shifted.T) / M
    return CumulantMatrix(values=values, lag_L=L, segment_count_M=M)


def _wrap_lag_grid(values: np.ndarray, L: int, fft_size: int) -> np.ndarray:
    """Place the centered lag grid on the FFT grid at wrapped indices."""
    out = np.zeros((fft_size, fft_size))
    lags = np.arange(-L, L + 1)
    idx = lags % fft_size
    out[np.ix_(idx, idx)] = values
    return out


def bicepstrum(c: CumulantMatrix, fft_size: int | None = None) -> Bicepstrum:
    """Bicepstrum from the cumulant grid via the lag-weighted transform ratio.

    Computes IF2D{ F2D[m1 * c] / F2D[c] }, which equals the first-lag-
    weighted inverse transform of the log bispectrum without taking any
    logarithm (no branch-cut issues). Denominator bins smaller than
    1e-8 of the peak magnitude are floored (count recorded).
    """
    if fft_size is None:
        fft_size = 2 * c.lag_L + 1
    if fft_size < 2 * c.lag_L + 1:
        raise ValueError(
            f"fft_size ({fft_size}) must cover the lag grid (2L+1 = {2 * c.lag_L + 1})"
        )
    if not np.any(c.values):
        raise ValueError("degenerate statistics: cumulant matrix is identically zero")
    lags = np.arange(-c.lag_L, c.lag_L + 1, dtype=np.float64)
    weighted = lags[:, None] * c.values
    num = np.fft.fft2(_wrap_lag_grid(weighted, c.lag_L, fft_size))
    den = np.fft.fft2(_wrap_lag_grid(c.values, c.lag_L, fft_size))
    eps = 1e-8
    floor = eps * np.max(np.abs(den))
    small = np.abs(den) < floor
    stabilized = int(np.count_nonzero(small))
    if stabilized:
        den = den + small * floor
    b_complex = np.fft.ifft2(num / den)
    result_norm = np.linalg.norm(b_complex.real)
    imag_norm = np.linalg.norm(b_complex.imag)
    if result_norm == 0.0 or imag_norm > 1e-6 * result_norm:
        raise ValueError(
            "ill-conditioned bicepstrum: imaginary residue "
            f"{imag_norm:.3e} vs real norm {result_norm:.3e}"
        )
    return Bicepstrum(
        values=b_complex.real,
        fft_size=fft_size,
        stabilized_bins=stabilized,
        diagnostics={
            "stabilized_bins": stabilized,
            "imag_residue_ratio": float(imag_norm / result_norm),
            "denominator_floor": float(floor),
        },
    )


def diagonal_cepstrum(b: Bicepstrum, n_max: int) -> np.ndarray:
    """Pulse cepstrum read off the bicepstrum diagonal.

    Returns a centered sequence over n in [-n_max, n_max] (index i maps
    to n = i - n_max) with q(0) = 0: the gain term is indeterminate, so
    the pulse is recovered up to scale. Under this module's FFT
    conventions q(n) = b(-n, -n) / (-n); see the module docstring.
    """
    half = (b.fft_size - 1) // 2
    if not 1 <= n_max <= half:
        raise ValueError(f"n_max must be in [1, {half}] for fft_size {b.fft_size}")
    q = np.zeros(2 * n_max + 1)
    for n in range(1, n_max + 1):
        q[n_max + n] = b.at(-n, -n) / (-n)
        q[n_max - n] = b.at(n, n) / n
    return q


def reconstruct_pulse(cepstrum, out_length: int) -> PulseEstimate:
    """Rebuild a pulse from its (centered) cepstrum sequence.

    The cepstrum is placed on a length-``out_length`` FFT grid at
    wrapped indices, exponentiated in the frequency domain, and
    inverse-transformed. The result is canonicalized: unit energy, peak
    magnitude at index out_length//2, peak value positive.
    """
    cepstrum = as_signal(cepstrum, "cepstrum")
    if cepstrum.size % 2 == 0:
        raise ValueError("cepstrum must be a centered odd-length sequence")
    n_max = cepstrum.size // 2
    if out_length < cepstrum.size:
        raise ValueError(
            f"out_length ({out_length}) must cover the cepstrum support "
            f"({cepstrum.size})"
        )
    arr = np.zeros(out_length)
    for i, value in enumerate(cepstrum):
        arr[(i - n_max) % out_length] += value
    log_spectrum = np.fft.fft(arr)
    # np.exp overflows near 709.8; fail loudly rather than emit inf
    if np.max(log_spectrum.real) > 700.0:
        raise ValueError(
            "cepstrum divergence: log-spectrum peak "
            f"{np.max(log_spectrum.real):.1f} would overflow exp"
        )
    pulse = np.fft.ifft(np.exp(log_spectrum)).real
    energy = np.linalg.norm(pulse)
    if energy == 0.0:
        raise ValueError("reconstructed pulse has zero energy")
    pulse = pulse / energy
    peak = int(np.argmax(np.abs(pulse)))
    pulse = np.roll(pulse, out_length // 2 - peak)
    if pulse[out_length // 2] < 0:
        pulse = -pulse
    return PulseEstimate(
        pulse=pulse,
        cepstrum=cepstrum.copy(),
        diagnostics={"n_max": n_max, "out_length": out_length},
    )


def _crop_centered(pulse: np.ndarray, length: int) -> np.ndarray:
    """Centered window around the canonical peak, peak at length//2."""
    center = pulse.size // 2
    start = center - length // 2
    if start < 0 or start + length > pulse.size:
        raise ValueError("crop window exceeds reconstructed support")
    return pulse[start : start + length]


def _expected_lag_taper(L: int, segment_length: int) -> np.ndarray:
    """Expectation factor of the finite-window cumulant at each lag pair.

    A length-M window sums only M - span(m1, m2) products at lags
    (m1, m2), where span = max(0, m1, m2) - min(0, m1, m2), so dividing
    by M leaves the estimate's expectation multiplied by this factor.
    Dividing it back out makes the averaged estimate unbiased on the
    full grid; without the correction the bias persists no matter how
    many segments are averaged, and the transform ratio is extremely
    sensitive to it near denominator zeros.
    """
    lags = np.arange(-L, L + 1)
    hi = np.maximum.outer(np.maximum(lags, 0), np.maximum(lags, 0))
    lo = np.minimum.outer(np.minimum(lags, 0), np.minimum(lags, 0))
    return np.maximum(segment_length - (hi - lo), 1) / segment_length


def _cap_transform_spikes(
    b: Bicepstrum,
    c: CumulantMatrix,
    cap_factor: float = 3.0,
    reliable_rel: float = 1e-3,
) -> Bicepstrum:
    """Bound isolated transform-ratio spikes before the lag read-out.

    The transform ratio behind the bicepstrum is a spectral log
    derivative: smooth and moderate wherever the cumulant's transform
    carries signal, but wildly spiky at near-zeros of the estimated
    denominator (narrowband pulses leave most of the grid with no
    signal at all). A spike at one bin leaks into every cepstrum lag at
    once, so a handful of bad bins can dominate the whole read-out.
    Magnitudes are capped at ``cap_factor`` times the median magnitude
    over reliable bins (denominator within ``reliable_rel`` of its
    peak). Phases are untouched; exact ratios of broadband pulses sit
    entirely below the cap and pass through unchanged.
    """
    den = np.fft.fft2(_wrap_lag_grid(c.values, c.lag_L, b.fft_size))
    den_mag = np.abs(den)
    # b.values is the real inverse transform of the ratio, so the
    # forward transform recovers the ratio exactly (conjugate symmetry)
    ratio = np.fft.fft2(b.values)
    mag = np.abs(ratio)
    reliable = den_mag >= reliable_rel * den_mag.max()
    cap = cap_factor * np.median(mag[reliable])
    capped = int(np.count_nonzero(mag > cap))
    if capped:
        ratio = ratio * np.minimum(1.0, cap / np.maximum(mag, np.finfo(float).tiny))
    values = np.fft.ifft2(ratio).real
    diagnostics = dict(b.diagnostics)
    diagnostics["capped_bins"] = capped
    return Bicepstrum(
        values=values,
        fft_size=b.fft_size,
        stabilized_bins=b.stabilized_bins,
        diagnostics=diagnostics,
    )


def _axis_cepstrum(b: Bicepstrum, n_max: int) -> np.ndarray:
    """Second, independent cepstrum read along the bicepstrum's first axis.

    b(n, 0) = n * q(n) under the same conventions as the diagonal read;
    see the module docstring.
    """
    q = np.zeros(2 * n_max + 1)
    for n in range(1, n_max + 1):
        q[n_max + n] = b.at(n, 0) / n
        q[n_max - n] = b.at(-n, 0) / (-n)
    return q


def estimate_pulse(y, cfg: HosaConfig = HosaConfig()) -> PulseEstimate:
    """Blind pulse estimate from an observed trace.

    The trace is split into non-overlapping segments, each zero-meaned;
    per-segment cumulants are averaged into one grid and corrected for
    the finite-window expectation taper, transformed to the bicepstrum
    with ratio spikes capped, read out along the diagonal and the first
    axis (averaged), and exponentiated back into a pulse of
    ``cfg.pulse_length`` samples (unit energy, peak centered).
    """
    y = as_signal(y, "y")
    n_segments = y.size // cfg.segment_length
    if n_segments < 2:
        raise ValueError(
            f"record too short: {y.size} samples give {n_segments} segments of "
            f"{cfg.segment_length}; at least 2 required"
        )
    acc = np.zeros((2 * cfg.lag_L + 1, 2 * cfg.lag_L + 1))
    for i in range(n_segments):
        seg = y[i * cfg.segment_length : (i + 1) * cfg.segment_length]
        acc += third_order_cumulant(seg, cfg.lag_L).values
    corrected = (acc / n_segments) / _expected_lag_taper(cfg.lag_L, cfg.segment_length)
    averaged = CumulantMatrix(
        values=corrected,
        lag_L=cfg.lag_L,
        segment_count_M=n_segments,
    )
    b = _cap_transform_spikes(bicepstrum(averaged, cfg.fft_size), averaged)
    n_max = min((cfg.fft_size - 1) // 2, cfg.lag_L)
    q = 0.5 * (diagonal_cepstrum(b, n_max) + _axis_cepstrum(b, n_max))
    full = reconstruct_pulse(q, cfg.fft_size)
    pulse = _crop_centered(full.pulse, cfg.pulse_length)
    energy = np.linalg.norm(pulse)
    if energy == 0.0:
        raise ValueError("estimated pulse has zero energy after cropping")
    pulse = pulse / energy
    diagnostics = dict(full.diagnostics)
    diagnostics.update(
        {
            "segment_count": n_segments,
            "segment_length": cfg.segment_length,
            "lag_L": cfg.lag_L,
            "stabilized_bins": b.stabilized_bins,
            "capped_bins": b.diagnostics["capped_bins"],
            "imag_residue_ratio": b.diagnostics["imag_residue_ratio"],
        }
    )
    return PulseEstimate(pulse=pulse, cepstrum=q, diagnostics=diagnostics)


_PRINCIPAL_PAIRS_CACHE: dict = {}


def _principal_pairs(half: int) -> tuple[np.ndarray, np.ndarray]:
    # principal domain: 1 <= j <= k, j + k < nseg/2
    if half not in _PRINCIPAL_PAIRS_CACHE:
        pairs = [(j, k) for k in range(1, half) for j in range(1, k + 1) if j + k < half]
        _PRINCIPAL_PAIRS_CACHE[half] = (
            np.array([p[0] for p in pairs]),
            np.array([p[1] for p in pairs]),
        )
    return _PRINCIPAL_PAIRS_CACHE[half]


def _smoothed_mean_periodogram(segments: np.ndarray) -> np.ndarray:
    """Averaged periodogram, lightly smoothed to stabilize variance ratios."""
    nseg = segments.shape[1]
    power = np.mean(np.abs(np.fft.fft(segments, axis=1)) ** 2, axis=0) / nseg
    kernel = np.ones(3) / 3.0
    return np.convolve(np.concatenate([power[-1:], power, power[:1]]), kernel)[2:-2]


def _bispectral_stat(
    segments: np.ndarray, box_size: int = 3, keep: np.ndarray | None = None
) -> tuple[float, int]:
    """Summed bispectral chi-squared statistic over the principal domain.

    ``segments`` is a (K, nseg) array of zero-mean segments. The
    averaged segment bispectrum is smoothed over ``box_size`` x
    ``box_size`` bifrequency boxes (the classical resolution/variance
    trade of direct bispectrum estimates), and each box mean is squared
    against the variance a Gaussian process would give it (a product of
    smoothed power-spectrum estimates). The sum over boxes is
    chi-squared with two degrees of freedom per box under the null, up
    to a finite-sample scale (see gaussianity_test). ``keep`` optionally
    restricts the tested bifrequency pairs (boolean over the principal
    domain); under the null any subset still has zero bispectrum.
    """
    K, nseg = segments.shape
    spectra = np.fft.fft(segments, axis=1)
    power = _smoothed_mean_periodogram(segments)

    half = nseg // 2
    js, ks = _principal_pairs(half)
    if keep is not None:
        js, ks = js[keep], ks[keep]
        if js.size == 0:
            raise ValueError("bifrequency domain is empty after power screening")
    triple = spectra[:, js] * spectra[:, ks] * np.conj(spectra[:, js + ks])
    b_mean = triple.mean(axis=0) / nseg
    null_var = (nseg / K) * power[js] * power[ks] * power[js + ks]

    # group bifrequencies into boxes; box means of independent terms
    # keep chi-squared(2) per box while averaging down the variance
    box_ids = (js // box_size) * ((half // box_size) + 1) + (ks // box_size)
    _, inv, counts = np.unique(box_ids, return_inverse=True, return_counts=True)
    box_mean_re = np.bincount(inv, weights=b_mean.real) / counts
    box_mean_im = np.bincount(inv, weights=b_mean.imag) / counts
    box_var = np.bincount(inv, weights=null_var) / counts**2
    stat = np.sum(2.0 * (box_mean_re**2 + box_mean_im**2) / box_var)
    return float(stat), 2 * counts.size


# internal surrogate-null settings: draw count trades p-value jitter
# against runtime; the seed keeps the test deterministic per record
_NULL_SURROGATE_DRAWS = 48
_NULL_SURROGATE_SEED = 70219


def _null_moments(
    y: np.ndarray, K: int, nseg: int, box_size: int, keep: np.ndarray | None
) -> tuple[float, float]:
    """Finite-sample null moments of the statistic for this record.

    The Gaussian null must share the record's spectral shape: for
    colored records (narrowband pulses) leakage biases the periodogram
    floor and correlates neighboring bispectrum bins, so white-noise
    moments misplace the chi-squared reference badly. Phase-randomized
    surrogates keep the record's periodogram exactly while destroying
    all phase (third-order) structure, giving the right null even under
    steep coloring. Both moments matter: with thousands of degrees of
    freedom even a 2% mean shift moves the chi-squared tail from one
    end to the other.
    """
    n = K * nseg
    spectrum_mag = np.abs(np.fft.rfft(y[:n]))
    rng = np.random.default_rng(np.random.SeedSequence([_NULL_SURROGATE_SEED, n]))
    half = spectrum_mag.size
    draws = np.empty(_NULL_SURROGATE_DRAWS)
    for i in range(_NULL_SURROGATE_DRAWS):
        phase = np.exp(2j * np.pi * rng.random(half))
        phase[0] = 1.0
        if n % 2 == 0:
            phase[-1] = 1.0
        surrogate = np.fft.irfft(spectrum_mag * phase, n)
        seg = surrogate.reshape(K, nseg)
        seg = seg - seg.mean(axis=1, keepdims=True)
        draws[i], _ = _bispectral_stat(seg, box_size, keep)
    return float(draws.mean()), float(draws.std(ddof=1))


def gaussianity_test(
    y, segment_length: int = 256, alpha: float = 0.05, box_size: int = 3
) -> dict:
    """Bispectrum-based test of the Gaussianity hypothesis.

    The record is split into segments; segment bispectra are averaged
    over the principal bifrequency domain, smoothed over ``box_size``
    bifrequency boxes, and compared against the variance they would have
    under a Gaussian process (power-spectrum products). The summed
    statistic is referred to a chi-squared null whose scale and
    effective degrees of freedom are matched to the statistic's
    finite-sample null moments, measured on phase-randomized surrogates
    of the record itself (Gaussian records with the record's exact
    spectral shape), so colored records are tested against the right
    null.

    ``box_size`` sets the bifrequency resolution of the test: larger
    boxes average more of the bispectrum into each tested value, which
    lowers sensitivity to weak wideband departures while keeping strong
    ones overwhelming.

    Returns ``{"statistic", "p_value", "is_gaussian", ...}`` with
    ``is_gaussian = (p_value > alpha)``.
    """
    y = as_signal(y, "y")
    if y.size < 256:
        raise ValueError(f"record too short for the test: {y.size} < 256 samples")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    K = y.size // segment_length
    if K < 8:
        raise ValueError(
            f"need at least 8 segments of {segment_length}, got {K}; "
            "reduce segment_length or supply a longer record"
        )
    if box_size < 1:
        raise ValueError("box_size must be a positive integer")
    nseg = segment_length
    segments = y[: K * nseg].reshape(K, nseg)
    segments = segments - segments.mean(axis=1, keepdims=True)

    # screen out bifrequencies at the record's spectral floor: bins with
    # negligible power carry no usable phase information and only dilute
    # the statistic with ratio noise. The same mask (derived from the
    # record, shared by its surrogates) keeps the null matched.
    power = _smoothed_mean_periodogram(segments)
    js, ks = _principal_pairs(nseg // 2)
    floor = 0.1 * power.mean()
    keep = (power[js] >= floor) & (power[ks] >= floor) & (power[js + ks] >= floor)
    if not np.any(keep):
        keep = None  # degenerate spectrum: fall back to the full domain

    raw_stat, dof = _bispectral_stat(segments, box_size, keep)
    null_mean, null_sd = _null_moments(y, K, nseg, box_size, keep)
    # two-moment chi-squared fit: stat ~ a * chi2(nu) under the null
    a = null_sd**2 / (2.0 * null_mean)
    nu = 2.0 * null_mean**2 / null_sd**2
    stat = raw_stat / a
    p_value = float(scipy.stats.chi2.sf(stat, nu))
    return {
        "statistic": stat,
        "p_value": p_value,
        "is_gaussian": bool(p_value > alpha),
        "segments": K,
        "segment_length": nseg,
        "bifrequencies": dof // 2,
        "effective_dof": nu,
        "alpha": alpha,
    }
