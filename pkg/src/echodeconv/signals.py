"""Core 1D signal primitives.

Signals are plain 1-D float64 numpy arrays (non-empty, all values finite).
Spectra are the complex arrays produced by ``np.fft.fft``; conjugate
symmetry holds whenever the time-domain signal is real. Optional
sampling-rate metadata travels with the file formats in
:mod:`echodeconv.io_formats`, not with the arrays themselves.

All functions here are pure (randomness enters only through an explicit
seed), so they are safe to call concurrently.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.signal


def as_signal(x, name: str = "signal") -> np.ndarray:
    """Validate and coerce ``x`` to a 1-D float64 array.

    Raises ValueError for empty input, non-1D shape, or non-finite values.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def convolve(x, h) -> np.ndarray:
    """Linear convolution of ``x`` with kernel ``h``, truncated to ``len(x)``.

    The full convolution tail (the last ``len(h) - 1`` samples) is
    discarded so the output stays commensurate with the input trace.
    Note this is truncation, not circular wrap-around.
    """
    x = as_signal(x, "x")
    h = as_signal(h, "h")
    return np.convolve(x, h)[: x.size]


def snr_db(clean, noisy) -> float:
    """Signal-to-noise ratio 20*log10(||clean|| / ||clean - noisy||) in dB.

    Returns ``math.inf`` when the two signals are identical (no noise).
    """
    clean = as_signal(clean, "clean")
    noisy = as_signal(noisy, "noisy")
    if clean.size != noisy.size:
        raise ValueError(
            f"length mismatch: clean has {clean.size} samples, noisy has {noisy.size}"
        )
    signal_norm = np.linalg.norm(clean)
    if signal_norm == 0.0:
        raise ValueError("clean signal has zero norm")
    diff_norm = np.linalg.norm(clean - noisy)
    if diff_norm == 0.0:
        return math.inf
    return 20.0 * math.log10(signal_norm / diff_norm)


def add_noise_at_snr(y, target_snr_db: float, rng_seed) -> tuple[np.ndarray, float]:
    """Add white Gaussian noise so the realized SNR equals the target exactly.

    The drawn noise vector is rescaled so that ``snr_db(y, y + noise)``
    hits ``target_snr_db`` for this realization (not merely in
    expectation), which keeps repeated experiments at the quoted SNR.

    Parameters
    ----------
    y : array_like
        Clean signal, nonzero norm.
    target_snr_db : float
        Desired SNR in dB. ``math.inf`` returns ``y`` unchanged.
    rng_seed : int or numpy.random.Generator
        Seed or generator; the same seed gives bit-identical output.

    Returns
    -------
    (noisy, noise_sigma) : (ndarray, float)
        Noisy signal and the empirical standard deviation of the
        realized noise vector.
    """
    y = as_signal(y, "y")
    y_norm = np.linalg.norm(y)
    if y_norm == 0.0:
        raise ValueError("cannot set an SNR for a zero-norm signal")
    if math.isinf(target_snr_db) and target_snr_db > 0:
        return y.copy(), 0.0
    if not math.isfinite(target_snr_db):
        raise ValueError("target SNR must be finite or +inf")
    rng = np.random.default_rng(rng_seed)
    g = rng.standard_normal(y.size)
    g_norm = np.linalg.norm(g)
    target_noise_norm = y_norm * 10.0 ** (-target_snr_db / 20.0)
    noise = g * (target_noise_norm / g_norm)
    sigma = float(np.sqrt(np.mean(noise**2)))
    return y + noise, sigma


def envelope(s) -> np.ndarray:
    """Magnitude of the analytic signal (DFT-based Hilbert transform).

    Uses one-sided spectrum doubling with the signal length as the
    transform size.
    """
    s = as_signal(s, "s")
    if s.size < 4:
        raise ValueError(f"envelope needs at least 4 samples, got {s.size}")
    return np.abs(scipy.signal.hilbert(s))


def autocovariance_normalized(s, max_lag: int) -> np.ndarray:
    """Two-sided normalized autocovariance over lags -max_lag..max_lag.

    The mean is removed before correlating, and the result is scaled so
    the lag-0 value (the center of the returned array) is exactly 1.
    """
    s = as_signal(s, "s")
    if not 0 <= max_lag < s.size:
        raise ValueError(f"max_lag must be in [0, {s.size - 1}], got {max_lag}")
    z = s - s.mean()
    denom = float(np.dot(z, z))
    if denom == 0.0:
        raise ValueError("signal has zero variance")
    pos = np.array([np.dot(z[: z.size - m], z[m:]) for m in range(max_lag + 1)])
    pos /= denom
    return np.concatenate([pos[:0:-1], pos])


def mainlobe_width_at_drop(acov, drop_db: float = 3.0) -> float:
    """Full width of the main lobe where the sequence first falls below a dB drop.

    ``acov`` is a lag-centered sequence (as returned by
    :func:`autocovariance_normalized`) with its peak value 1 at the center.
    The crossing points on each side of the peak are located by linear
    interpolation, so the returned width is fractional.
    """
    acov = as_signal(acov, "acov")
    peak = int(np.argmax(acov))
    if not math.isclose(acov[peak], 1.0, rel_tol=0, abs_tol=1e-6):
        raise ValueError("autocovariance peak must equal 1")
    threshold = 10.0 ** (-drop_db / 20.0)

    def _crossing(direction: int) -> float:
        i = peak
        while True:
            j = i + direction
            if j < 0 or j >= acov.size:
                raise ValueError(
                    f"main lobe never falls below the {drop_db} dB threshold "
                    "within the available lags"
                )
            if acov[j] < threshold:
                # linear interpolation between samples i and j
                frac = (acov[i] - threshold) / (acov[i] - acov[j])
                return abs(i - peak) + frac
            i = j

    return _crossing(-1) + _crossing(+1)
