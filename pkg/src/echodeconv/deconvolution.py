"""Regularized deconvolution engines.

Two inversion families share the same frequency-domain core
Y * conj(H) / (|H|^2 + reg): a classical Wiener filter with a constant
noise-desensitizing term, and a two-stage pipeline that follows the
leaky Fourier inversion with Wiener-style shrinkage of wavelet
coefficients. The two-stage variant uses a wavelet pair: one basis
picks the keep/kill pattern by hard thresholding, the other carries
the shrinkage into the signal estimate, which suppresses the
structured colored noise the Fourier step lets through while keeping
the sparse reflectivity spikes.

An optional post-processing step fits an autoregressive model to the
deconvolved spectrum inside the pulse passband and extrapolates the
spectrum beyond it, sharpening time-domain peaks that the band-limited
pulse cannot resolve on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from echodeconv.hosa import HosaConfig, estimate_pulse
from echodeconv.signals import as_signal
from echodeconv.wavelets import (
    WaveletCoefficients,
    WaveletSpec,
    dwt,
    hard_threshold,
    idwt,
    level_threshold,
    mad_sigma,
    per_level_sigmas,
)

METHODS = ("WienerQ", "Wiener+ASE", "ForWaRD", "ForWaRD+ASE")


@dataclass(frozen=True)
class ForwardConfig:
    """Settings for the two-stage deconvolution pipeline.

    ``denoise_wavelet`` picks the keep/kill pattern (hard thresholding);
    ``inversion_wavelet`` carries the shrinkage into the estimate. Both
    must decompose to the same number of levels. ``tau_multiplier``
    scales the Fourier-stage regularizer within its standard range.
    """

    denoise_wavelet: WaveletSpec = WaveletSpec(vanishing_moments=12)
    inversion_wavelet: WaveletSpec = WaveletSpec(vanishing_moments=6)
    tau_multiplier: float = 1.0
    tau_search: bool = False
    threshold_log_base: str = "e"
    threshold_scope: str = "record"
    ase_enabled: bool = False
    burg_order: int = 20
    level_sigma_rule: str = "propagated"

    def __post_init__(self):
        if not 0.01 <= self.tau_multiplier <= 10.0:
            raise ValueError(
                f"tau_multiplier must lie in [0.01, 10], got {self.tau_multiplier}"
            )
        if self.burg_order < 2:
            raise ValueError("burg_order must be >= 2")
        if self.threshold_log_base not in ("e", "2", "10"):
            raise ValueError(
                "threshold_log_base must be one of 'e', '2', '10', "
                f"got {self.threshold_log_base!r}"
            )
        if self.threshold_scope not in ("record", "level"):
            raise ValueError(
                "threshold_scope must be 'record' (N = record length) or "
                f"'level' (N = coefficients at the level), got {self.threshold_scope!r}"
            )
        if self.level_sigma_rule not in ("propagated", "empirical_mad"):
            raise ValueError(
                "level_sigma_rule must be 'propagated' or 'empirical_mad', "
                f"got {self.level_sigma_rule!r}"
            )


@dataclass
class DeconvolutionResult:
    """Reflectivity estimate plus the run's recorded parameters."""

    reflectivity_estimate: np.ndarray
    method_tag: str
    pulse_used: np.ndarray | None = None
    intermediate: dict = field(default_factory=dict)


def _spectra(y, h) -> tuple[np.ndarray, np.ndarray]:
    # common validation + DFT pair on the observation's grid
    y = as_signal(y, "y")
    h = as_signal(h, "h")
    if h.size > y.size:
        raise ValueError(
            f"pulse ({h.size} samples) is longer than the record ({y.size})"
        )
    if not np.any(h):
        raise ValueError("pulse is identically zero")
    return np.fft.fft(y), np.fft.fft(h, y.size)


def _regularized_inverse(Y: np.ndarray, H: np.ndarray, reg: float) -> np.ndarray:
    den = np.abs(H) ** 2 + reg
    if np.any(den == 0.0):
        raise ValueError("unregularized inversion at spectral zero")
    return np.fft.ifft(Y * np.conj(H) / den).real


def wiener_q(y, h, q_sq: float | None = None) -> DeconvolutionResult:
    """Wiener inversion with a constant noise-desensitizing term.

    Applies Y * conj(H) / (|H|^2 + Q^2) binwise and returns the real
    inverse transform. ``q_sq`` defaults to max|H|^2 / 100.
    """
    Y, H = _spectra(y, h)
    if q_sq is None:
        q_sq = float(np.max(np.abs(H) ** 2) / 100.0)
    if q_sq < 0:
        raise ValueError("q_sq must be nonnegative")
    estimate = _regularized_inverse(Y, H, q_sq)
    return DeconvolutionResult(
        reflectivity_estimate=estimate,
        method_tag="WienerQ",
        pulse_used=as_signal(h, "h"),
        intermediate={"q_sq": q_sq},
    )


def estimate_noise_sigma(y, spec: WaveletSpec | None = None) -> float:
    """Noise scale from the finest-level detail coefficients of y.

    The finest wavelet details of a signal dominated by band-limited
    content are mostly noise, so their robust scale estimates the noise
    standard deviation even before any inversion.
    """
    if spec is None:
        spec = WaveletSpec(vanishing_moments=12)
    return mad_sigma(dwt(y, spec).details[0])


def tikhonov_tau(y, sigma: float, multiplier: float = 1.0) -> float:
    """Fourier-stage regularizer tau = multiplier * N * sigma^2 / ||y - mean||^2."""
    y = as_signal(y, "y")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if not 0.01 <= multiplier <= 10.0:
        raise ValueError(f"tau multiplier must lie in [0.01, 10], got {multiplier}")
    dev = y - y.mean()
    denom = float(np.sum(dev**2))
    if denom == 0.0:
        raise ValueError("constant record: tau denominator is zero")
    return multiplier * y.size * sigma**2 / denom


def fourier_shrink(y, h, tau: float) -> np.ndarray:
    """Leaky Fourier inversion Y * conj(H) / (|H|^2 + tau).

    Algebraically the inverse filter scaled by the shrinkage factor
    |H|^2 / (|H|^2 + tau), in the division-safe form. tau = 0 demands a
    zero-free pulse spectrum.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    Y, H = _spectra(y, h)
    return _regularized_inverse(Y, H, tau)


def _detail_atom(spec: WaveletSpec, level_index: int, n: int) -> np.ndarray:
    """Time-domain synthesis atom of one detail coefficient at a level.

    The coefficient is placed mid-level so the atom does not wrap, which
    keeps its energy centroid meaningful. All translates at a level
    share the atom's spectral magnitude (shifts of 2^level samples).
    """
    levels = spec.decomposition_levels
    approx = np.zeros(n >> levels)
    details = [np.zeros(n >> (j + 1)) for j in range(levels)]
    details[level_index][details[level_index].size // 2] = 1.0
    return idwt(
        WaveletCoefficients(
            approximation=approx,
            details=details,
            spec=spec,
            original_length=n,
        )
    )


def _propagated_level_sigmas(
    spec: WaveletSpec, noise_density: np.ndarray, n: int
) -> np.ndarray:
    """Noise scale per detail level from the x_lambda1 noise spectrum.

    For stationary noise with per-sample spectral density S(f), the
    variance of a unit-norm analysis atom's coefficient is
    (1/N) * sum_f S(f) |A(f)|^2. Unlike a median over coefficients,
    this is blind to the sparse signal content that shares the level.
    """
    sigmas = np.empty(spec.decomposition_levels)
    for j in range(spec.decomposition_levels):
        atom_spec_sq = np.abs(np.fft.fft(_detail_atom(spec, j, n))) ** 2
        sigmas[j] = math.sqrt(float(np.mean(noise_density * atom_spec_sq)))
    return sigmas


def forward_deconvolve(
    y, h, cfg: ForwardConfig = ForwardConfig(), keep_intermediates: bool = False
) -> DeconvolutionResult:
    """Two-stage deconvolution: Fourier shrinkage, then wavelet shrinkage.

    Steps: estimate the noise scale from the observation's finest
    details; set tau from it; invert leakily in the Fourier domain;
    decompose the result in both wavelet bases; hard-threshold the
    denoising basis per level at sigma_j * sqrt(2 log N) and rebuild a
    reference signal from the survivors; re-expand that reference in the
    inversion basis and form per-coefficient Wiener gains
    r^2 / (r^2 + sigma_j^2) from its details; apply the gains to the
    inversion basis's details and reconstruct in that basis.

    The reference round trip is what lets two different filter banks
    cooperate: coefficient k of a level sits at different time instants
    in the two bases, so gains are only meaningful for the basis whose
    coefficients they were computed from.
    """
    if (
        cfg.denoise_wavelet.decomposition_levels
        != cfg.inversion_wavelet.decomposition_levels
    ):
        raise ValueError(
            "wavelet level counts differ: denoise has "
            f"{cfg.denoise_wavelet.decomposition_levels}, inversion has "
            f"{cfg.inversion_wavelet.decomposition_levels}"
        )
    y = as_signal(y, "y")
    h = as_signal(h, "h")
    if not np.any(h):
        raise ValueError("pulse is identically zero")
    sigma_eta = estimate_noise_sigma(y, cfg.denoise_wavelet)
    tau = tikhonov_tau(y, sigma_eta, cfg.tau_multiplier)
    # tau is dimensionless in y, but it regularizes against |H|^2, which
    # carries the pulse's arbitrary gain. Running the shrinkage on the
    # unit-energy pulse (and undoing the scale afterwards) makes the
    # multiplier range mean the same thing for provided and estimated
    # pulses; the gain is indeterminate in blind operation anyway.
    pulse_norm = float(np.linalg.norm(h))
    x_lambda1 = fourier_shrink(y, h / pulse_norm, tau) / pulse_norm

    c_den = dwt(x_lambda1, cfg.denoise_wavelet)
    c_inv = dwt(x_lambda1, cfg.inversion_wavelet)
    n = x_lambda1.size
    padded = c_den.padded_length

    if cfg.level_sigma_rule == "propagated":
        # noise in x_lambda1 is the observation noise through the
        # shrunken inverse: project its spectral density onto each
        # level's atoms. A coefficient median would mistake dense
        # coarse-level signal content for noise on sparse targets.
        Hn = np.fft.fft(h / pulse_norm, n)
        mag_sq = np.abs(Hn) ** 2
        density = sigma_eta**2 * mag_sq / ((mag_sq + tau) ** 2 * pulse_norm**2)
        if padded != n:
            density = np.interp(
                np.arange(padded) / padded, np.arange(n) / n, density
            )
        den_sigmas = _propagated_level_sigmas(cfg.denoise_wavelet, density, padded)
        inv_sigmas = _propagated_level_sigmas(cfg.inversion_wavelet, density, padded)
    else:
        den_sigmas = per_level_sigmas(c_den)
        inv_sigmas = per_level_sigmas(c_inv)

    levels = cfg.denoise_wavelet.decomposition_levels
    thresholds = []
    kept_details = []
    for j in range(levels):
        size_for_log = c_den.details[j].size if cfg.threshold_scope == "level" else n
        T = level_threshold(float(den_sigmas[j]), size_for_log, cfg.threshold_log_base)
        thresholds.append(T)
        kept_details.append(hard_threshold(c_den.details[j], T))
    x_ref = idwt(
        WaveletCoefficients(
            approximation=c_den.approximation.copy(),
            details=kept_details,
            spec=cfg.denoise_wavelet,
            original_length=c_den.original_length,
        )
    )
    c_ref = dwt(x_ref, cfg.inversion_wavelet)

    gains = []
    shrunk_details = []
    for j in range(levels):
        r = c_ref.details[j]
        lam = np.divide(
            r**2,
            r**2 + inv_sigmas[j] ** 2,
            out=np.zeros_like(r),
            where=r != 0,
        )
        gains.append(lam)
        shrunk_details.append(c_inv.details[j] * lam)

    x_f = idwt(
        WaveletCoefficients(
            approximation=c_inv.approximation.copy(),
            details=shrunk_details,
            spec=cfg.inversion_wavelet,
            original_length=c_inv.original_length,
        )
    )
    intermediate = {
        "sigma_eta": sigma_eta,
        "tau": tau,
        "thresholds": thresholds,
        "tau_multiplier": cfg.tau_multiplier,
    }
    if keep_intermediates:
        intermediate["x_lambda1"] = x_lambda1
        intermediate["shrinkage_gains"] = gains
        intermediate["level_sigmas"] = den_sigmas
        intermediate["gain_level_sigmas"] = inv_sigmas
    return DeconvolutionResult(
        reflectivity_estimate=x_f,
        method_tag="ForWaRD",
        pulse_used=as_signal(h, "h"),
        intermediate=intermediate,
    )


def oracle_tau_multiplier(
    y, h, x_true, cfg: ForwardConfig = ForwardConfig(), grid_points: int = 10
) -> float:
    """Best tau multiplier on a log grid, judged against known truth.

    Only meaningful in simulation, where the true reflectivity exists;
    mirrors picking the regularizer for best mean squared error.
    """
    from echodeconv.metrics import aligned_mse

    best_m, best_err = None, math.inf
    for m in np.logspace(math.log10(0.01), math.log10(10.0), grid_points):
        result = forward_deconvolve(y, h, replace(cfg, tau_multiplier=float(m)))
        err, _ = aligned_mse(x_true, result.reflectivity_estimate)
        if err < best_err:
            best_m, best_err = float(m), err
    return best_m


def _burg_coefficients(x: np.ndarray, order: int) -> np.ndarray:
    """Complex Burg AR coefficients a (lag 1..order).

    Predictor convention: x[t] ~ -sum_k a[k-1] * x[t-k]. The lattice
    recursion keeps every reflection coefficient inside the unit disc,
    so the fitted model is stable and extrapolation decays rather than
    diverging.
    """
    x = np.asarray(x, dtype=complex)
    n = x.size
    if order < 1:
        raise ValueError("order must be positive")
    if order >= n:
        raise ValueError(f"order ({order}) must be below the sequence length ({n})")
    f = x.copy()
    b = x.copy()
    a = np.zeros(0, dtype=complex)
    for m in range(1, order + 1):
        ff = f[m:]
        bb = b[m - 1 : -1]
        den = float(np.sum(np.abs(ff) ** 2) + np.sum(np.abs(bb) ** 2))
        if den == 0.0:
            break  # errors vanished: remaining coefficients are zero
        k = -2.0 * np.sum(ff * np.conj(bb)) / den
        a = np.concatenate([a + k * np.conj(a[::-1]), [k]])
        f_next = f.copy()
        b_next = b.copy()
        f_next[m:] = ff + k * bb
        b_next[m:] = bb + np.conj(k) * ff
        f, b = f_next, b_next
    if a.size < order:
        a = np.concatenate([a, np.zeros(order - a.size, dtype=complex)])
    return a


def pulse_passband(h, n_fft: int) -> tuple[int, int]:
    """Contiguous -6 dB band of the pulse spectrum on the half grid.

    Returns inclusive bin indices (lo, hi) of the run of bins around
    the spectral peak where |H| >= max|H| / 2, restricted to
    nonnegative frequencies.
    """
    h = as_signal(h, "h")
    if not np.any(h):
        raise ValueError("pulse is identically zero")
    mag = np.abs(np.fft.fft(h, n_fft))[: n_fft // 2 + 1]
    peak = int(np.argmax(mag))
    threshold = mag[peak] / 2.0
    lo = peak
    while lo > 0 and mag[lo - 1] >= threshold:
        lo -= 1
    hi = peak
    while hi < mag.size - 1 and mag[hi + 1] >= threshold:
        hi += 1
    return lo, hi


def ase_extrapolate(x_est, h, burg_order: int = 20) -> np.ndarray:
    """Autoregressive spectral extrapolation beyond the pulse passband.

    Fits a Burg model to the deconvolved spectrum inside the pulse's
    -6 dB band, extends the spectrum outward in both directions by AR
    prediction (measured in-band bins are never altered), re-imposes
    conjugate symmetry and inverse-transforms. Out-of-band content
    sharpens time-domain peaks the band-limited pulse blurred.
    """
    x = as_signal(x_est, "x_est")
    if not np.any(x):
        raise ValueError("degenerate estimate: all zeros")
    n = x.size
    lo, hi = pulse_passband(h, n)
    band = hi - lo + 1
    if burg_order >= band:
        raise ValueError(
            f"passband too narrow: {band} bins cannot fit a Burg model of "
            f"order {burg_order}"
        )
    X = np.fft.fft(x)
    half = n // 2
    ext = X[: half + 1].copy()
    a = _burg_coefficients(ext[lo : hi + 1], burg_order)
    order = a.size
    for k in range(hi + 1, half + 1):
        ext[k] = -np.dot(a, ext[k - 1 : k - order - 1 : -1])
    for k in range(lo - 1, -1, -1):
        ext[k] = -np.dot(np.conj(a), ext[k + 1 : k + order + 1])
    # a real output needs real DC/Nyquist; only force extrapolated bins
    if lo > 0:
        ext[0] = ext[0].real
    if n % 2 == 0 and hi < half:
        ext[half] = ext[half].real
    full = np.empty(n, dtype=complex)
    full[: half + 1] = ext
    full[half + 1 :] = np.conj(ext[1 : n - half][::-1])
    return np.fft.ifft(full).real


def deconvolve_pipeline(
    y,
    h=None,
    method: str = "ForWaRD",
    cfg: ForwardConfig = ForwardConfig(),
    hosa_cfg: HosaConfig | None = None,
    keep_intermediates: bool = False,
) -> DeconvolutionResult:
    """Full deconvolution with optional blind pulse estimation.

    When ``h`` is None the pulse is first estimated from the
    observation's third-order statistics, then the selected inversion
    runs with it; the result records the pulse actually used.
    """
    if method not in METHODS:
        raise ValueError(
            f"unknown method {method!r}; valid methods: {', '.join(METHODS)}"
        )
    y = as_signal(y, "y")
    blind = h is None
    if blind:
        pulse = estimate_pulse(y, hosa_cfg if hosa_cfg is not None else HosaConfig()).pulse
    else:
        pulse = as_signal(h, "h")

    if method.startswith("ForWaRD"):
        base = forward_deconvolve(y, pulse, cfg, keep_intermediates)
    else:
        base = wiener_q(y, pulse)

    estimate = base.reflectivity_estimate
    intermediate = dict(base.intermediate)
    intermediate["blind"] = blind
    if method.endswith("+ASE"):
        estimate = ase_extrapolate(estimate, pulse, cfg.burg_order)
        lo, hi = pulse_passband(pulse, y.size)
        intermediate["burg_order"] = cfg.burg_order
        intermediate["passband_bins"] = (lo, hi)
    return DeconvolutionResult(
        reflectivity_estimate=estimate,
        method_tag=method,
        pulse_used=pulse,
        intermediate=intermediate,
    )
