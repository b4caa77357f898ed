"""Orthogonal Daubechies wavelet machinery.

Multilevel periodic DWT/IDWT plus the shrinkage helpers built on it:
MAD noise estimation, level-dependent universal thresholds, and hard
thresholding.

Naming: ``DBk`` here means k vanishing moments, i.e. a 2k-tap filter
(DB6 = 12 taps, DB12 = 24 taps). Some toolboxes number the same family
by tap count; this package always uses the vanishing-moment count.

Boundary handling is periodic (circular), which keeps the transform
orthogonal and the coefficient count equal to the (padded) signal
length. Signals whose length is not divisible by 2**levels are
zero-padded to the next power of two; the pad is trimmed after
inversion and recorded on the coefficient object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from echodeconv.signals import as_signal

# Orthonormal Daubechies lowpass analysis filters, keyed by vanishing
# moments. Generated offline by spectral factorization at 60-digit
# precision and rounded to double; verified against the quadrature
# mirror and moment conditions in the test suite.
_DB_LOWPASS = {
    1: (0.7071067811865475244, 0.7071067811865475244),
    2: (-0.12940952255126038117, 0.22414386804201338103, 0.83651630373780790558,
        0.48296291314453414337),
    3: (0.035226291885709536603, -0.085441273882026661693, -0.1350110200102545887,
        0.4598775021184915701, 0.80689150931109257649, 0.332670552950082616),
    4: (-0.010597401785069032105, 0.032883011666885199735, 0.030841381835560763627,
        -0.18703481171909308408, -0.027983769416859854211, 0.63088076792985890788,
        0.71484657055291564709, 0.23037781330889650086),
    5: (0.003335725285473771278, -0.012580751999081999469, -0.0062414902127982742742,
        0.077571493840045713523, -0.032244869584638374648, -0.24229488706638203186,
        0.13842814590132073151, 0.72430852843777292773, 0.60382926979718967054,
        0.16010239797419291448),
    6: (-0.0010773010853084795649, 0.0047772575109455106396, 0.00055384220116149613925,
        -0.031582039317486029565, 0.027522865530305728626, 0.097501605587323049102,
        -0.12976686756726193556, -0.22626469396543982008, 0.31525035170919762909,
        0.75113390802109535068, 0.49462389039845308568, 0.11154074335010946362),
    7: (0.00035371379997452024845, -0.0018016407040474909153, 0.00042957797292136652113,
        0.012550998556099840613, -0.016574541630666880654, -0.03802993693501441358,
        0.080612609151083071913, 0.071309219266830264751, -0.22403618499387498264,
        -0.14390600392856497541, 0.46978228740519312247, 0.72913209084623511992,
        0.39653931948191730654, 0.07785205408500917902),
    8: (-0.00011747678412476953373, 0.00067544940645056936637, -0.0003917403733769470463,
        -0.0048703529934515743104, 0.0087460940474057767164, 0.013981027917398281649,
        -0.044088253930794751507, -0.01736930100180754617, 0.12874742662047845886,
        0.00047248457391328277036, -0.28401554296154692652, -0.015829105256349305667,
        0.58535468365420671277, 0.67563073629728980681, 0.31287159091429997066,
        0.054415842243104009955),
    9: (0.000039347320316271599481, -0.00025196318894271013697, 0.00023038576352319596721,
        0.0018476468830562264766, -0.0042815036824634298345, -0.0047232047577513972779,
        0.022361662123679097205, 0.00025094711483145195759, -0.067632829061329973676,
        0.030725681479333379212, 0.14854074933810638014, -0.096840783222976460514,
        -0.29327378327917490881, 0.13319738582500757619, 0.65728807805130053808,
        0.6048231236901111119, 0.24383467461259035373, 0.038077947363878346589),
    10: (-0.000013264202894521244812, 0.000093588670320069591334, -0.00011646685512928545095,
         -0.00068585669495971162656, 0.0019924052951850561172, 0.0013953517470529011658,
         -0.010733175483330575044, 0.0036065535669561696554, 0.03321267405934100174,
         -0.029457536821875812858, -0.071394147166397087145, 0.09305736460357235116,
         0.12736934033579326008, -0.1959462743773770435, -0.24984642432731537942,
         0.28117234366057746075, 0.68845903945360356574, 0.52720118893172558648,
         0.18817680007769148902, 0.026670057900555553587),
    11: (4.4942742772365100954e-6, -0.000034634984186984995541, 0.000054439074699368471674,
         0.00024915252355282349887, -0.00089302325066626461339, -0.00030859285881514316518,
         0.0049284176560590411232, -0.0033408588730144456061, -0.015364820906201599426,
         0.020840904360181063023, 0.031335090219046076031, -0.066438785695025205279,
         -0.046479955116684187272, 0.14981201246637849641, 0.066043588196683191901,
         -0.2742308468179469612, -0.16227524502749036224, 0.41196436894790746293,
         0.68568677491620051112, 0.44989976435604533477, 0.1440670211506245128,
         0.018694297761471084025),
    12: (-1.5290717580685109027e-6, 0.000012776952219379766587, -0.00002424154575703078403,
         -0.000088504109208204324208, 0.00038865306282093144359, 6.5451282125095955665e-6,
         -0.0021795036186277604716, 0.0022486072409952376, 0.0067114990087955091778,
         -0.012840825198300683295, -0.01221864906974828072, 0.041546277495084440739,
         0.010849130255822184381, -0.096432120096507082027, 0.0053595696743521503283,
         0.18247860592757967985, -0.023779257256069727684, -0.31617845375278553686,
         -0.044763885653774626668, 0.51588647842781560876, 0.6571987225793070893,
         0.37735513521421265709, 0.10956627282118515461, 0.013112257957229517507),
}


@dataclass(frozen=True)
class WaveletSpec:
    """Selects a Daubechies filter pair and a decomposition depth."""

    vanishing_moments: int = 6
    decomposition_levels: int = 5
    family: str = "daubechies"
    boundary: str = "periodic"

    def __post_init__(self):
        if self.family != "daubechies":
            raise ValueError(f"unsupported wavelet family: {self.family!r}")
        if self.boundary != "periodic":
            raise ValueError(f"unsupported boundary mode: {self.boundary!r}")
        if self.vanishing_moments not in _DB_LOWPASS:
            raise ValueError(
                f"DB{self.vanishing_moments} not available; "
                f"embedded orders are 1..{max(_DB_LOWPASS)}"
            )
        if self.decomposition_levels < 1:
            raise ValueError("decomposition_levels must be >= 1")

    @property
    def taps(self) -> int:
        return 2 * self.vanishing_moments

    def filters(self) -> tuple[np.ndarray, np.ndarray]:
        """Analysis (lowpass, highpass) pair; highpass is the alternating
        flip of the lowpass, which makes the filter bank orthonormal."""
        lo = np.array(_DB_LOWPASS[self.vanishing_moments], dtype=np.float64)
        signs = np.where(np.arange(lo.size) % 2 == 0, 1.0, -1.0)
        hi = signs * lo[::-1]
        return lo, hi


@dataclass
class WaveletCoefficients:
    """Multilevel decomposition: coarsest approximation + per-level details.

    ``details[0]`` is the finest level; ``details[-1]`` the coarsest.
    ``original_length`` is the pre-pad signal length; the coefficient
    count equals the padded length (= original length when no padding
    was needed).
    """

    approximation: np.ndarray
    details: list = field(default_factory=list)
    spec: WaveletSpec = WaveletSpec()
    original_length: int = 0

    @property
    def padded_length(self) -> int:
        return self.approximation.size * 2 ** len(self.details)

    def coefficient_count(self) -> int:
        return self.approximation.size + sum(d.size for d in self.details)


def _analysis_step(x: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    n = x.size
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(lo.size)[None, :]) % n
    windows = x[idx]
    return windows @ lo, windows @ hi


def _synthesis_step(a: np.ndarray, d: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    n = 2 * a.size
    idx = (2 * np.arange(a.size)[:, None] + np.arange(lo.size)[None, :]) % n
    x = np.zeros(n)
    # adjoint of the analysis gather; add.at accumulates wrapped overlaps
    np.add.at(x, idx, a[:, None] * lo[None, :] + d[:, None] * hi[None, :])
    return x


def _padded_length(n: int, levels: int) -> int:
    if n % (1 << levels) == 0:
        return n
    padded = 1 << (n - 1).bit_length()
    if padded % (1 << levels) != 0:
        raise ValueError(
            f"{levels} levels too deep for length {n}: even the next power "
            f"of two ({padded}) is not divisible by 2**{levels}"
        )
    return padded


def dwt(s, spec: WaveletSpec) -> WaveletCoefficients:
    """Multilevel periodic orthogonal wavelet decomposition."""
    s = as_signal(s, "s")
    padded = _padded_length(s.size, spec.decomposition_levels)
    x = np.concatenate([s, np.zeros(padded - s.size)]) if padded != s.size else s.copy()
    lo, hi = spec.filters()
    details = []
    for _ in range(spec.decomposition_levels):
        x, d = _analysis_step(x, lo, hi)
        details.append(d)
    return WaveletCoefficients(
        approximation=x,
        details=details,
        spec=spec,
        original_length=s.size,
    )


def idwt(c: WaveletCoefficients) -> np.ndarray:
    """Exact inverse of :func:`dwt`; trims any zero pad added there."""
    levels = len(c.details)
    if levels == 0:
        raise ValueError("coefficients hold no detail levels")
    x = np.asarray(c.approximation, dtype=np.float64)
    lo, hi = c.spec.filters()
    for j in range(levels - 1, -1, -1):
        d = np.asarray(c.details[j], dtype=np.float64)
        if d.size != x.size:
            raise ValueError(
                f"detail level {j} has {d.size} coefficients, expected {x.size}"
            )
        x = _synthesis_step(x, d, lo, hi)
    if c.original_length and c.original_length != x.size:
        x = x[: c.original_length]
    return x


def mad_sigma(d) -> float:
    """Robust noise scale: median(|d|) / 0.6745.

    The divisor maps the median absolute deviation of a Gaussian to its
    standard deviation, so outliers barely move the estimate.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.size == 0:
        raise ValueError("cannot estimate scale of an empty sequence")
    if not np.all(np.isfinite(d)):
        raise ValueError("sequence contains non-finite values")
    return float(np.median(np.abs(d)) / 0.6745)


def level_threshold(sigma_j: float, N: int, log_base: str = "e") -> float:
    """Universal threshold sigma_j * sqrt(2 * log N).

    ``log_base`` selects the logarithm ("e", "2", or "10"); the natural
    log is the default and the value used throughout the pipeline.
    """
    if sigma_j < 0:
        raise ValueError("sigma_j must be nonnegative")
    if N < 2:
        raise ValueError("N must be at least 2")
    logs = {"e": math.log, "2": math.log2, "10": math.log10}
    if log_base not in logs:
        raise ValueError(f"log_base must be one of {sorted(logs)}, got {log_base!r}")
    return sigma_j * math.sqrt(2.0 * logs[log_base](N))


def hard_threshold(d, T: float) -> np.ndarray:
    """Zero every coefficient with |value| <= T; keep survivors unmodified."""
    if T < 0:
        raise ValueError("threshold must be nonnegative")
    d = np.asarray(d, dtype=np.float64)
    return np.where(np.abs(d) > T, d, 0.0)


def per_level_sigmas(c: WaveletCoefficients) -> np.ndarray:
    """MAD scale estimate for each detail level, finest first."""
    return np.array([mad_sigma(d) for d in c.details])
