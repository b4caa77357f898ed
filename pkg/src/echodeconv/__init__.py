"""Blind deconvolution of 1D ultrasonic pulse-echo traces.

The package estimates the propagating pulse from the observed trace
alone (third-order statistics, bicepstrum) and then deconvolves the
trace with Fourier-wavelet regularization to sharpen reflector
signatures. A simulation harness and evaluation metrics support
repeatable experiments.
"""

__version__ = "0.1.0"

from echodeconv.deconvolution import (
    ForwardConfig,
    ase_extrapolate,
    deconvolve_pipeline,
    forward_deconvolve,
    wiener_q,
)
from echodeconv.harness import (
    ExperimentGrid,
    ExperimentReport,
    run_deconvolution_comparison,
    run_pulse_mse_sweep,
)
from echodeconv.hosa import HosaConfig, estimate_pulse, gaussianity_test
from echodeconv.metrics import MetricsReport, aligned_mse, isnr_db, metrics_report
from echodeconv.signals import (
    add_noise_at_snr,
    autocovariance_normalized,
    convolve,
    envelope,
    mainlobe_width_at_drop,
    snr_db,
)
from echodeconv.simulate import (
    SimulationConfig,
    generate_pulse,
    generate_reflectivity,
    synthesize_observation,
)
from echodeconv.wavelets import WaveletSpec, dwt, idwt

__all__ = [
    "ExperimentGrid",
    "ExperimentReport",
    "ForwardConfig",
    "HosaConfig",
    "MetricsReport",
    "SimulationConfig",
    "WaveletSpec",
    "add_noise_at_snr",
    "aligned_mse",
    "ase_extrapolate",
    "autocovariance_normalized",
    "convolve",
    "deconvolve_pipeline",
    "dwt",
    "envelope",
    "estimate_pulse",
    "forward_deconvolve",
    "gaussianity_test",
    "generate_pulse",
    "generate_reflectivity",
    "idwt",
    "isnr_db",
    "mainlobe_width_at_drop",
    "metrics_report",
    "run_deconvolution_comparison",
    "run_pulse_mse_sweep",
    "snr_db",
    "synthesize_observation",
    "wiener_q",
    "__version__",
]
