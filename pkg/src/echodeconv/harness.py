"""Monte-Carlo studies: pulse-estimation MSE sweeps and method comparisons.

Every trial's seed is derived from the master seed and the trial index
alone, so trials are reproducible independently of execution order, and
the same reflectivity/noise draws are reused across SNR rows (a paired
design: row differences are not confounded by draw differences).

Failed trials are recorded with their error text rather than dropped;
aggregates are computed over the successes and carry the failure count.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from echodeconv import __version__
from echodeconv.deconvolution import (
    METHODS,
    ForwardConfig,
    deconvolve_pipeline,
    oracle_tau_multiplier,
)
from echodeconv.hosa import HosaConfig, estimate_pulse
from echodeconv.metrics import MetricsReport, aligned_mse, metrics_report
from echodeconv.simulate import SimulationConfig, synthesize_observation


@dataclass(frozen=True)
class ExperimentGrid:
    """Sweep layout: SNR rows x trials, on a common base scenario."""

    snr_levels_db: tuple = (14.0, 10.0, 7.0)
    trials: int = 50
    base_config: SimulationConfig = SimulationConfig()
    methods: tuple = ("WienerQ", "ForWaRD")
    master_seed: int = 1234

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if len(self.snr_levels_db) == 0:
            raise ValueError("snr_levels_db must not be empty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(
                f"unknown methods {unknown}; valid methods: {', '.join(METHODS)}"
            )


@dataclass
class ExperimentReport:
    """Aggregates, raw per-trial values, and full provenance for one study."""

    kind: str
    cells: list = field(default_factory=list)
    raw_trials: list = field(default_factory=list)
    traces: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)


def trial_seed(master_seed: int, trial: int) -> int:
    """Deterministic per-trial seed from the master seed and trial index."""
    return int(np.random.SeedSequence([master_seed, trial]).generate_state(1)[0])


def _aggregate(values: list) -> tuple[float, float, bool]:
    # sample SD (ddof=1); a single success has no spread to estimate
    if len(values) == 1:
        return float(values[0]), 0.0, True
    arr = np.asarray(values)
    return float(arr.mean()), float(arr.std(ddof=1)), False


def run_pulse_mse_sweep(
    grid: ExperimentGrid, hosa_cfg: HosaConfig | None = None
) -> ExperimentReport:
    """Pulse-estimation error versus SNR over repeated random scenes.

    For each SNR row, ``grid.trials`` observations are synthesized (fresh
    reflectivity and noise per trial), the pulse is estimated from each
    observation's third-order statistics, and the aligned MSE against the
    true pulse is aggregated to mean and sample SD.
    """
    if hosa_cfg is None:
        hosa_cfg = HosaConfig()
    report = ExperimentReport(kind="pulse_mse_sweep")
    seeds = [trial_seed(grid.master_seed, t) for t in range(grid.trials)]
    for snr in grid.snr_levels_db:
        values = []
        n_failed = 0
        for t, seed in enumerate(seeds):
            cfg = dataclasses.replace(
                grid.base_config, target_snr_db=float(snr), rng_seed=seed
            )
            row = {"snr_db": float(snr), "trial": t, "seed": seed,
                   "mse": None, "error": None, "failed": False}
            try:
                y, h_true, x_true, noise_sigma = synthesize_observation(cfg)
                estimate = estimate_pulse(y, hosa_cfg)
                mse, _ = aligned_mse(h_true, estimate.pulse)
                row["mse"] = mse
                values.append(mse)
            except (ValueError, FloatingPointError) as exc:
                row["error"] = str(exc)
                row["failed"] = True
                n_failed += 1
            report.raw_trials.append(row)
        mean, sd, degenerate = _aggregate(values) if values else (math.nan, math.nan, True)
        report.cells.append({
            "snr_db": float(snr),
            "metric": "aligned_pulse_mse",
            "mean": mean,
            "sd": sd,
            "n_success": len(values),
            "n_failed": n_failed,
            "degenerate_sample": degenerate,
        })
    report.provenance = {
        "kind": "pulse_mse_sweep",
        "master_seed": grid.master_seed,
        "trials": grid.trials,
        "snr_levels_db": [float(s) for s in grid.snr_levels_db],
        "base_config": dataclasses.asdict(grid.base_config),
        "hosa_config": dataclasses.asdict(hosa_cfg),
        "version": __version__,
    }
    return report


def run_deconvolution_comparison(
    cfg: SimulationConfig,
    methods: tuple = ("WienerQ", "ForWaRD"),
    forward_config: ForwardConfig | None = None,
    blind: bool = True,
    hosa_cfg: HosaConfig | None = None,
) -> ExperimentReport:
    """All requested methods on one synthesized scene, fully instrumented.

    With ``blind`` set (the default) the pulse is first estimated from the
    observation and every method runs with that same estimate; otherwise
    the true pulse is handed to the methods directly. When the forward
    config asks for ``tau_search`` the multiplier is picked per scene by
    the oracle grid (simulation has the ground truth to judge against).
    """
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(
            f"unknown methods {unknown}; valid methods: {', '.join(METHODS)}"
        )
    if forward_config is None:
        forward_config = ForwardConfig()
    y, h_true, x_true, noise_sigma = synthesize_observation(cfg)
    if blind:
        pulse = estimate_pulse(y, hosa_cfg if hosa_cfg is not None else HosaConfig()).pulse
    else:
        pulse = h_true
    if forward_config.tau_search:
        best = oracle_tau_multiplier(y, pulse, x_true, forward_config)
        forward_config = dataclasses.replace(forward_config, tau_multiplier=best)

    report = ExperimentReport(kind="deconvolution_comparison")
    report.traces = {
        "observation": y,
        "pulse_true": h_true,
        "pulse_used": pulse,
        "reflectivity_truth": x_true,
        "estimates": {},
    }
    for method in methods:
        result = deconvolve_pipeline(y, pulse, method=method, cfg=forward_config)
        est = result.reflectivity_estimate
        m = metrics_report(y, x_true, est)
        report.traces["estimates"][method] = est
        report.cells.append({
            "method": method,
            "mse": m.mse,
            "isnr_db": m.isnr_db,
            "width_before_samples": m.width_before_samples,
            "width_after_samples": m.width_after_samples,
            "axial_resolution_gain": m.axial_resolution_gain,
        })
    report.provenance = {
        "kind": "deconvolution_comparison",
        "blind": blind,
        "methods": list(methods),
        "simulation_config": dataclasses.asdict(cfg),
        "forward_config": {
            k: v for k, v in dataclasses.asdict(forward_config).items()
            if not isinstance(v, dict)
        } | {
            "denoise_wavelet_moments": forward_config.denoise_wavelet.vanishing_moments,
            "inversion_wavelet_moments": forward_config.inversion_wavelet.vanishing_moments,
            "decomposition_levels": forward_config.denoise_wavelet.decomposition_levels,
        },
        "noise_sigma": noise_sigma,
        "version": __version__,
    }
    return report
