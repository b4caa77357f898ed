"""Command-line driver: synthesis, pulse estimation, deconvolution, experiments.

Every subcommand reads an optional flat key=value config, writes its
outputs into ``--out`` (created on demand), and exits 0 exactly when
all requested files were written. Reruns with identical inputs and
seeds produce byte-identical outputs. Set ECHODECONV_LOG=INFO (or
DEBUG) to see per-file progress on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from echodeconv import __version__
from echodeconv.deconvolution import (
    ForwardConfig,
    deconvolve_pipeline,
    oracle_tau_multiplier,
)
from echodeconv.harness import (
    ExperimentGrid,
    run_deconvolution_comparison,
    run_pulse_mse_sweep,
    trial_seed,
)
from echodeconv.hosa import HosaConfig, estimate_pulse, gaussianity_test
from echodeconv.io_formats import (
    FORMAT_VERSION,
    _atomic_write_text,
    read_run_config,
    read_signal,
    write_json_report,
    write_signal,
    write_table,
)
from echodeconv.metrics import metrics_report
from echodeconv.signals import convolve, snr_db
from echodeconv.simulate import (
    SimulationConfig,
    generate_pulse,
    generate_reflectivity,
    synthesize_observation,
)
from echodeconv.wavelets import WaveletSpec

log = logging.getLogger("echodeconv.cli")

SENTINEL_NAME = "COMPLETE"


def _configure_logging() -> None:
    level_name = os.environ.get("ECHODECONV_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _load_config(path: str | None) -> dict:
    return read_run_config(path) if path else {}


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


_SIM_KEYS = (
    "pulse_length_P",
    "signal_length_N",
    "reflector_density_rho",
    "target_snr_db",
    "rng_seed",
)


def _simulation_config(cfg_map: dict, seed_override: int | None = None) -> SimulationConfig:
    kwargs = {k: cfg_map[k] for k in _SIM_KEYS if k in cfg_map}
    if seed_override is not None:
        kwargs["rng_seed"] = seed_override
    return SimulationConfig(**kwargs)


def _hosa_config(cfg_map: dict) -> HosaConfig:
    keys = ("segment_length", "lag_L", "fft_size", "pulse_length")
    return HosaConfig(**{k: cfg_map[k] for k in keys if k in cfg_map})


def _forward_config(cfg_map: dict) -> ForwardConfig:
    keys = (
        "tau_multiplier",
        "tau_search",
        "threshold_log_base",
        "threshold_scope",
        "level_sigma_rule",
        "burg_order",
    )
    kwargs = {k: cfg_map[k] for k in keys if k in cfg_map}
    levels = cfg_map.get("decomposition_levels", 5)
    kwargs["denoise_wavelet"] = WaveletSpec(
        cfg_map.get("denoise_wavelet_moments", 12), levels
    )
    kwargs["inversion_wavelet"] = WaveletSpec(
        cfg_map.get("inversion_wavelet_moments", 6), levels
    )
    return ForwardConfig(**kwargs)


def _write_sentinel(out: Path, kind: str) -> Path:
    # written last: its presence marks the run complete, so an
    # interrupted run is distinguishable from a finished one
    path = out / SENTINEL_NAME
    _atomic_write_text(
        path, f"complete\nkind={kind}\nformat_version={FORMAT_VERSION}\n"
    )
    return path


def cmd_simulate(args) -> list:
    cfg_map = _load_config(args.config)
    cfg = _simulation_config(cfg_map, args.seed)
    out = _out_dir(args)
    written = []
    try:
        observation, pulse, reflectivity, noise_sigma = synthesize_observation(cfg)
    except ValueError:
        # an all-zero scene has no observation at a finite SNR, but the
        # constituents that do exist are still written before failing
        refl_seed = int(np.random.SeedSequence(cfg.rng_seed).generate_state(2)[0])
        write_signal(out / "pulse.txt", generate_pulse(cfg.pulse_length_P))
        write_signal(
            out / "reflectivity.txt",
            generate_reflectivity(
                cfg.signal_length_N, cfg.reflector_density_rho, refl_seed
            ),
        )
        raise
    clean = convolve(reflectivity, pulse)
    realized = snr_db(clean, observation)
    meta = {"rng_seed": cfg.rng_seed, "target_snr_db": cfg.target_snr_db}
    for name, trace in (
        ("pulse.txt", pulse),
        ("reflectivity.txt", reflectivity),
        ("observation.txt", observation),
    ):
        write_signal(out / name, trace, meta if name == "observation.txt" else None)
        written.append(out / name)
    manifest = {
        "command": "simulate",
        "config": dataclasses.asdict(cfg),
        "noise_sigma": noise_sigma,
        "realized_snr_db": realized,
        "files": ["pulse.txt", "reflectivity.txt", "observation.txt"],
        "version": __version__,
    }
    write_json_report(out / "manifest.json", manifest)
    written.append(out / "manifest.json")
    return written


def cmd_estimate_pulse(args) -> list:
    cfg_map = _load_config(args.config)
    hosa = _hosa_config(cfg_map)
    y, input_meta = read_signal(args.signal)
    est = estimate_pulse(y, hosa)
    out = _out_dir(args)
    write_signal(
        out / "pulse_estimate.txt",
        est.pulse,
        {"description": "estimated pulse, unit energy, peak centered"},
    )
    write_signal(
        out / "cepstrum.txt",
        est.cepstrum,
        {"description": "complex cepstrum, index i holds lag i - (len-1)/2"},
    )
    magnitude = np.abs(np.fft.rfft(est.pulse, hosa.fft_size))
    freqs = np.arange(magnitude.size) / hosa.fft_size
    write_table(
        out / "power_spectrum.csv",
        ("frequency_cycles_per_sample", "magnitude"),
        zip(freqs, magnitude),
    )
    write_json_report(
        out / "diagnostics.json",
        {
            "command": "estimate-pulse",
            "diagnostics": est.diagnostics,
            "hosa_config": dataclasses.asdict(hosa),
            "input_samples": int(y.size),
            "input_metadata": input_meta,
            "version": __version__,
        },
    )
    return [
        out / "pulse_estimate.txt",
        out / "cepstrum.txt",
        out / "power_spectrum.csv",
        out / "diagnostics.json",
    ]


def cmd_deconvolve(args) -> list:
    cfg_map = _load_config(args.config)
    fw_cfg = _forward_config(cfg_map)
    hosa = _hosa_config(cfg_map)
    y, _ = read_signal(args.signal)
    pulse = None if args.blind else read_signal(args.pulse)[0]
    truth = read_signal(args.truth)[0] if args.truth else None

    if fw_cfg.tau_search:
        if truth is None:
            raise ValueError(
                "tau_search picks the regularizer against known truth; supply --truth"
            )
        search_pulse = pulse
        if search_pulse is None:
            search_pulse = estimate_pulse(y, hosa).pulse
        chosen = oracle_tau_multiplier(y, search_pulse, truth, fw_cfg)
        fw_cfg = dataclasses.replace(fw_cfg, tau_multiplier=chosen, tau_search=False)

    result = deconvolve_pipeline(
        y, pulse, args.method, fw_cfg, hosa, keep_intermediates=args.keep_intermediates
    )
    out = _out_dir(args)
    written = []
    write_signal(
        out / "estimate.txt",
        result.reflectivity_estimate,
        {"method": result.method_tag},
    )
    written.append(out / "estimate.txt")
    if args.blind:
        write_signal(
            out / "pulse_used.txt",
            result.pulse_used,
            {"description": "pulse estimated from the observation"},
        )
        written.append(out / "pulse_used.txt")

    intermediate = dict(result.intermediate)
    x_lambda1 = intermediate.pop("x_lambda1", None)
    if x_lambda1 is not None:
        write_signal(out / "x_lambda1.txt", x_lambda1, {"description": "Fourier-stage estimate"})
        written.append(out / "x_lambda1.txt")
    report = {
        "command": "deconvolve",
        "method": result.method_tag,
        "blind": bool(args.blind),
        "forward_config": {
            "tau_multiplier": fw_cfg.tau_multiplier,
            "threshold_log_base": fw_cfg.threshold_log_base,
            "threshold_scope": fw_cfg.threshold_scope,
            "level_sigma_rule": fw_cfg.level_sigma_rule,
            "burg_order": fw_cfg.burg_order,
            "denoise_wavelet_moments": fw_cfg.denoise_wavelet.vanishing_moments,
            "inversion_wavelet_moments": fw_cfg.inversion_wavelet.vanishing_moments,
            "decomposition_levels": fw_cfg.denoise_wavelet.decomposition_levels,
        },
        "intermediate": intermediate,
        "version": __version__,
    }
    if truth is not None:
        report["metrics"] = metrics_report(y, truth, result.reflectivity_estimate)
    write_json_report(out / "report.json", report)
    written.append(out / "report.json")
    return written


def cmd_gaussianity(args) -> list:
    cfg_map = _load_config(args.config)
    y, _ = read_signal(args.signal)
    result = gaussianity_test(
        y,
        segment_length=cfg_map.get("gauss_segment_length", 256),
        alpha=cfg_map.get("alpha", 0.05),
        box_size=cfg_map.get("box_size", 3),
    )
    out = _out_dir(args)
    write_json_report(
        out / "report.json",
        {
            "command": "gaussianity-test",
            "result": result,
            "input_samples": int(y.size),
            "version": __version__,
        },
    )
    return [out / "report.json"]


def _sweep_outputs(out: Path, grid: ExperimentGrid, hosa: HosaConfig) -> list:
    report = run_pulse_mse_sweep(grid, hosa)
    written = []
    write_json_report(
        out / "report.json",
        {
            "kind": report.kind,
            "cells": report.cells,
            "raw_trials": report.raw_trials,
            "provenance": report.provenance,
        },
    )
    written.append(out / "report.json")
    write_table(
        out / "raw_trials.csv",
        ("snr_db", "trial", "seed", "mse", "failed", "error"),
        (
            (r["snr_db"], r["trial"], r["seed"], r["mse"], r["failed"], r["error"])
            for r in report.raw_trials
        ),
    )
    written.append(out / "raw_trials.csv")
    write_table(
        out / "summary.csv",
        ("snr_db", "mean_mse", "sd_mse", "n_success", "n_failed"),
        (
            (c["snr_db"], c["mean"], c["sd"], c["n_success"], c["n_failed"])
            for c in report.cells
        ),
    )
    written.append(out / "summary.csv")
    write_table(
        out / "mse_vs_snr.dat",
        ("snr_db", "mean_mse", "sd_mse"),
        ((c["snr_db"], c["mean"], c["sd"]) for c in report.cells),
        sep=" ",
    )
    written.append(out / "mse_vs_snr.dat")

    # representative overlay of true vs estimated pulse (trial 0 at the
    # first SNR), both at unit energy for direct visual comparison
    cfg0 = dataclasses.replace(
        grid.base_config,
        target_snr_db=float(grid.snr_levels_db[0]),
        rng_seed=trial_seed(grid.master_seed, 0),
    )
    y, h_true, _, _ = synthesize_observation(cfg0)
    est = estimate_pulse(y, hosa)
    h_unit = h_true / np.linalg.norm(h_true)
    n_rows = max(h_unit.size, est.pulse.size)
    rows = (
        (
            i,
            h_unit[i] if i < h_unit.size else None,
            est.pulse[i] if i < est.pulse.size else None,
        )
        for i in range(n_rows)
    )
    write_table(out / "pulse_overlay.dat", ("index", "pulse_true", "pulse_estimate"), rows, sep=" ")
    written.append(out / "pulse_overlay.dat")
    return written


def _comparison_outputs(out: Path, args, cfg_map: dict) -> list:
    cfg = _simulation_config(cfg_map, args.seed)
    methods = tuple(cfg_map.get("methods", ("WienerQ", "ForWaRD")))
    report = run_deconvolution_comparison(
        cfg,
        methods=methods,
        forward_config=_forward_config(cfg_map),
        blind=cfg_map.get("blind", True),
        hosa_cfg=_hosa_config(cfg_map),
    )
    written = []
    write_json_report(
        out / "report.json",
        {"kind": report.kind, "cells": report.cells, "provenance": report.provenance},
    )
    written.append(out / "report.json")
    write_table(
        out / "metrics.csv",
        (
            "method",
            "mse",
            "isnr_db",
            "width_before_samples",
            "width_after_samples",
            "axial_resolution_gain",
        ),
        (
            (
                c["method"],
                c["mse"],
                c["isnr_db"],
                c["width_before_samples"],
                c["width_after_samples"],
                c["axial_resolution_gain"],
            )
            for c in report.cells
        ),
    )
    written.append(out / "metrics.csv")
    traces = report.traces
    estimate_columns = [f"estimate_{m}" for m in methods]
    n = traces["observation"].size
    rows = (
        (
            i,
            traces["observation"][i],
            traces["reflectivity_truth"][i],
            *(traces["estimates"][m][i] for m in methods),
        )
        for i in range(n)
    )
    write_table(
        out / "traces.dat",
        ("index", "observation", "reflectivity_truth", *estimate_columns),
        rows,
        sep=" ",
    )
    written.append(out / "traces.dat")
    p_true, p_used = traces["pulse_true"], traces["pulse_used"]
    n_rows = max(p_true.size, p_used.size)
    rows = (
        (
            i,
            p_true[i] if i < p_true.size else None,
            p_used[i] if i < p_used.size else None,
        )
        for i in range(n_rows)
    )
    write_table(out / "pulses.dat", ("index", "pulse_true", "pulse_used"), rows, sep=" ")
    written.append(out / "pulses.dat")
    return written


def cmd_experiment(args) -> list:
    cfg_map = _load_config(args.config)
    kind = cfg_map.get("experiment_kind", "pulse_mse_sweep")
    out = _out_dir(args)
    sentinel = out / SENTINEL_NAME
    if sentinel.exists():
        sentinel.unlink()  # a rerun is incomplete until it finishes again
    if kind == "pulse_mse_sweep":
        grid_kwargs: dict = {"base_config": _simulation_config(cfg_map)}
        for key in ("snr_levels_db", "trials", "master_seed", "methods"):
            if key in cfg_map:
                grid_kwargs[key] = cfg_map[key]
        if args.seed is not None:
            grid_kwargs["master_seed"] = args.seed
        written = _sweep_outputs(out, ExperimentGrid(**grid_kwargs), _hosa_config(cfg_map))
    elif kind == "deconvolution_comparison":
        written = _comparison_outputs(out, args, cfg_map)
    else:
        raise ValueError(
            f"unknown experiment_kind {kind!r}; "
            "valid kinds: pulse_mse_sweep, deconvolution_comparison"
        )
    written.append(_write_sentinel(out, kind))
    return written


def cmd_metrics(args) -> list:
    y, _ = read_signal(args.observation)
    x_true, _ = read_signal(args.truth)
    x_est, _ = read_signal(args.estimate)
    report = metrics_report(y, x_true, x_est)
    out = _out_dir(args)
    write_json_report(
        out / "metrics.json",
        {"command": "metrics", "metrics": report, "version": __version__},
    )
    return [out / "metrics.json"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echodeconv",
        description="Blind deconvolution of 1D ultrasonic pulse-echo traces.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed: bool = True):
        p.add_argument("--config", help="flat key=value run config file")
        p.add_argument("--out", required=True, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, help="override the config's seed")

    p = sub.add_parser("simulate", help="synthesize a pulse-echo scene")
    common(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("estimate-pulse", help="blind pulse estimate from a trace")
    p.add_argument("signal", help="observation signal file")
    common(p, seed=False)
    p.set_defaults(handler=cmd_estimate_pulse)

    p = sub.add_parser("deconvolve", help="recover reflectivity from a trace")
    p.add_argument("signal", help="observation signal file")
    p.add_argument("pulse", nargs="?", help="pulse signal file (omit with --blind)")
    p.add_argument("--method", default="ForWaRD", help="deconvolution method tag")
    p.add_argument("--blind", action="store_true", help="estimate the pulse first")
    p.add_argument("--truth", help="ground-truth reflectivity for metrics")
    p.add_argument(
        "--keep-intermediates", action="store_true", help="write stage-by-stage traces"
    )
    common(p, seed=False)
    p.set_defaults(handler=cmd_deconvolve)

    p = sub.add_parser("gaussianity-test", help="bispectrum-based Gaussianity screen")
    p.add_argument("signal", help="signal file to test")
    common(p, seed=False)
    p.set_defaults(handler=cmd_gaussianity)

    p = sub.add_parser("experiment", help="run a Monte-Carlo grid from a config")
    common(p)
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser("metrics", help="score an estimate against known truth")
    p.add_argument("observation", help="observation signal file")
    p.add_argument("truth", help="ground-truth reflectivity signal file")
    p.add_argument("estimate", help="estimated reflectivity signal file")
    common(p, seed=False)
    p.set_defaults(handler=cmd_metrics)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "deconvolve":
        if args.pulse is None and not args.blind:
            parser.error("a pulse file is required unless --blind is given")
        if args.pulse is not None and args.blind:
            parser.error("give a pulse file or --blind, not both")
    try:
        written = args.handler(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        log.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
