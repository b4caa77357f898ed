"""Plain-text signal files, key=value run configs, and report emission.

Signal files carry one real sample per line, optionally preceded by
``#key=value`` comment lines with metadata. Run configs are flat
``key=value`` text with a fixed vocabulary. JSON reports are UTF-8 with
lower_snake_case keys and a mandatory format_version field. Every
writer goes through write-then-rename, so an interrupted run never
leaves a truncated file under its final name.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

FORMAT_VERSION = "1.0"


def _atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a same-directory temp file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _format_float(v: float) -> str:
    # .17g round-trips doubles exactly and keeps reruns byte-identical
    return format(float(v), ".17g")


def write_signal(path, samples, metadata: dict | None = None) -> None:
    """Write a signal file: ``#key=value`` header lines, one sample per line.

    Parameters
    ----------
    path : path-like
        Destination file.
    samples : array_like
        Finite real samples, at least one.
    metadata : dict, optional
        Header entries; values are stringified.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1 or samples.size == 0:
        raise ValueError("a signal file needs a 1-D array with at least one sample")
    if not np.all(np.isfinite(samples)):
        raise ValueError("signal contains non-finite samples")
    lines = []
    for key, value in (metadata or {}).items():
        if "=" in str(key):
            raise ValueError(f"metadata key {key!r} may not contain '='")
        if "\n" in str(value):
            raise ValueError(f"metadata value for {key!r} must be a single line")
        lines.append(f"#{key}={value}")
    lines.extend(_format_float(v) for v in samples)
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_signal(path) -> tuple[np.ndarray, dict]:
    """Read a signal file written by :func:`write_signal` (or by hand).

    Returns ``(samples, metadata)``. Comment lines anywhere in the file
    are accepted; those of the form ``#key=value`` land in the metadata
    dict. A line that is neither a comment, blank, nor a finite real
    raises with its 1-based line number.
    """
    samples: list[float] = []
    metadata: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    metadata[key.strip()] = value.strip()
                continue
            try:
                value = float(line)
            except ValueError:
                raise ValueError(
                    f"{path}: line {lineno}: not a real number: {line!r}"
                ) from None
            if not math.isfinite(value):
                raise ValueError(f"{path}: line {lineno}: non-finite sample: {line!r}")
            samples.append(value)
    if not samples:
        raise ValueError(f"{path}: no samples (a signal file needs at least one)")
    return np.array(samples, dtype=np.float64), metadata


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


def _parse_str_list(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


# Full key vocabulary of the flat run-config format. Values are parsed
# eagerly so a bad value fails at read time with the offending key.
RUN_CONFIG_SCHEMA: dict = {
    # synthetic scene
    "pulse_length_P": int,
    "signal_length_N": int,
    "reflector_density_rho": float,
    "target_snr_db": float,
    "rng_seed": int,
    # pulse estimation (third-order statistics)
    "segment_length": int,
    "lag_L": int,
    "fft_size": int,
    "pulse_length": int,
    # wavelet stage
    "denoise_wavelet_moments": int,
    "inversion_wavelet_moments": int,
    "decomposition_levels": int,
    # Fourier-wavelet deconvolution
    "tau_multiplier": float,
    "tau_search": _parse_bool,
    "threshold_log_base": str,
    "threshold_scope": str,
    "level_sigma_rule": str,
    "burg_order": int,
    # gaussianity screen
    "gauss_segment_length": int,
    "alpha": float,
    "box_size": int,
    # experiment grids
    "experiment_kind": str,
    "snr_levels_db": _parse_float_list,
    "trials": int,
    "master_seed": int,
    "methods": _parse_str_list,
    "blind": _parse_bool,
}


def read_run_config(path) -> dict:
    """Parse a flat ``key=value`` config file against the fixed vocabulary.

    Blank lines and ``#`` comments are skipped. Unknown or repeated keys
    are rejected by name; values are converted per the schema. Only the
    keys present in the file appear in the result, so callers can layer
    their own defaults.
    """
    resolved: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(
                    f"{path}: line {lineno}: expected key=value, got {line!r}"
                )
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in RUN_CONFIG_SCHEMA:
                raise ValueError(f"{path}: line {lineno}: unknown config key {key!r}")
            if key in resolved:
                raise ValueError(f"{path}: line {lineno}: repeated config key {key!r}")
            try:
                resolved[key] = RUN_CONFIG_SCHEMA[key](value.strip())
            except ValueError as exc:
                raise ValueError(
                    f"{path}: line {lineno}: bad value for {key!r}: {exc}"
                ) from None
    return resolved


def _jsonable(obj):
    """Recursively convert report payloads to plain JSON types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float):
        # strict JSON has no inf/nan tokens; encode them as strings
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json_report(path, payload: dict) -> None:
    """Write a JSON report with the mandatory format_version field.

    Keys are sorted and numpy values converted, so identical payloads
    produce identical bytes.
    """
    body = dict(_jsonable(payload))
    body.setdefault("format_version", FORMAT_VERSION)
    text = json.dumps(body, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False)
    _atomic_write_text(path, text + "\n")


def read_json_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _cell_text(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return _format_float(value)
    if value is None:
        return ""
    return str(value)


def write_table(path, header, rows, sep: str = ",") -> None:
    """Write tabular plot data: CSV when ``sep`` is a comma, else a
    whitespace table whose header line is a ``#`` comment (the form
    gnuplot reads directly)."""
    header = list(header)
    lines = []
    if sep == ",":
        lines.append(sep.join(header))
    else:
        lines.append("# " + sep.join(header))
    for row in rows:
        row = list(row)
        if len(row) != len(header):
            raise ValueError(
                f"row width {len(row)} does not match header width {len(header)}"
            )
        lines.append(sep.join(_cell_text(v) for v in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")
