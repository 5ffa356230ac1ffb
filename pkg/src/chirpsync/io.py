"""Signal files and plot-ready CSV/JSON output.

A signal file is raw little-endian float64 interleaved I/Q with a JSON
sidecar ``<name>.json`` holding ``sample_rate_hz``, ``n_samples`` and
``t0_s``.
"""

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .waveform import ComplexSignal

IQ_DTYPE = np.dtype("<f8")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_iq(path, sig: ComplexSignal) -> Path:
    path = Path(path)
    interleaved = np.empty(2 * sig.n_samples, dtype=IQ_DTYPE)
    interleaved[0::2] = sig.samples.real
    interleaved[1::2] = sig.samples.imag
    path.write_bytes(interleaved.tobytes())
    meta = {"sample_rate_hz": sig.sample_rate, "n_samples": sig.n_samples, "t0_s": sig.t0}
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def read_iq(path) -> ComplexSignal:
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text())
    raw = np.frombuffer(path.read_bytes(), dtype=IQ_DTYPE)
    if raw.size % 2:
        raise ValueError(f"{path}: odd number of float64 values, not interleaved I/Q")
    samples = raw[0::2] + 1j * raw[1::2]
    if samples.size != int(meta["n_samples"]):
        raise ValueError(
            f"{path}: sidecar says {meta['n_samples']} samples, file holds {samples.size}"
        )
    return ComplexSignal(samples, float(meta["sample_rate_hz"]), float(meta.get("t0_s", 0.0)))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return v


def signal_csv(path, sig: ComplexSignal) -> Path:
    return write_csv(path, ("t", "re", "im"), zip(sig.times, sig.samples.real, sig.samples.imag))


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def dumps(obj) -> str:
    """Compact JSON; infinities become null."""
    return json.dumps(_finite(obj), default=_json_default, sort_keys=False)


def _finite(obj):
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return None
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj) + "\n")
    return path
