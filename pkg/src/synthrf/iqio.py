"""I/Q recording files with a text metadata sidecar.

Samples are packed little-endian interleaved (I, Q), either float32 or
int16 with an explicit full-scale value recorded in the sidecar.  The
sidecar is a JSON file with the same basename as the recording.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dsp import SignalBuffer

FORMATS = ("f32", "i16")
DEFAULT_I16_FULL_SCALE = 8.0


def sidecar_path(iq_path) -> Path:
    return Path(iq_path).with_suffix(".json")


def write_iq(path, buf: SignalBuffer, metadata: dict | None = None,
             fmt: str = "f32", i16_full_scale: float = DEFAULT_I16_FULL_SCALE) -> Path:
    """Write samples and the sidecar; returns the sidecar path."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    path = Path(path)
    interleaved = np.empty(2 * len(buf), dtype=np.float64)
    interleaved[0::2] = buf.samples.real
    interleaved[1::2] = buf.samples.imag
    if fmt == "f32":
        raw = interleaved.astype("<f4")
    else:
        scaled = np.clip(interleaved / i16_full_scale, -1.0, 1.0)
        raw = np.round(scaled * 32767.0).astype("<i2")
    path.write_bytes(raw.tobytes())
    meta = {
        "format": fmt,
        "sample_rate_hz": buf.sample_rate_hz,
        "if_offset_hz": buf.if_offset_hz,
        "epoch_s": buf.epoch_s,
        "n_samples": len(buf),
        "duration_s": buf.duration_s,
    }
    if fmt == "i16":
        meta["full_scale"] = i16_full_scale
    if metadata:
        meta.update(metadata)
    side = sidecar_path(path)
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return side


def read_iq(path) -> tuple[SignalBuffer, dict]:
    """Read a recording and its sidecar back into a SignalBuffer."""
    path = Path(path)
    side = sidecar_path(path)
    if not side.exists():
        raise FileNotFoundError(f"missing sidecar {side}")
    meta = json.loads(side.read_text())
    fmt = meta.get("format", "f32")
    raw = path.read_bytes()
    if fmt == "f32":
        interleaved = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    elif fmt == "i16":
        scale = float(meta.get("full_scale", DEFAULT_I16_FULL_SCALE))
        interleaved = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0 * scale
    else:
        raise ValueError(f"unknown format {fmt!r} in sidecar")
    samples = interleaved[0::2] + 1j * interleaved[1::2]
    buf = SignalBuffer(samples, float(meta["sample_rate_hz"]),
                       if_offset_hz=float(meta.get("if_offset_hz", 0.0)),
                       epoch_s=float(meta.get("epoch_s", 0.0)))
    return buf, meta
