"""Satellite/HAPS CDMA-BPSK waveform synthesis.

Pipeline: spread a seeded navigation bit stream with the C/A code at the
chipping rate, resample to the working rate, mix onto the intermediate
frequency, delay each path relative to the smallest initial delay, multiply
by the channel coefficients, and sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import prn
from .channel import ChannelSet, propagate_and_sum
from .dsp import SignalBuffer, add_awgn, mix_carrier, resample

SATELLITE_DEFAULTS = dict(f_s_hz=38.192e6, f_if_hz=9.548e6, r_c_hz=1.023e6)
HAPS_DEFAULTS = dict(f_s_hz=38.192e6, f_if_hz=15e6, r_c_hz=10.23e6)


@dataclass(frozen=True)
class CdmaGenConfig:
    f_s_hz: float = 38.192e6
    f_if_hz: float = 9.548e6
    r_c_hz: float = 1.023e6
    t_d_s: float = 0.020  # navigation bit duration
    duration_s: float = 0.001
    sources: tuple[tuple[int, str], ...] = ()  # (prn_id, source_id)
    data_seed: int = 0
    modulate_data: bool = True
    noise_power_dbw: float = -math.inf
    noise_seed: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(tuple(s) for s in self.sources))
        # the complex working rate must hold the carrier and give the code at
        # least two samples per chip; outer code sidelobes are allowed to wrap
        # (the stock HAPS parameter set is deliberately marginal this way)
        if abs(self.f_if_hz) >= self.f_s_hz / 2.0:
            raise ValueError("f_if_hz must lie inside the complex Nyquist band")
        if self.r_c_hz > self.f_s_hz / 2.0:
            raise ValueError("r_c_hz must not exceed f_s_hz / 2")
        code_period = prn.CODE_LENGTH / self.r_c_hz
        ratio = self.t_d_s / code_period
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("t_d_s must be an integer multiple of the code period")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")

    @property
    def n_samples(self) -> int:
        return round(self.f_s_hz * self.duration_s)


def _data_bits(cfg: CdmaGenConfig, prn_id: int, n_bits: int) -> np.ndarray:
    rng = np.random.default_rng((cfg.data_seed, prn_id))
    return 1.0 - 2.0 * rng.integers(0, 2, n_bits).astype(np.float64)


# Chip-stream oversampling ahead of the rate-conversion stage.  One sample
# per chip would confine the code to +/-R_c/2 before the anti-alias filter;
# 5 samples per chip keeps the main lobe (about the 2 MHz channel bandwidth
# typically budgeted for these signals).  Odd so chips stay centered on
# their nominal instants and no code-phase bias is introduced.
CHIP_OVERSAMPLING = 5


def generate_clean_signal(code: prn.SpreadingCode, cfg: CdmaGenConfig) -> SignalBuffer:
    """Undistorted complex signal at the intermediate frequency for one source."""
    if code.chipping_rate_hz != cfg.r_c_hz:
        raise ValueError("code chipping rate does not match the config")
    n_chips = math.ceil(cfg.duration_s * cfg.r_c_hz)
    reps = math.ceil((n_chips + 1) / prn.CODE_LENGTH)
    chips = np.tile(code.chips, reps)[:n_chips + 1]
    if cfg.modulate_data:
        chips_per_bit = round(cfg.t_d_s * cfg.r_c_hz)
        bits = _data_bits(cfg, code.prn_id, math.ceil((n_chips + 1) / chips_per_bit))
        chips = chips * np.repeat(bits, chips_per_bit)[:n_chips + 1]
    over = CHIP_OVERSAMPLING
    idx = (np.arange(n_chips * over) + (over - 1) // 2) // over
    stream = chips[idx]
    baseband = resample(SignalBuffer(stream.astype(np.complex128), over * cfg.r_c_hz),
                        cfg.f_s_hz)
    n = cfg.n_samples
    samples = baseband.samples
    if len(samples) < n:
        samples = np.pad(samples, (0, n - len(samples)))
    buf = SignalBuffer(samples[:n], cfg.f_s_hz)
    return mix_carrier(buf, cfg.f_if_hz)


def apply_channel_and_sum(clean: dict[str, SignalBuffer], channels: ChannelSet,
                          cfg: CdmaGenConfig,
                          d_min_s: float | None = None) -> SignalBuffer:
    """Delay each path relative to D_min, multiply by coefficients, sum."""
    out = propagate_and_sum(clean, channels, d_min_s=d_min_s)
    if len(out) != cfg.n_samples:
        raise ValueError("clean signals do not match the configured duration")
    return out


def synthesize(cfg: CdmaGenConfig, channels: ChannelSet,
               d_min_s: float | None = None) -> SignalBuffer:
    """Full pipeline: clean signals per source, channel application, optional noise."""
    if not cfg.sources:
        raise ValueError("config lists no sources")
    clean = {}
    for prn_id, source_id in cfg.sources:
        code = prn.generate_ca_code(prn_id, chipping_rate_hz=cfg.r_c_hz)
        clean[source_id] = generate_clean_signal(code, cfg)
    out = apply_channel_and_sum(clean, channels, cfg, d_min_s=d_min_s)
    return add_awgn(out, cfg.noise_power_dbw, cfg.noise_seed)
