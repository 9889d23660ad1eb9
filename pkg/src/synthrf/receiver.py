"""Software receiver: parallel code phase search acquisition, fine frequency
estimation, and conventional DLL/PLL tracking."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len

from .dsp import SignalBuffer, fft_correlate
from .prn import CODE_LENGTH, SpreadingCode


@dataclass(frozen=True)
class AcquisitionConfig:
    freq_search_min_hz: float = -5000.0
    freq_search_max_hz: float = 5000.0
    freq_step_hz: float = 500.0
    snr_threshold_db: float = 25.0
    coherent_ms: float = 1.0
    fine_freq_ms: float = 10.0
    keep_surface: bool = False

    def __post_init__(self):
        if self.freq_step_hz <= 0:
            raise ValueError("freq_step_hz must be positive")
        if self.freq_search_min_hz >= self.freq_search_max_hz:
            raise ValueError("freq_search_min_hz must be below freq_search_max_hz")
        if self.coherent_ms > self.fine_freq_ms:
            raise ValueError("coherent_ms must not exceed fine_freq_ms")


@dataclass
class AcquisitionResult:
    prn_id: int
    acquired: bool
    code_phase_samples: int
    coarse_freq_hz: float
    fine_freq_hz: float
    snr_db: float
    noise_lag_count: int = 0
    correlation_surface: np.ndarray | None = None


@dataclass(frozen=True)
class TrackingConfig:
    dll_bw_hz: float = 2.0
    pll_bw_hz: float = 10.0
    correlator_spacing_chips: float = 0.5
    integration_ms: float = 1.0
    damping: float = 0.707
    carrier_aiding: bool = False
    carrier_freq_hz: float = 1575.42e6  # used only when carrier aiding is on
    lock_floor_fraction: float = 0.01
    lock_loss_epochs: int = 50

    def __post_init__(self):
        if min(self.dll_bw_hz, self.pll_bw_hz, self.integration_ms,
               self.damping, self.correlator_spacing_chips) <= 0:
            raise ValueError("tracking parameters must be positive")
        if self.correlator_spacing_chips > 1.0:
            raise ValueError("correlator spacing must not exceed one chip")


@dataclass
class TrackingTrace:
    epoch_s: np.ndarray
    code_delay_samples: np.ndarray
    doppler_hz: np.ndarray
    prompt_i: np.ndarray
    prompt_q: np.ndarray
    dll_discriminator: np.ndarray
    pll_discriminator: np.ndarray
    loss_of_lock: bool = False

    def __len__(self) -> int:
        return len(self.epoch_s)


def sample_code_replica(code: SpreadingCode, sample_rate_hz: float,
                        n_samples: int, shift_samples: float = 0.0) -> np.ndarray:
    """Code chips sampled at the signal rate, optionally delayed by samples."""
    step = code.chipping_rate_hz / sample_rate_hz
    # chip pulses are centered on the chip instants after bandlimited
    # reconstruction, so round rather than floor the chip position
    idx = np.floor((np.arange(n_samples) - shift_samples) * step + 0.5).astype(np.int64)
    return code.chips[idx % CODE_LENGTH]


def samples_per_chip(code: SpreadingCode, sample_rate_hz: float) -> int:
    return int(round(sample_rate_hz / code.chipping_rate_hz))


def acquire(buf: SignalBuffer, code: SpreadingCode,
            cfg: AcquisitionConfig = AcquisitionConfig()) -> AcquisitionResult:
    """Parallel code phase search over the Doppler grid with the SNR gate.

    The search surface holds correlation power per (Doppler bin, code lag).
    The SNR gate is the ratio of the squared surface peak to the mean of the
    squared surface values along the peak's frequency row, excluding lags
    within one chip of the peak.
    """
    f_s = buf.sample_rate_hz
    n = round(f_s * cfg.coherent_ms * 1e-3)
    if len(buf) < n:
        raise ValueError("buffer shorter than the coherent integration length")
    seg = buf.samples[:n]
    replica_fft = np.conj(np.fft.fft(sample_code_replica(code, f_s, n)))
    n_bins = int(round((cfg.freq_search_max_hz - cfg.freq_search_min_hz)
                       / cfg.freq_step_hz)) + 1
    freqs = cfg.freq_search_min_hz + cfg.freq_step_hz * np.arange(n_bins)
    t = np.arange(n) / f_s
    surface = np.empty((n_bins, n))
    for i, f in enumerate(freqs):
        wiped = seg * np.exp(-2j * np.pi * (buf.if_offset_hz + f) * t)
        corr = np.fft.ifft(np.fft.fft(wiped) * replica_fft)
        surface[i] = np.abs(corr) ** 2
    bin_idx, tau = np.unravel_index(np.argmax(surface), surface.shape)
    n_s = samples_per_chip(code, f_s)
    lags = np.arange(n)
    dist = np.minimum((lags - tau) % n, (tau - lags) % n)
    noise = surface[bin_idx][dist >= n_s]
    snr_db = 10.0 * np.log10(surface[bin_idx, tau] ** 2 / np.mean(noise ** 2))
    acquired = bool(snr_db >= cfg.snr_threshold_db)
    result = AcquisitionResult(
        prn_id=code.prn_id, acquired=acquired, code_phase_samples=int(tau),
        coarse_freq_hz=float(freqs[bin_idx]), fine_freq_hz=math.nan,
        snr_db=float(snr_db), noise_lag_count=int(len(noise)),
        correlation_surface=surface if cfg.keep_surface else None)
    if acquired and len(buf) >= round(f_s * cfg.fine_freq_ms * 1e-3):
        result.fine_freq_hz = fine_frequency(buf, code, result.code_phase_samples,
                                             result.coarse_freq_hz, cfg)
    return result


def fine_frequency(buf: SignalBuffer, code: SpreadingCode, tau_samples: int,
                   coarse_hz: float,
                   cfg: AcquisitionConfig = AcquisitionConfig()) -> float:
    """Refine the Doppler shift by transforming the code-wiped carrier."""
    f_s = buf.sample_rate_hz
    n = round(f_s * cfg.fine_freq_ms * 1e-3)
    if len(buf) < n:
        raise ValueError("buffer shorter than the fine-frequency length")
    if not 0 <= tau_samples < len(buf):
        raise ValueError("tau_samples out of range")
    wiped = buf.samples[:n] * sample_code_replica(code, f_s, n, tau_samples)
    nfft = next_fast_len(4 * n)
    spectrum = np.abs(np.fft.fft(wiped, nfft))
    freqs = np.fft.fftfreq(nfft, 1.0 / f_s)
    center = buf.if_offset_hz + coarse_hz
    band = np.abs(freqs - center) <= cfg.freq_step_hz
    idx = np.flatnonzero(band)
    peak = idx[np.argmax(spectrum[idx])]
    return float(freqs[peak] - buf.if_offset_hz)


def _loop_gains(bw_hz: float, damping: float, gain: float) -> tuple[float, float]:
    """Natural-frequency form of the second-order loop filter constants."""
    wn = bw_hz * 8.0 * damping / (4.0 * damping ** 2 + 1.0)
    return gain / (wn * wn), 2.0 * damping / wn


def dll_discriminator(i_e: float, q_e: float, i_l: float, q_l: float) -> float:
    """Normalized early-minus-late power discriminator."""
    e = math.hypot(i_e, q_e)
    l = math.hypot(i_l, q_l)
    if e + l == 0.0:
        return 0.0
    return (e - l) / (e + l)


def pll_discriminator(i_p: float, q_p: float) -> float:
    """Costas arctangent discriminator, in cycles."""
    if i_p == 0.0:
        return 0.0
    return math.atan(q_p / i_p) / (2.0 * np.pi)


def track(buf: SignalBuffer, code: SpreadingCode, init: AcquisitionResult,
          cfg: TrackingConfig = TrackingConfig()) -> TrackingTrace:
    """Conventional code/carrier tracking loop producing per-epoch traces.

    The carrier NCO is seeded with the fine frequency estimate, falling back
    to the coarse bin, and the code NCO starts at the acquired code phase.
    """
    if not init.acquired:
        raise ValueError("cannot track a source that was not acquired")
    f_s = buf.sample_rate_hz
    samples = buf.samples
    chips = code.chips
    r_c = code.chipping_rate_hz
    pdi = cfg.integration_ms * 1e-3
    n_epochs_min = 10
    if len(buf) < n_epochs_min * pdi * f_s:
        raise ValueError("buffer shorter than 10 integration periods")

    if math.isfinite(init.fine_freq_hz):
        doppler0 = init.fine_freq_hz
    else:
        # a coarse bin can be hundreds of Hz off, far beyond the Costas
        # pull-in range at these bandwidths; refine before closing the loop
        doppler0 = fine_frequency(buf, code, init.code_phase_samples,
                                  init.coarse_freq_hz)
    carr_freq = buf.if_offset_hz + doppler0
    carr_freq_basis = carr_freq
    code_freq = r_c
    chips_per_epoch = round(r_c * pdi)
    nominal_epoch_samples = chips_per_epoch * f_s / r_c

    tau1_code, tau2_code = _loop_gains(cfg.dll_bw_hz, cfg.damping, 1.0)
    tau1_carr, tau2_carr = _loop_gains(cfg.pll_bw_hz, cfg.damping, 0.25)

    rem_code_phase = 0.0
    rem_carr_phase = 0.0
    old_code_nco = old_code_err = 0.0
    old_carr_nco = old_carr_err = 0.0
    spacing = cfg.correlator_spacing_chips

    p = init.code_phase_samples
    epoch = 0
    rows = []
    lock_floor = None
    weak_count = 0
    loss = False
    while True:
        code_step = code_freq / f_s
        blksize = math.ceil((chips_per_epoch - rem_code_phase) / code_step)
        if p + blksize > len(samples):
            break
        seg = samples[p:p + blksize]
        tidx = np.arange(blksize)
        carrier = np.exp(-1j * (2.0 * np.pi * carr_freq * tidx / f_s + rem_carr_phase))
        base = seg * carrier
        rem_carr_phase = ((rem_carr_phase + 2.0 * np.pi * carr_freq * blksize / f_s)
                          % (2.0 * np.pi))

        cp = rem_code_phase + tidx * code_step + 0.5  # round to chip centers
        early = chips[np.floor(cp - spacing).astype(np.int64) % CODE_LENGTH]
        prompt = chips[np.floor(cp).astype(np.int64) % CODE_LENGTH]
        late = chips[np.floor(cp + spacing).astype(np.int64) % CODE_LENGTH]
        new_rem = rem_code_phase + blksize * code_step - chips_per_epoch

        c_e = np.dot(base, early)
        c_p = np.dot(base, prompt)
        c_l = np.dot(base, late)

        code_err = dll_discriminator(c_e.real, c_e.imag, c_l.real, c_l.imag)
        code_nco = (old_code_nco + (tau2_code / tau1_code) * (code_err - old_code_err)
                    + code_err * (pdi / tau1_code))
        old_code_nco, old_code_err = code_nco, code_err
        code_freq = r_c - code_nco
        if cfg.carrier_aiding:
            code_freq += (carr_freq - buf.if_offset_hz) * r_c / cfg.carrier_freq_hz

        carr_err = pll_discriminator(c_p.real, c_p.imag)
        carr_nco = (old_carr_nco + (tau2_carr / tau1_carr) * (carr_err - old_carr_err)
                    + carr_err * (pdi / tau1_carr))
        old_carr_nco, old_carr_err = carr_nco, carr_err
        carr_freq = carr_freq_basis + carr_nco

        code_start = p - rem_code_phase / code_step
        delay = code_start - epoch * nominal_epoch_samples
        rows.append((epoch * pdi, delay, carr_freq - buf.if_offset_hz,
                     c_p.real, c_p.imag, code_err, carr_err))

        power = abs(c_p) ** 2
        if lock_floor is None:
            lock_floor = cfg.lock_floor_fraction * power
        weak_count = weak_count + 1 if power < lock_floor else 0
        if weak_count >= cfg.lock_loss_epochs:
            loss = True
            break

        p += blksize
        rem_code_phase = new_rem
        epoch += 1

    arr = np.asarray(rows, dtype=np.float64).reshape(-1, 7)
    return TrackingTrace(epoch_s=arr[:, 0], code_delay_samples=arr[:, 1],
                         doppler_hz=arr[:, 2], prompt_i=arr[:, 3],
                         prompt_q=arr[:, 4], dll_discriminator=arr[:, 5],
                         pll_discriminator=arr[:, 6], loss_of_lock=loss)
