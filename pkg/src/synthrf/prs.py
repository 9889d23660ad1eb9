"""5G NR positioning reference signal: resource grids and OFDM modulation.

Covers carrier numerology (15 kHz SCS, normal cyclic prefix), PRS sequence
generation and comb mapping per the public TS 38.211 rules, filler QPSK on
the remaining cells, and the OFDM modulator/demodulator pair.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, propagate_and_sum
from .dsp import SignalBuffer, add_awgn

LABEL_EMPTY = 0
LABEL_PRS = 1
LABEL_PDSCH = 2
LABEL_DMRS = 3

_PRBS_ADVANCE = 1600

# Per-symbol subcarrier offsets of the PRS comb, indexed by symbol within the
# resource (TS 38.211 table 7.4.1.7.2-1).
_COMB_OFFSETS = {
    2: (0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1),
    4: (0, 2, 1, 3, 0, 2, 1, 3, 0, 2, 1, 3),
    6: (0, 3, 1, 4, 2, 5, 0, 3, 1, 4, 2, 5),
    12: (0, 6, 3, 9, 1, 7, 4, 10, 2, 8, 5, 11),
}


@dataclass(frozen=True)
class CarrierConfig:
    n_cell_id: int = 0
    scs_hz: float = 15e3
    n_rb: int = 52
    n_fft: int = 1024
    cyclic_prefix: str = "normal"
    symbols_per_slot: int = 14
    slots_per_frame: int = 10
    frame_duration_s: float = 0.010

    def __post_init__(self):
        if not 0 <= self.n_cell_id <= 1007:
            raise ValueError("n_cell_id must be in 0..1007")
        if self.cyclic_prefix != "normal":
            raise ValueError("only the normal cyclic prefix is supported")
        if self.n_fft < 12 * self.n_rb:
            raise ValueError("n_fft must be at least 12*n_rb")

    @property
    def n_subcarriers(self) -> int:
        return 12 * self.n_rb

    @property
    def sample_rate_hz(self) -> float:
        # f_s = N_fft * SCS
        return self.n_fft * self.scs_hz

    def cp_length(self, symbol: int) -> int:
        # normal CP at 15 kHz: symbols 0 and 7 of a slot carry the long prefix
        base = 144 * self.n_fft // 2048
        long = 160 * self.n_fft // 2048
        return long if symbol in (0, self.symbols_per_slot // 2) else base

    @property
    def samples_per_slot(self) -> int:
        return sum(self.n_fft + self.cp_length(l)
                   for l in range(self.symbols_per_slot))

    @property
    def slot_duration_s(self) -> float:
        return self.samples_per_slot / self.sample_rate_hz


@dataclass(frozen=True)
class PrsResourceConfig:
    resource_set_period_slots: int = 10
    resource_offset_slots: int = 0
    resource_repetition: int = 1
    resource_time_gap_slots: int = 1
    muting_pattern: tuple[int, ...] | None = None
    comb_size: int = 2
    comb_offset: int = 0
    num_symbols: int = 2
    symbol_start: int = 0
    n_prs_id: int = 0
    n_rb_prs: int = 52

    def __post_init__(self):
        if self.muting_pattern is not None:
            object.__setattr__(self, "muting_pattern", tuple(self.muting_pattern))
        if self.comb_size not in _COMB_OFFSETS:
            raise ValueError("comb_size must be one of 2, 4, 6, 12")
        if not 0 <= self.comb_offset < self.comb_size:
            raise ValueError("comb_offset must be less than comb_size")
        if self.symbol_start + self.num_symbols > 14:
            raise ValueError("symbol_start + num_symbols must not exceed 14")
        if self.num_symbols < 1:
            raise ValueError("num_symbols must be at least 1")
        if not 0 <= self.resource_offset_slots < self.resource_set_period_slots:
            raise ValueError("resource_offset_slots must be below the set period")
        if self.resource_repetition < 1 or self.resource_time_gap_slots < 1:
            raise ValueError("repetition and time gap must be at least 1")
        if not 0 <= self.n_prs_id <= 4095:
            raise ValueError("n_prs_id must be in 0..4095")


@dataclass
class ResourceGrid:
    """Subcarrier x OFDM-symbol matrix of modulation symbols with cell labels."""

    cells: np.ndarray
    labels: np.ndarray

    @classmethod
    def empty(cls, carrier: CarrierConfig) -> "ResourceGrid":
        shape = (carrier.n_subcarriers, carrier.symbols_per_slot)
        return cls(cells=np.zeros(shape, dtype=np.complex128),
                   labels=np.zeros(shape, dtype=np.uint8))


def merge_grids(a: ResourceGrid, b: ResourceGrid) -> ResourceGrid:
    """Overlay two grids for the same slot; occupied cells must be disjoint."""
    if np.any((a.labels != LABEL_EMPTY) & (b.labels != LABEL_EMPTY)):
        raise ValueError("grids occupy overlapping cells")
    return ResourceGrid(cells=a.cells + b.cells, labels=a.labels | b.labels)


def _prbs(c_init: int, length: int) -> np.ndarray:
    """Length-31 Gold PRBS c(n) with the standard 1600-step advance."""
    total = length + _PRBS_ADVANCE + 31
    x1 = np.zeros(total, dtype=np.int8)
    x2 = np.zeros(total, dtype=np.int8)
    x1[0] = 1
    for i in range(31):
        x2[i] = (c_init >> i) & 1
    i = 0
    while i + 31 < total:
        blk = min(28, total - 31 - i)
        x1[i + 31:i + 31 + blk] = x1[i + 3:i + 3 + blk] ^ x1[i:i + blk]
        x2[i + 31:i + 31 + blk] = (x2[i + 3:i + 3 + blk] ^ x2[i + 2:i + 2 + blk]
                                   ^ x2[i + 1:i + 1 + blk] ^ x2[i:i + blk])
        i += blk
    return x1[_PRBS_ADVANCE:_PRBS_ADVANCE + length] ^ x2[_PRBS_ADVANCE:_PRBS_ADVANCE + length]


def _qpsk_from_prbs(c_init: int, n_symbols: int) -> np.ndarray:
    c = _prbs(c_init, 2 * n_symbols).astype(np.float64)
    return ((1.0 - 2.0 * c[0::2]) + 1j * (1.0 - 2.0 * c[1::2])) / np.sqrt(2.0)


def _prs_c_init(n_prs_id: int, slot: int, symbol: int, symbols_per_slot: int) -> int:
    n_id = n_prs_id
    return ((2 ** 22 * (n_id // 1024)
             + 2 ** 10 * (symbols_per_slot * slot + symbol + 1) * (2 * (n_id % 1024) + 1)
             + (n_id % 1024)) % 2 ** 31)


def is_prs_slot(prs: PrsResourceConfig, slot_index: int) -> bool:
    """True if the slot carries the (unmuted) PRS resource."""
    rel = slot_index - prs.resource_offset_slots
    if rel < 0:
        return False
    pos = rel % prs.resource_set_period_slots
    active = any(pos == i * prs.resource_time_gap_slots
                 for i in range(prs.resource_repetition))
    if not active:
        return False
    if prs.muting_pattern:
        instance = (rel // prs.resource_set_period_slots) % len(prs.muting_pattern)
        if not prs.muting_pattern[instance]:
            return False
    return True


def generate_prs_symbols(carrier: CarrierConfig, prs: PrsResourceConfig,
                         slot_index: int) -> ResourceGrid:
    """PRS QPSK symbols mapped onto the comb pattern for one slot."""
    if slot_index < 0:
        raise ValueError("slot_index must be non-negative")
    if prs.n_rb_prs > carrier.n_rb:
        raise ValueError("n_rb_prs exceeds the carrier bandwidth")
    grid = ResourceGrid.empty(carrier)
    if not is_prs_slot(prs, slot_index):
        return grid
    n_sc_prs = 12 * prs.n_rb_prs
    per_symbol = n_sc_prs // prs.comb_size
    offsets = _COMB_OFFSETS[prs.comb_size]
    for j in range(prs.num_symbols):
        l = prs.symbol_start + j
        c_init = _prs_c_init(prs.n_prs_id, slot_index, l, carrier.symbols_per_slot)
        symbols = _qpsk_from_prbs(c_init, per_symbol)
        k = (np.arange(per_symbol) * prs.comb_size
             + (prs.comb_offset + offsets[j % len(offsets)]) % prs.comb_size)
        grid.cells[k, l] = symbols
        grid.labels[k, l] = LABEL_PRS
    return grid


def generate_pdsch_filler(carrier: CarrierConfig, seed: int, slot_index: int,
                          prs_grid: ResourceGrid | None = None) -> ResourceGrid:
    """Seeded random QPSK on every cell not labeled PRS (payload filler only)."""
    grid = ResourceGrid.empty(carrier)
    rng = np.random.default_rng((seed, slot_index))
    free = (np.ones_like(grid.labels, dtype=bool) if prs_grid is None
            else prs_grid.labels == LABEL_EMPTY)
    n = int(free.sum())
    bits = rng.integers(0, 2, (n, 2)).astype(np.float64)
    grid.cells[free] = ((1.0 - 2.0 * bits[:, 0]) + 1j * (1.0 - 2.0 * bits[:, 1])) / np.sqrt(2.0)
    grid.labels[free] = LABEL_PDSCH
    return grid


def ofdm_modulate(grids, carrier: CarrierConfig) -> SignalBuffer:
    """OFDM-modulate a sequence of slot grids at f_s = n_fft * scs."""
    n_sc = carrier.n_subcarriers
    n_fft = carrier.n_fft
    bins = (np.arange(n_sc) - n_sc // 2) % n_fft  # subcarriers centered on DC
    out = np.empty(carrier.samples_per_slot * len(grids), dtype=np.complex128)
    ptr = 0
    for grid in grids:
        if grid.cells.shape != (n_sc, carrier.symbols_per_slot):
            raise ValueError("grid shape does not match the carrier config")
        for l in range(carrier.symbols_per_slot):
            frame = np.zeros(n_fft, dtype=np.complex128)
            frame[bins] = grid.cells[:, l]
            body = np.fft.ifft(frame) * n_fft
            cp = carrier.cp_length(l)
            out[ptr:ptr + cp] = body[-cp:]
            out[ptr + cp:ptr + cp + n_fft] = body
            ptr += cp + n_fft
    return SignalBuffer(out, carrier.sample_rate_hz)


def cp_alignment_metric(samples: np.ndarray, carrier: CarrierConfig) -> float:
    """Mean normalized correlation between each cyclic prefix and the symbol tail."""
    n_fft = carrier.n_fft
    ptr = 0
    corrs = []
    while True:
        for l in range(carrier.symbols_per_slot):
            cp = carrier.cp_length(l)
            if ptr + cp + n_fft > len(samples):
                return float(np.mean(corrs)) if corrs else 0.0
            head = samples[ptr:ptr + cp]
            tail = samples[ptr + n_fft:ptr + n_fft + cp]
            denom = np.linalg.norm(head) * np.linalg.norm(tail)
            if denom > 0:
                corrs.append(abs(np.vdot(head, tail)) / denom)
            ptr += cp + n_fft


def ofdm_demodulate(buf: SignalBuffer, carrier: CarrierConfig) -> list[ResourceGrid]:
    """Inverse of ofdm_modulate; the buffer must hold a whole number of slots."""
    sps = carrier.samples_per_slot
    if len(buf) % sps:
        raise ValueError("buffer length is not an integer number of slots")
    metric = cp_alignment_metric(buf.samples, carrier)
    if metric < 0.5 and np.any(buf.samples):
        warnings.warn(f"cyclic prefix correlation is low ({metric:.2f}); "
                      "input may be misaligned")
    n_sc = carrier.n_subcarriers
    n_fft = carrier.n_fft
    bins = (np.arange(n_sc) - n_sc // 2) % n_fft
    grids = []
    ptr = 0
    for _ in range(len(buf) // sps):
        grid = ResourceGrid.empty(carrier)
        for l in range(carrier.symbols_per_slot):
            cp = carrier.cp_length(l)
            body = buf.samples[ptr + cp:ptr + cp + n_fft]
            frame = np.fft.fft(body) / n_fft
            grid.cells[:, l] = frame[bins]
            ptr += cp + n_fft
        grids.append(grid)
    return grids


def gnb_clean_waveform(carrier: CarrierConfig, prs_cfg: PrsResourceConfig,
                       n_slots: int, seed: int,
                       with_pdsch: bool = True) -> SignalBuffer:
    """Basic (pre-channel) gNB waveform: PRS plus optional filler, modulated."""
    grids = []
    for s in range(n_slots):
        grid = generate_prs_symbols(carrier, prs_cfg, s)
        if with_pdsch:
            grid = merge_grids(grid, generate_pdsch_filler(carrier, seed, s, grid))
        grids.append(grid)
    return ofdm_modulate(grids, carrier)


def synthesize_gnb(carrier: CarrierConfig, prs_configs: dict[str, PrsResourceConfig],
                   channels: ChannelSet, duration_s: float, seed: int,
                   with_pdsch: bool = True,
                   noise_power_dbw: float = -np.inf,
                   noise_seed: int = 1) -> SignalBuffer:
    """Modulate each gNB, apply its channel paths, and sum across gNBs."""
    if not prs_configs:
        raise ValueError("no gNB sources configured")
    n_slots = round(duration_s / carrier.slot_duration_s)
    if n_slots < 1:
        raise ValueError("duration shorter than one slot")
    clean = {sid: gnb_clean_waveform(carrier, cfg, n_slots, seed, with_pdsch)
             for sid, cfg in prs_configs.items()}
    out = propagate_and_sum(clean, channels)
    return add_awgn(out, noise_power_dbw, noise_seed)
