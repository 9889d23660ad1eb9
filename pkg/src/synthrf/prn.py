"""GPS L1 C/A spreading code (Gold code) generation and code-domain utilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CODE_LENGTH = 1023
DEFAULT_CHIPPING_RATE_HZ = 1.023e6

# PRN -> G2 phase-select tap pair (1-based register positions), per ICD-GPS-200.
G2_TAP_PAIRS = {
    1: (2, 6), 2: (3, 7), 3: (4, 8), 4: (5, 9),
    5: (1, 9), 6: (2, 10), 7: (1, 8), 8: (2, 9),
    9: (3, 10), 10: (2, 3), 11: (3, 4), 12: (5, 6),
    13: (6, 7), 14: (7, 8), 15: (8, 9), 16: (9, 10),
    17: (1, 4), 18: (2, 5), 19: (3, 6), 20: (4, 7),
    21: (5, 8), 22: (6, 9), 23: (1, 3), 24: (4, 6),
    25: (5, 7), 26: (6, 8), 27: (7, 9), 28: (8, 10),
    29: (1, 6), 30: (2, 7), 31: (3, 8), 32: (4, 9),
}


@dataclass(frozen=True)
class SpreadingCode:
    """A 1023-chip +/-1 spreading sequence with its chipping rate."""

    prn_id: int
    chips: np.ndarray
    chipping_rate_hz: float = DEFAULT_CHIPPING_RATE_HZ

    def __post_init__(self):
        chips = np.asarray(self.chips, dtype=np.float64)
        object.__setattr__(self, "chips", chips)
        if not 1 <= int(self.prn_id) <= 32:
            raise ValueError(f"prn_id must be in 1..32, got {self.prn_id}")
        if chips.shape != (CODE_LENGTH,):
            raise ValueError(f"code must have exactly {CODE_LENGTH} chips")
        if not np.all(np.abs(chips) == 1.0):
            raise ValueError("chips must all be +1 or -1")
        if self.chipping_rate_hz <= 0:
            raise ValueError("chipping_rate_hz must be positive")

    @property
    def period_s(self) -> float:
        return CODE_LENGTH / self.chipping_rate_hz


def generate_ca_code(prn_id: int,
                     chipping_rate_hz: float = DEFAULT_CHIPPING_RATE_HZ) -> SpreadingCode:
    """Generate the standard GPS L1 C/A Gold code for a PRN.

    Two 10-stage maximal LFSRs, both seeded all-ones: G1 with feedback taps
    (3, 10) and G2 with feedback taps (2, 3, 6, 8, 9, 10).  The output chip is
    the G1 output XORed with the PRN-specific G2 phase, selected by XORing two
    register positions.  Bits map {0 -> +1, 1 -> -1}.
    """
    if not isinstance(prn_id, (int, np.integer)) or not 1 <= prn_id <= 32:
        raise ValueError(f"prn_id must be an integer in 1..32, got {prn_id!r}")
    t1, t2 = G2_TAP_PAIRS[int(prn_id)]
    g1 = [1] * 10
    g2 = [1] * 10
    chips = np.empty(CODE_LENGTH, dtype=np.float64)
    for i in range(CODE_LENGTH):
        bit = g1[9] ^ g2[t1 - 1] ^ g2[t2 - 1]
        chips[i] = 1.0 - 2.0 * bit
        fb1 = g1[2] ^ g1[9]
        fb2 = g2[1] ^ g2[2] ^ g2[5] ^ g2[7] ^ g2[8] ^ g2[9]
        g1 = [fb1] + g1[:-1]
        g2 = [fb2] + g2[:-1]
    return SpreadingCode(prn_id=int(prn_id), chips=chips,
                         chipping_rate_hz=chipping_rate_hz)


def circular_autocorrelation(code: SpreadingCode, lag: int) -> float:
    """Normalized circular autocorrelation at an integer lag (reduced mod 1023)."""
    lag = int(lag) % CODE_LENGTH
    return float(np.dot(code.chips, np.roll(code.chips, -lag))) / CODE_LENGTH
