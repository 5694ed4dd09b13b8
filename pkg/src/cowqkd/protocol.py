"""Alice's symbol stream and its time-bin pulse train.

A logical symbol spans two clock slots. Bit 0 fills the first slot, bit 1 the
second, and a decoy fills both. Nominally empty slots still carry a small leak
set by the extinction ratio.

Symbol sequences are lazy: a generated sequence is defined by its seed and can be
evaluated at any index, so a run covering 10^11 slots never materialises Alice's
full record.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .params import ParameterError, SourceParams, db_to_transmission
from .rng import uniform_at

# Sequences longer than this refuse to materialise as a dense array.
MAX_DENSE_SYMBOLS = 1 << 27


class CowSymbol(enum.IntEnum):
    BIT0 = 0
    BIT1 = 1
    DECOY = 2

    @property
    def occupancy(self) -> tuple[int, int]:
        return tuple(int(x) for x in OCCUPANCY[self])


# Row s gives the (first slot, second slot) occupancy of symbol code s.
OCCUPANCY = np.array([[1, 0], [0, 1], [1, 1]], dtype=np.uint8)


@dataclass(frozen=True, eq=False)
class SymbolSequence:
    """Alice's logical frame.

    Either generated (``frame is None``: symbol ``k`` is drawn from SplitMix64
    output ``k`` of ``seed``) or explicit (``frame`` holds symbol codes that are
    tiled to ``length``).
    """

    length: int
    seed: int = 0
    decoy_probability: float = 0.0
    frame: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ParameterError(f"sequence length must be >= 1, got {self.length}")
        if not 0.0 <= self.decoy_probability <= 1.0:
            raise ParameterError(f"decoy_probability must lie in [0, 1], got {self.decoy_probability}")
        if self.frame is not None:
            frame = np.asarray(self.frame, dtype=np.uint8)
            if frame.ndim != 1 or frame.size == 0 or frame.max() > 2:
                raise ParameterError("frame must be a non-empty 1-D array of symbol codes 0, 1, 2")
            frame.setflags(write=False)
            object.__setattr__(self, "frame", frame)

    @classmethod
    def from_symbols(cls, symbols, length: int | None = None) -> "SymbolSequence":
        """Explicit sequence; repeated cyclically when ``length`` exceeds the given symbols."""
        frame = np.array([int(CowSymbol(s)) for s in symbols], dtype=np.uint8)
        n = len(frame) if length is None else int(length)
        decoys = float(np.mean(frame == CowSymbol.DECOY))
        return cls(length=n, seed=0, decoy_probability=decoys, frame=frame)

    def __len__(self) -> int:
        return self.length

    @property
    def n_slots(self) -> int:
        return 2 * self.length

    def at(self, index) -> np.ndarray:
        """Symbol codes (uint8) at the given symbol indices. Indices are not range-checked."""
        index = np.asarray(index, dtype=np.int64)
        if self.frame is not None:
            return self.frame[index % self.frame.size]
        u = uniform_at(self.seed, index)
        p = self.decoy_probability
        codes = np.where(u < p + 0.5 * (1.0 - p), CowSymbol.BIT0, CowSymbol.BIT1).astype(np.uint8)
        codes[u < p] = CowSymbol.DECOY
        return codes

    @property
    def symbols(self) -> np.ndarray:
        if self.length > MAX_DENSE_SYMBOLS:
            raise MemoryError(f"refusing to materialise {self.length} symbols")
        return self.at(np.arange(self.length, dtype=np.int64))

    def occupancy_at(self, slots) -> np.ndarray:
        """Nominal occupancy (0/1) of the given slot indices."""
        slots = np.asarray(slots, dtype=np.int64)
        return OCCUPANCY[self.at(slots // 2), slots % 2]

    def symbol_probabilities(self) -> np.ndarray:
        """Marginal probabilities of (BIT0, BIT1, DECOY)."""
        if self.frame is not None:
            return np.bincount(self.frame, minlength=3) / self.frame.size
        p = self.decoy_probability
        return np.array([(1 - p) / 2, (1 - p) / 2, p])

    def lag_joint(self, lag: int) -> np.ndarray:
        """Joint distribution P[a, b] of symbols at indices k - lag and k.

        Generated sequences are i.i.d. For explicit frames the distribution is the
        cyclic empirical one, which is exact for windows covering whole frames.
        """
        if lag == 0:
            return np.diag(self.symbol_probabilities())
        if self.frame is None:
            probs = self.symbol_probabilities()
            return np.outer(probs, probs)
        joint = np.zeros((3, 3))
        np.add.at(joint, (np.roll(self.frame, lag), self.frame), 1.0)
        return joint / self.frame.size


def generate_pattern(seed: int, length: int, decoy_probability: float,
                     repeat_frame: int | None = None) -> SymbolSequence:
    """Draw Alice's symbols: decoy with probability ``decoy_probability``, else bit 0 or 1 evenly.

    With ``repeat_frame`` the first ``repeat_frame`` symbols are drawn and tiled,
    mimicking a transmitter that cycles a fixed pattern.
    """
    seq = SymbolSequence(length=int(length), seed=int(seed), decoy_probability=float(decoy_probability))
    if repeat_frame is None:
        return seq
    if repeat_frame < 1:
        raise ParameterError(f"repeat_frame must be >= 1, got {repeat_frame}")
    frame = seq.at(np.arange(int(repeat_frame), dtype=np.int64))
    return replace(seq, frame=frame)


def expected_occupancy(decoy_probability: float) -> float:
    """Expected fraction of non-empty slots."""
    if not 0.0 <= decoy_probability <= 1.0:
        raise ParameterError(f"decoy_probability must lie in [0, 1], got {decoy_probability}")
    return (1.0 + decoy_probability) / 2.0


@dataclass(frozen=True, eq=False)
class PulseTrain:
    """Mean photon number per slot: ``mu_on`` where occupied, ``mu_off`` where nominally empty."""

    symbols: SymbolSequence
    mu_on: float
    mu_off: float
    phase_coherent: bool = True

    @property
    def n_slots(self) -> int:
        return self.symbols.n_slots

    def intensity_at(self, slots) -> np.ndarray:
        occ = self.symbols.occupancy_at(slots)
        return np.where(occ == 1, self.mu_on, self.mu_off)

    @property
    def slot_intensities(self) -> np.ndarray:
        return self.intensity_at(np.arange(self.n_slots, dtype=np.int64))

    def scaled(self, factor: float) -> "PulseTrain":
        return replace(self, mu_on=self.mu_on * factor, mu_off=self.mu_off * factor)

    def total_photon_number(self) -> float:
        return float(np.sum(self.slot_intensities))


def encode_pulse_train(symbols: SymbolSequence, src: SourceParams) -> PulseTrain:
    return PulseTrain(symbols=symbols, mu_on=src.mu,
                      mu_off=src.mu * db_to_transmission(src.extinction_ratio_db), phase_coherent=True)


def decode_occupancy(slot_intensities, threshold: float) -> SymbolSequence:
    """Recover symbols from per-slot intensities by thresholding each slot."""
    occ = np.asarray(slot_intensities, dtype=float) > threshold
    if occ.size % 2:
        raise ParameterError("slot count must be even")
    first, second = occ[0::2], occ[1::2]
    if np.any(~first & ~second):
        raise ParameterError("empty symbol (both slots below threshold)")
    codes = np.where(first & second, CowSymbol.DECOY, np.where(first, CowSymbol.BIT0, CowSymbol.BIT1))
    return SymbolSequence.from_symbols(codes)
