"""Sifting, QBER and visibility estimation, and block accumulation."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Iterable

import numpy as np

from . import rng as _rng
from .optics import DetectionRecordSet, monitor_slot_classes
from .params import ReceiverParams
from .protocol import OCCUPANCY, CowSymbol, PulseTrain, SymbolSequence

# Windows up to this many slots get an exact census of monitor slot kinds;
# longer ones use the expected fractions.
EXACT_CENSUS_SLOTS = 1 << 22
_CENSUS_CHUNK = 1 << 22


class InsufficientStatistics(ValueError):
    pass


class PartialBlockError(RuntimeError):
    """The stats stream ended before the target count; ``stats`` holds what was collected."""

    def __init__(self, stats: "SessionStats", target: float):
        super().__init__(f"stream exhausted at n_sifted={stats.n_sifted} < target {target}")
        self.stats = stats
        self.target = target


@dataclass(frozen=True)
class SessionStats:
    """Additive tally of one acquisition (or the expectation of one).

    ``qber``, ``visibility_est`` and ``duration_s`` are derived from the counts so
    that merging stays associative.
    """

    n_sifted: float = 0
    n_errors: float = 0
    monitor_overlap_counts: float = 0
    monitor_side_counts: float = 0
    monitor_overlap_slots: float = 0
    monitor_side_slots: float = 0
    elapsed_slots: float = 0
    spd1_counts: float = 0
    spd2_counts: float = 0
    rejected_events: float = 0
    clock_rate_hz: float = 2.0e9

    @property
    def qber(self) -> float:
        return self.n_errors / self.n_sifted if self.n_sifted > 0 else 0.0

    @property
    def visibility_est(self) -> float:
        try:
            return visibility_from_counts(self.monitor_overlap_counts, self.monitor_side_counts,
                                          self.monitor_overlap_slots, self.monitor_side_slots)
        except InsufficientStatistics:
            return float("nan")

    @property
    def duration_s(self) -> float:
        return self.elapsed_slots / self.clock_rate_hz

    def merge(self, other: "SessionStats") -> "SessionStats":
        if self.clock_rate_hz != other.clock_rate_hz:
            raise ValueError("cannot merge stats recorded at different clock rates")
        summed = {f.name: getattr(self, f.name) + getattr(other, f.name)
                  for f in fields(self) if f.name != "clock_rate_hz"}
        return SessionStats(clock_rate_hz=self.clock_rate_hz, **summed)

    __add__ = merge

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(qber=self.qber, visibility_est=self.visibility_est, duration_s=self.duration_s)
        return d


def fringe_visibility(i_max: float, i_min: float) -> float:
    if i_max < 0 or i_min < 0:
        raise ValueError("intensities must be non-negative")
    if i_max + i_min == 0:
        raise ValueError("visibility undefined when both intensities are zero")
    return (i_max - i_min) / (i_max + i_min)


def sift(alice: SymbolSequence, spd1: DetectionRecordSet, seed: int = 0,
         gate_ps: float | None = None) -> tuple[np.ndarray, SessionStats]:
    """Decode time-basis clicks against Alice's record.

    A click in the first slot of a symbol reads 0, in the second 1. Decoy symbols
    are dropped. A symbol with clicks in both slots yields one random bit. With
    ``gate_ps`` only clicks within a window of that width centred in the slot count.
    Events outside Alice's record are rejected and tallied.
    """
    slots = spd1.slot_index
    inside = (slots >= 0) & (slots < alice.n_slots)
    rejected = int(slots.size - np.count_nonzero(inside))
    if gate_ps is not None:
        offset = spd1.sub_slot_time_ps - 0.5 * spd1.slot_period_ps
        inside &= np.abs(offset) <= 0.5 * gate_ps
    slots = slots[inside]
    sym = slots // 2
    codes = alice.at(sym)
    key = codes != CowSymbol.DECOY
    sym, pos, codes = sym[key], (slots[key] % 2).astype(np.uint8), codes[key]

    if sym.size:
        order = np.argsort(sym, kind="stable")
        sym, pos, codes = sym[order], pos[order], codes[order]
        starts = np.flatnonzero(np.r_[True, sym[1:] != sym[:-1]])
        flags = np.bitwise_or.reduceat(np.left_shift(1, pos), starts)
        codes = codes[starts]
        bits = np.where(flags == 1, 0, 1).astype(np.uint8)
        both = flags == 3
        if both.any():
            gen = _rng.stream(seed, spd1.start_slot, 0x51F7)
            bits[both] = gen.integers(0, 2, size=int(both.sum()), dtype=np.uint8)
        errors = int(np.count_nonzero(bits != codes))
    else:
        bits = np.zeros(0, np.uint8)
        errors = 0

    stats = SessionStats(n_sifted=int(bits.size), n_errors=errors, spd1_counts=len(spd1),
                         rejected_events=rejected, elapsed_slots=spd1.n_slots,
                         clock_rate_hz=1e12 / spd1.slot_period_ps)
    return bits, stats


def visibility_from_counts(c_overlap, c_side, n_overlap_slots, n_side_slots) -> float:
    """Side-normalised destructive-port estimator, clamped to [0, 1].

    An interfering slot expects ``(1 - V) * mu / 2`` and a side slot ``mu / 4``, so
    ``V = 1 - r / 2`` where ``r`` is the ratio of per-slot count rates.
    """
    if c_side <= 0 or n_side_slots <= 0:
        raise InsufficientStatistics("no counts in non-interfering monitor slots")
    if n_overlap_slots <= 0:
        raise InsufficientStatistics("no interfering monitor slots in window")
    r = (c_overlap / n_overlap_slots) / (c_side / n_side_slots)
    return float(min(1.0, max(0.0, 1.0 - 0.5 * r)))


def _slot_kinds(alice: SymbolSequence, slots: np.ndarray, delay: int) -> np.ndarray:
    """Number of nominally occupied contributors (0, 1 or 2) for each output slot."""
    n = alice.n_slots
    kinds = np.zeros(slots.shape, np.int64)
    for contrib in (slots, slots - delay):
        ok = (contrib >= 0) & (contrib < n)
        kinds[ok] += OCCUPANCY[alice.at(contrib[ok] // 2), contrib[ok] % 2]
    return kinds


def monitor_slot_census(alice: SymbolSequence, start: int, n: int, delay: int = 1) -> tuple[float, float]:
    """(interfering, non-interfering) output-slot counts in ``[start, start + n)``."""
    if n <= EXACT_CENSUS_SLOTS:
        ov = side = 0
        for lo in range(start, start + n, _CENSUS_CHUNK):
            slots = np.arange(lo, min(lo + _CENSUS_CHUNK, start + n), dtype=np.int64)
            kinds = _slot_kinds(alice, slots, delay)
            ov += int(np.count_nonzero(kinds == 2))
            side += int(np.count_nonzero(kinds == 1))
        return float(ov), float(side)
    probe = PulseTrain(alice, 1.0, 0.0)
    classes = monitor_slot_classes(probe, ReceiverParams(umzi_delay_slots=delay), 0.0)
    ov = sum(c.weight for c in classes if c.kind == "overlap")
    side = sum(c.weight for c in classes if c.kind == "side")
    return ov * n, side * n


def monitor_stats(spd2: DetectionRecordSet, alice: SymbolSequence, delay: int = 1) -> SessionStats:
    """Tally destructive-port counts by slot kind over the record's window."""
    kinds = _slot_kinds(alice, spd2.slot_index, delay)
    n_ov, n_side = monitor_slot_census(alice, spd2.start_slot, spd2.n_slots, delay)
    return SessionStats(monitor_overlap_counts=int(np.count_nonzero(kinds == 2)),
                        monitor_side_counts=int(np.count_nonzero(kinds == 1)),
                        monitor_overlap_slots=n_ov, monitor_side_slots=n_side,
                        spd2_counts=len(spd2), clock_rate_hz=1e12 / spd2.slot_period_ps)


def estimate_visibility(spd2: DetectionRecordSet, alice: SymbolSequence, delay: int = 1) -> float:
    s = monitor_stats(spd2, alice, delay)
    return visibility_from_counts(s.monitor_overlap_counts, s.monitor_side_counts,
                                  s.monitor_overlap_slots, s.monitor_side_slots)


def accumulate_until(target_counts: float, stats: Iterable[SessionStats]) -> SessionStats:
    """Merge partial tallies until ``n_sifted`` reaches ``target_counts``."""
    if target_counts < 1:
        raise ValueError("target_counts must be >= 1")
    total = None
    for part in stats:
        total = part if total is None else total.merge(part)
        if total.n_sifted >= target_counts:
            return total
    raise PartialBlockError(total if total is not None else SessionStats(), target_counts)
