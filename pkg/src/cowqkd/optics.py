"""Monte Carlo propagation of the pulse train to Bob's two detectors.

Per slot, a threshold detector fires with probability ``1 - exp(-eta * mu)``.
Clicks are drawn by thinning: candidate slots are spaced by geometric gaps at an
upper-bound probability ``p_max`` and each candidate is kept with probability
``p(slot) / p_max``. Work therefore scales with the number of clicks, not the
number of slots, and slot intensities are evaluated only where a candidate lands.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import rng as _rng
from .params import ChannelParams, DetectorParams, ReceiverParams, db_to_transmission
from .protocol import OCCUPANCY, PulseTrain

SIGNAL, DARK = 0, 1
_CHUNK = 1 << 20


class Port(enum.Enum):
    DESTRUCTIVE = "destructive"
    CONSTRUCTIVE = "constructive"


def attenuate(train: PulseTrain, ch: ChannelParams, extra_db: float = 0.0) -> PulseTrain:
    if extra_db < 0:
        raise ValueError(f"extra_db must be >= 0, got {extra_db}")
    return train.scaled(db_to_transmission(ch.attenuation_db + extra_db))


def umzi_slot_intensity(mu_prev, mu_curr, V, phase: float = math.pi, port: Port = Port.DESTRUCTIVE):
    """Mean photon number in one interferometer output slot.

    ``mu_prev`` arrives through the long arm and ``mu_curr`` through the short arm.
    Each contributes a quarter of its intensity; the cross term carries the
    visibility. At ``phase = pi`` the destructive port subtracts it.
    """
    mu_prev = np.asarray(mu_prev, dtype=float)
    mu_curr = np.asarray(mu_curr, dtype=float)
    cross = 2.0 * V * math.cos(phase) * np.sqrt(mu_prev * mu_curr)
    if Port(port) is Port.CONSTRUCTIVE:
        cross = -cross
    out = np.maximum((mu_prev + mu_curr + cross) / 4.0, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MonitorTimeline:
    destructive: np.ndarray
    constructive: np.ndarray

    def port(self, port: Port) -> np.ndarray:
        return self.destructive if Port(port) is Port.DESTRUCTIVE else self.constructive


def build_monitor_timeline(train, rx: ReceiverParams, V: float,
                           phase_coherent: bool | None = None) -> MonitorTimeline:
    """Per-slot intensities at both interferometer outputs for an explicit train.

    ``train`` is a :class:`PulseTrain` or a 1-D array of slot intensities. Output
    slot ``t`` combines input slot ``t`` (short arm) with slot ``t - delay`` (long
    arm); the timeline is ``delay`` slots longer than the input so the trailing
    long-arm contributions are kept.
    """
    if isinstance(train, PulseTrain):
        coherent = train.phase_coherent if phase_coherent is None else phase_coherent
        mu = train.slot_intensities
    else:
        coherent = True if phase_coherent is None else phase_coherent
        mu = np.asarray(train, dtype=float)
    if not coherent:
        V = 0.0
    d = int(rx.umzi_delay_slots)
    short = np.concatenate([mu, np.zeros(d)])
    long = np.concatenate([np.zeros(d), mu])
    k = rx.monitor_scale
    return MonitorTimeline(
        destructive=k * umzi_slot_intensity(long, short, V, rx.umzi_phase, Port.DESTRUCTIVE),
        constructive=k * umzi_slot_intensity(long, short, V, rx.umzi_phase, Port.CONSTRUCTIVE),
    )


def monitor_intensity_at(train: PulseTrain, slots, rx: ReceiverParams, V: float,
                         port: Port = Port.DESTRUCTIVE) -> np.ndarray:
    """Output-port intensity at arbitrary output slots of a (possibly huge) train."""
    slots = np.asarray(slots, dtype=np.int64)
    if not train.phase_coherent:
        V = 0.0
    n = train.n_slots
    d = int(rx.umzi_delay_slots)
    short = _intensity_or_zero(train, slots, n)
    long = _intensity_or_zero(train, slots - d, n)
    return rx.monitor_scale * umzi_slot_intensity(long, short, V, rx.umzi_phase, port)


def _intensity_or_zero(train: PulseTrain, slots: np.ndarray, n: int) -> np.ndarray:
    inside = (slots >= 0) & (slots < n)
    out = np.zeros(slots.shape)
    if inside.any():
        out[inside] = train.intensity_at(slots[inside])
    return out


@dataclass(frozen=True)
class MonitorSlotClass:
    """One kind of interferometer output slot in a long random train."""

    weight: float        # fraction of output slots of this kind
    occ_long: int
    occ_short: int
    intensity: float

    @property
    def kind(self) -> str:
        n = self.occ_long + self.occ_short
        return ("empty", "side", "overlap")[n]


def monitor_slot_classes(train: PulseTrain, rx: ReceiverParams, V: float,
                         port: Port = Port.DESTRUCTIVE) -> list[MonitorSlotClass]:
    """Enumerate output-slot kinds by the symbols feeding the two arms.

    Weights are exact for i.i.d. generated sequences and for windows made of whole
    frames of an explicit sequence.
    """
    if not train.phase_coherent:
        V = 0.0
    d = int(rx.umzi_delay_slots)
    level = (train.mu_off, train.mu_on)
    out = []
    for r in (0, 1):
        rel = r - d
        lag = -(rel // 2)
        parity_long = rel % 2
        joint = train.symbols.lag_joint(lag)
        for a in range(3):
            for b in range(3):
                w = 0.5 * joint[a, b]
                if w == 0.0:
                    continue
                ol, os_ = int(OCCUPANCY[a, parity_long]), int(OCCUPANCY[b, r])
                inten = rx.monitor_scale * umzi_slot_intensity(level[ol], level[os_], V, rx.umzi_phase, port)
                out.append(MonitorSlotClass(w, ol, os_, float(inten)))
    return out


def click_probability(mu, efficiency: float):
    return -np.expm1(-efficiency * np.asarray(mu, dtype=float))


def mean_signal_click_probability(train: PulseTrain, efficiency: float) -> float:
    """Average per-slot click probability of a detector watching the train directly."""
    probs = train.symbols.symbol_probabilities()
    on = click_probability(train.mu_on, efficiency)
    off = click_probability(train.mu_off, efficiency)
    occ = float(probs @ OCCUPANCY.sum(axis=1)) / 2.0
    return float(occ * on + (1.0 - occ) * off)


def mean_monitor_click_probability(train: PulseTrain, rx: ReceiverParams, V: float,
                                   efficiency: float, port: Port = Port.DESTRUCTIVE) -> float:
    return float(sum(c.weight * click_probability(c.intensity, efficiency)
                     for c in monitor_slot_classes(train, rx, V, port)))


@dataclass(frozen=True, eq=False)
class DetectionRecordSet:
    """Time-stamped clicks of one detector over a window of slots.

    ``time_ps`` is the digitised absolute arrival time; ``slot_index`` is the slot
    containing it, which after jitter may lie outside ``[start_slot, start_slot + n_slots)``.
    """

    detector: str
    slot_index: np.ndarray
    time_ps: np.ndarray
    origin: np.ndarray
    slot_period_ps: float
    start_slot: int = 0
    n_slots: int = 0
    dead_time_losses: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.slot_index.size)

    @property
    def sub_slot_time_ps(self) -> np.ndarray:
        return self.time_ps - self.slot_index * self.slot_period_ps

    @property
    def n_dark(self) -> int:
        return int(np.count_nonzero(self.origin == DARK))

    @classmethod
    def empty(cls, detector: str, slot_period_ps: float, start_slot: int = 0, n_slots: int = 0):
        return cls(detector, np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.uint8),
                   slot_period_ps, start_slot, n_slots)

    @classmethod
    def concat(cls, parts: Sequence["DetectionRecordSet"]) -> "DetectionRecordSet":
        """Join records of consecutive windows of the same detector (ordered by start slot)."""
        parts = sorted(parts, key=lambda r: r.start_slot)
        first = parts[0]
        time = np.concatenate([p.time_ps for p in parts])
        order = np.argsort(time, kind="stable")
        return cls(first.detector,
                   np.concatenate([p.slot_index for p in parts])[order], time[order],
                   np.concatenate([p.origin for p in parts])[order],
                   first.slot_period_ps, first.start_slot,
                   sum(p.n_slots for p in parts), sum(p.dead_time_losses for p in parts))

    def write_csv(self, path_or_file) -> None:
        """Event dump with columns detector, slot_index, time_ps, origin."""
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["detector", "slot_index", "time_ps", "origin"])
            names = ("signal", "dark")
            for s, t, o in zip(self.slot_index.tolist(), self.time_ps.tolist(), self.origin.tolist()):
                w.writerow([self.detector, s, repr(float(t)), names[o]])
        finally:
            if own:
                fh.close()


def _candidate_slots(p_max: float, start: int, n: int, gen: np.random.Generator) -> np.ndarray:
    """Slots in [start, start + n) each selected independently with probability ``p_max``."""
    if p_max <= 0.0 or n <= 0:
        return np.zeros(0, np.int64)
    end = start + n
    pieces = []
    pos = start - 1
    while True:
        want = int(min(_CHUNK, max(64, 1.1 * (end - pos) * p_max + 64)))
        cand = pos + np.cumsum(gen.geometric(p_max, size=want))
        if cand[-1] >= end:
            pieces.append(cand[cand < end])
            break
        pieces.append(cand)
        pos = int(cand[-1])
    return np.concatenate(pieces)


def _sample_detector(click_prob_at: Callable[[np.ndarray], np.ndarray], p_max: float,
                     start: int, n: int, det: DetectorParams, rate_estimate_hz: float,
                     slot_period_ps: float, gen: np.random.Generator, detector: str) -> DetectionRecordSet:
    cand = _candidate_slots(p_max, start, n, gen)
    if cand.size:
        keep = gen.random(cand.size) * p_max < click_prob_at(cand)
        sig_slots = cand[keep]
    else:
        sig_slots = cand
    sigma = det.jitter_sigma_ps(rate_estimate_hz)
    t_sig = (sig_slots + 0.5) * slot_period_ps
    if sigma > 0 and sig_slots.size:
        t_sig = t_sig + sigma * gen.standard_normal(sig_slots.size)

    window_s = n * slot_period_ps * 1e-12
    n_dark = gen.poisson(det.dark_count_rate_hz * window_s) if det.dark_count_rate_hz > 0 else 0
    t_dark = (start + gen.random(n_dark) * n) * slot_period_ps

    raw = np.concatenate([t_sig, t_dark])
    origin = np.concatenate([np.full(t_sig.size, SIGNAL, np.uint8), np.full(t_dark.size, DARK, np.uint8)])
    res = det.digitizer_resolution_ps
    bins = np.floor(raw / res).astype(np.int64)
    order = np.argsort(bins, kind="stable")
    bins, origin = bins[order], origin[order]
    time_ps = bins * res

    lost = 0
    if det.dead_time_ns > 0 and time_ps.size:
        keep = _dead_time_mask(time_ps, det.dead_time_ns * 1e3)
        lost = int(time_ps.size - keep.sum())
        time_ps, origin = time_ps[keep], origin[keep]

    slot_index = np.floor(time_ps / slot_period_ps).astype(np.int64)
    return DetectionRecordSet(detector, slot_index, time_ps.astype(float), origin,
                              slot_period_ps, start, n, lost, {"jitter_sigma_ps": sigma})


def _dead_time_mask(time_ps: np.ndarray, dead_ps: float) -> np.ndarray:
    keep = np.zeros(time_ps.size, bool)
    last = -np.inf
    for i, t in enumerate(time_ps.tolist()):
        if t - last >= dead_ps:
            keep[i] = True
            last = t
    return keep


def simulate_detections(slot_intensities, det: DetectorParams, rate_estimate_hz: float, seed: int,
                        clock_rate_hz: float = 2.0e9, start_slot: int = 0,
                        detector: str = "SPD1") -> DetectionRecordSet:
    """Sample clicks for an explicit array of per-slot mean photon numbers.

    The array covers slots ``start_slot .. start_slot + len - 1``. Deterministic
    for a fixed ``seed``.
    """
    mu = np.asarray(slot_intensities, dtype=float)
    probs = click_probability(mu, det.efficiency)
    p_max = float(probs.max()) if probs.size else 0.0
    gen = _rng.stream(seed, 0)
    return _sample_detector(lambda s: probs[s - start_slot], p_max, start_slot, mu.size, det,
                            rate_estimate_hz, 1e12 / clock_rate_hz, gen, detector)


def route_and_detect(train: PulseTrain, ch: ChannelParams, rx: ReceiverParams, det: DetectorParams,
                     V: float, seed: int, clock_rate_hz: float = 2.0e9, start_slot: int = 0,
                     n_slots: int | None = None, block_index: int = 0,
                     with_constructive: bool = False):
    """Send the train through the channel and Bob's receiver; return per-detector records.

    SPD1 watches the ``1 - monitor_tap`` branch directly; SPD2 watches the
    destructive interferometer output. With ``with_constructive`` a third record
    for a detector on the constructive output is appended. Random streams are
    keyed by ``(seed, block_index, detector)``, so disjoint windows simulated with
    distinct ``block_index`` values are independent and order-free.
    """
    rx_train = attenuate(train, ch)
    n = train.n_slots - start_slot if n_slots is None else int(n_slots)
    period = 1e12 / clock_rate_hz
    eta = det.efficiency
    dark = det.dark_count_rate_hz

    key_train = rx_train.scaled(1.0 - rx.monitor_tap)
    rate1 = clock_rate_hz * mean_signal_click_probability(key_train, eta) + dark
    p1 = float(click_probability(max(key_train.mu_on, key_train.mu_off), eta))
    spd1 = _sample_detector(lambda s: click_probability(key_train.intensity_at(s), eta), p1,
                            start_slot, n, det, rate1, period, _rng.stream(seed, block_index, 1), "SPD1")

    records = [spd1]
    ports = [Port.DESTRUCTIVE] + ([Port.CONSTRUCTIVE] if with_constructive else [])
    for tag, port in enumerate(ports, start=2):
        classes = monitor_slot_classes(rx_train, rx, V, port)
        rate = clock_rate_hz * sum(c.weight * click_probability(c.intensity, eta) for c in classes) + dark
        p_max = _monitor_upper_bound(rx_train, rx, V, port, eta)

        def prob(s, port=port):
            return click_probability(monitor_intensity_at(rx_train, s, rx, V, port), eta)

        name = "SPD2" if port is Port.DESTRUCTIVE else "SPD2c"
        records.append(_sample_detector(prob, p_max, start_slot, n, det, rate, period,
                                        _rng.stream(seed, block_index, tag), name))
    return tuple(records)


def _monitor_upper_bound(train: PulseTrain, rx: ReceiverParams, V: float, port: Port, eta: float) -> float:
    if not train.phase_coherent:
        V = 0.0
    levels = (0.0, train.mu_off, train.mu_on)
    best = max(float(umzi_slot_intensity(a, b, V, rx.umzi_phase, port)) for a in levels for b in levels)
    return float(click_probability(rx.monitor_scale * best, eta))
