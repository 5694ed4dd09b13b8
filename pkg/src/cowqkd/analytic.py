"""Closed-form expectations of the Monte Carlo observables.

These are the expected values of exactly the estimators applied to simulated
data (sifted counts, QBER, side-normalised visibility), so they double as the
oracle for the sampler and as the fast path for attenuation sweeps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import ndtr

from .optics import (Port, click_probability, mean_signal_click_probability, monitor_slot_classes)
from .params import ChannelParams, DetectorParams, ReceiverParams, SourceParams, SystemParams
from .postprocess import SessionStats, visibility_from_counts
from .protocol import PulseTrain, SymbolSequence, encode_pulse_train, expected_occupancy
from .security import KeyRateResult, evaluate_key_rate

# (seed power in uW, visibility); the zero-power floor is a modelling choice.
INJECTION_CALIBRATION = ((0.0, 0.5), (12.0, 0.99), (216.0, 0.9978))
_injection_curve = PchipInterpolator(*zip(*INJECTION_CALIBRATION))


def injection_visibility(seed_power_uw: float) -> float:
    """Source visibility versus master-laser seed power, saturating at 216 uW."""
    if seed_power_uw < 0:
        raise ValueError(f"seed power must be >= 0, got {seed_power_uw}")
    top_p, top_v = INJECTION_CALIBRATION[-1]
    if seed_power_uw >= top_p:
        return top_v
    return float(_injection_curve(seed_power_uw))


def mu_for_attenuation(attenuation_db: float, mu: float = 0.1, low_loss_mu: float = 0.07,
                       low_loss_threshold_db: float = 3.0) -> float:
    """Mean photon number policy: reduced flux below the low-loss threshold."""
    return low_loss_mu if attenuation_db < low_loss_threshold_db else mu


def _received_train(src: SourceParams, ch: ChannelParams, symbols: SymbolSequence) -> PulseTrain:
    return encode_pulse_train(symbols, src).scaled(ch.transmission)


def _iid(p_decoy: float) -> SymbolSequence:
    return SymbolSequence(length=1, decoy_probability=p_decoy)


def expected_spd1_rate(src: SourceParams, ch: ChannelParams, rx: ReceiverParams, det: DetectorParams,
                       p_decoy: float = 0.01, symbols: SymbolSequence | None = None) -> float:
    """Mean SPD1 click rate (signal plus dark), clicks/s."""
    train = _received_train(src, ch, symbols or _iid(p_decoy)).scaled(1.0 - rx.monitor_tap)
    return src.clock_rate_hz * mean_signal_click_probability(train, det.efficiency) + det.dark_count_rate_hz


def expected_spd2_rate(src: SourceParams, ch: ChannelParams, rx: ReceiverParams, det: DetectorParams,
                       p_decoy: float = 0.01, V: float | None = None,
                       port: Port = Port.DESTRUCTIVE, symbols: SymbolSequence | None = None) -> float:
    V = src.source_visibility if V is None else V
    train = _received_train(src, ch, symbols or _iid(p_decoy))
    classes = monitor_slot_classes(train, rx, V, port)
    mean = sum(c.weight * click_probability(c.intensity, det.efficiency) for c in classes)
    return src.clock_rate_hz * float(mean) + det.dark_count_rate_hz


def jitter_spill(sigma_ps: float, slot_period_ps: float) -> float:
    """Probability that a click centred in its slot is digitised into one given neighbour."""
    if sigma_ps <= 0:
        return 0.0
    return float(ndtr(-0.5 * slot_period_ps / sigma_ps))


@dataclass(frozen=True)
class TimeBasisExpectation:
    sifted_rate_hz: float
    error_rate_hz: float
    spd1_rate_hz: float
    jitter_sigma_ps: float

    @property
    def qber(self) -> float:
        return self.error_rate_hz / self.sifted_rate_hz if self.sifted_rate_hz > 0 else 0.0


def expected_time_basis(src: SourceParams, ch: ChannelParams, rx: ReceiverParams, det: DetectorParams,
                        p_decoy: float = 0.01, symbols: SymbolSequence | None = None) -> TimeBasisExpectation:
    """Expected sifted and erroneous time-basis counts per second.

    Error sources: clicks from the leaked light in the empty slot, dark counts,
    and jitter moving a click across a slot boundary (into the wrong slot of its
    own symbol, or in from the neighbouring symbol). Spill beyond one slot is
    ignored. Clicks in both slots of a key symbol count once with a random bit.
    """
    symbols = symbols or _iid(p_decoy)
    train = _received_train(src, ch, symbols).scaled(1.0 - rx.monitor_tap)
    eta = det.efficiency
    spd1_rate = src.clock_rate_hz * mean_signal_click_probability(train, eta) + det.dark_count_rate_hz
    sigma = det.jitter_sigma_ps(spd1_rate)
    t = jitter_spill(sigma, src.slot_period_ps)

    c_on = float(click_probability(train.mu_on, eta))
    c_off = float(click_probability(train.mu_off, eta))
    p0, p1, pd = symbols.symbol_probabilities()
    e_first = (p0 + pd) * c_on + p1 * c_off      # next symbol's first slot
    e_second = (p1 + pd) * c_on + p0 * c_off     # previous symbol's second slot
    dark = det.dark_count_rate_hz / src.clock_rate_hz

    # Each pulse lands in its own slot or spills one slot either way; distinct
    # pulses (and dark counts) are independent, so slot miss probabilities multiply.
    def miss(own, other, neighbour):
        return (1 - (1 - 2 * t) * own) * (1 - t * other) * (1 - t * neighbour) * (1 - dark)

    sifted = errors = 0.0
    for prob, right, wrong in ((p0, miss(c_on, c_off, e_second), miss(c_off, c_on, e_first)),
                               (p1, miss(c_on, c_off, e_first), miss(c_off, c_on, e_second))):
        hit_r, hit_w = 1.0 - right, 1.0 - wrong
        sifted += prob * (1.0 - right * wrong)
        errors += prob * (hit_w * right + 0.5 * hit_r * hit_w)
    rate = src.symbol_rate_hz
    return TimeBasisExpectation(rate * sifted, rate * errors, spd1_rate, sigma)


def expected_qber(src: SourceParams, ch: ChannelParams, rx: ReceiverParams, det: DetectorParams,
                  p_decoy: float = 0.01) -> float:
    return expected_time_basis(src, ch, rx, det, p_decoy).qber


@dataclass(frozen=True)
class MonitorExpectation:
    overlap_per_slot: float     # expected destructive-port counts per interfering slot
    side_per_slot: float        # ... per non-interfering slot
    overlap_fraction: float     # fraction of output slots that are interfering
    side_fraction: float

    @property
    def visibility(self) -> float:
        return visibility_from_counts(self.overlap_per_slot, self.side_per_slot, 1.0, 1.0)


def expected_monitor(src: SourceParams, ch: ChannelParams, rx: ReceiverParams, det: DetectorParams,
                     p_decoy: float = 0.01, V: float | None = None,
                     symbols: SymbolSequence | None = None) -> MonitorExpectation:
    V = src.source_visibility if V is None else V
    train = _received_train(src, ch, symbols or _iid(p_decoy))
    dark = det.dark_count_rate_hz / src.clock_rate_hz
    sums = {"overlap": [0.0, 0.0], "side": [0.0, 0.0]}
    for c in monitor_slot_classes(train, rx, V, Port.DESTRUCTIVE):
        if c.kind in sums:
            sums[c.kind][0] += c.weight * (float(click_probability(c.intensity, det.efficiency)) + dark)
            sums[c.kind][1] += c.weight
    (ov, w_ov), (side, w_side) = sums["overlap"], sums["side"]
    return MonitorExpectation(ov / w_ov if w_ov else 0.0, side / w_side if w_side else 0.0, w_ov, w_side)


def expected_visibility_measured(V_source: float, src: SourceParams, ch: ChannelParams,
                                 rx: ReceiverParams, det: DetectorParams, p_decoy: float = 0.01) -> float:
    """Expectation of the side-normalised visibility estimate.

    Dark counts and the leaked light in nominally empty slots pull it below
    ``V_source``; it tends to ``V_source`` as both vanish.
    """
    if not 0.0 <= V_source <= 1.0:
        raise ValueError(f"V_source must lie in [0, 1], got {V_source}")
    return expected_monitor(src, ch, rx, det, p_decoy, V=V_source).visibility


def predict_session(params: SystemParams, ch: ChannelParams, duration_s: float) -> SessionStats:
    """Expected tallies after ``duration_s`` seconds of acquisition."""
    src, rx, det, p = params.source, params.receiver, params.detector, params.decoy_probability
    slots = duration_s * src.clock_rate_hz
    tb = expected_time_basis(src, ch, rx, det, p)
    mon = expected_monitor(src, ch, rx, det, p)
    return SessionStats(
        n_sifted=tb.sifted_rate_hz * duration_s,
        n_errors=tb.error_rate_hz * duration_s,
        monitor_overlap_counts=mon.overlap_per_slot * mon.overlap_fraction * slots,
        monitor_side_counts=mon.side_per_slot * mon.side_fraction * slots,
        monitor_overlap_slots=mon.overlap_fraction * slots,
        monitor_side_slots=mon.side_fraction * slots,
        elapsed_slots=slots,
        spd1_counts=tb.spd1_rate_hz * duration_s,
        spd2_counts=expected_spd2_rate(src, ch, rx, det, p) * duration_s,
        clock_rate_hz=src.clock_rate_hz,
    )


def duration_for_counts(params: SystemParams, ch: ChannelParams, n_sifted: float) -> float:
    """Acquisition time needed to collect ``n_sifted`` time-basis key counts."""
    tb = expected_time_basis(params.source, ch, params.receiver, params.detector, params.decoy_probability)
    return n_sifted / tb.sifted_rate_hz if tb.sifted_rate_hz > 0 else math.inf


def predict_key_rate(params: SystemParams, ch: ChannelParams, n: float | None = None,
                     qber_override: float | None = None) -> tuple[KeyRateResult, SessionStats]:
    """Analytic key rate for a block of ``n`` sifted bits (default: the configured block size)."""
    n = params.security.block_size_n if n is None else n
    duration = duration_for_counts(params, ch, n)
    stats = predict_session(params, ch, duration)
    Q = stats.qber if qber_override is None else qber_override
    V = stats.visibility_est
    return evaluate_key_rate(n, Q, V, params.source.mu, duration, params.security), stats


__all__ = [
    "INJECTION_CALIBRATION", "MonitorExpectation", "TimeBasisExpectation", "duration_for_counts",
    "expected_monitor", "expected_occupancy", "expected_qber", "expected_spd1_rate", "expected_spd2_rate",
    "expected_time_basis", "expected_visibility_measured", "injection_visibility", "jitter_spill",
    "mu_for_attenuation", "predict_key_rate", "predict_session",
]
