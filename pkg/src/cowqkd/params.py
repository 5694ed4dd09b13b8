"""Parameter records shared by the simulator, the analytic model and the key-rate calculator.

Defaults reproduce the reference experiment: 2 GHz slot clock, 0.1 photons per
non-empty pulse, 29.4 dB extinction, a 90:10 monitor tap into a 3 dB-loss
one-slot-delay interferometer, and two nanowire detectors (34 % efficiency,
10 Hz dark counts).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

FIBER_LOSS_DB_PER_KM = 0.2


class ParameterError(ValueError):
    """Raised when a parameter lies outside its physical domain."""


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise ParameterError(message)


def db_to_transmission(db: float) -> float:
    return 10.0 ** (-db / 10.0)


@dataclass(frozen=True)
class SourceParams:
    """Transmitter settings.

    Attributes:
        mu: mean photon number of a non-empty pulse.
        extinction_ratio_db: occupied/empty intensity ratio; ``math.inf`` gives ideal empty slots.
        clock_rate_hz: slot rate (two slots per logical symbol).
        source_visibility: coherence between neighbouring pulses, in [0, 1].
    """

    mu: float = 0.1
    extinction_ratio_db: float = 29.4
    clock_rate_hz: float = 2.0e9
    source_visibility: float = 0.98

    def __post_init__(self) -> None:
        _check(self.mu >= 0.0, f"mu must be >= 0, got {self.mu}")
        _check(self.extinction_ratio_db > 0.0, f"extinction_ratio_db must be > 0, got {self.extinction_ratio_db}")
        _check(self.clock_rate_hz > 0.0, f"clock_rate_hz must be > 0, got {self.clock_rate_hz}")
        _check(0.0 <= self.source_visibility <= 1.0,
               f"source_visibility must lie in [0, 1], got {self.source_visibility}")

    @property
    def mu_leak(self) -> float:
        return self.mu * db_to_transmission(self.extinction_ratio_db)

    @property
    def slot_period_ps(self) -> float:
        return 1e12 / self.clock_rate_hz

    @property
    def symbol_rate_hz(self) -> float:
        return self.clock_rate_hz / 2.0


@dataclass(frozen=True)
class ChannelParams:
    attenuation_db: float = 0.0

    def __post_init__(self) -> None:
        _check(self.attenuation_db >= 0.0, f"attenuation_db must be >= 0, got {self.attenuation_db}")

    @property
    def fiber_equivalent_km(self) -> float:
        return self.attenuation_db / FIBER_LOSS_DB_PER_KM

    @property
    def transmission(self) -> float:
        return db_to_transmission(self.attenuation_db)


@dataclass(frozen=True)
class ReceiverParams:
    """Bob's passive splitter and monitoring interferometer.

    ``umzi_phase`` is the phase applied to the cross term; the default of pi makes
    the detected port fully destructive for equal coherent neighbours.
    """

    monitor_tap: float = 0.10
    umzi_loss_db: float = 3.0
    umzi_delay_slots: int = 1
    umzi_phase: float = math.pi

    def __post_init__(self) -> None:
        _check(0.0 <= self.monitor_tap < 1.0, f"monitor_tap must lie in [0, 1), got {self.monitor_tap}")
        _check(self.umzi_loss_db >= 0.0, f"umzi_loss_db must be >= 0, got {self.umzi_loss_db}")
        _check(int(self.umzi_delay_slots) == self.umzi_delay_slots and self.umzi_delay_slots >= 1,
               f"umzi_delay_slots must be a positive integer, got {self.umzi_delay_slots}")

    @property
    def monitor_scale(self) -> float:
        """Power fraction reaching the interferometer outputs (tap times insertion loss)."""
        return self.monitor_tap * db_to_transmission(self.umzi_loss_db)


@dataclass(frozen=True)
class DetectorParams:
    """Threshold single-photon detector with rate-dependent timing jitter.

    The jitter standard deviation rises linearly from ``jitter_sigma_low_ps`` at zero
    count rate to ``jitter_sigma_high_ps`` at ``jitter_saturation_rate_hz`` and stays
    there for higher rates.
    """

    efficiency: float = 0.34
    dark_count_rate_hz: float = 10.0
    jitter_sigma_low_ps: float = 40.0
    jitter_sigma_high_ps: float = 90.0
    jitter_saturation_rate_hz: float = 1.0e7
    dead_time_ns: float = 0.0
    digitizer_resolution_ps: float = 100.0

    def __post_init__(self) -> None:
        _check(0.0 <= self.efficiency <= 1.0, f"efficiency must lie in [0, 1], got {self.efficiency}")
        for name in ("dark_count_rate_hz", "jitter_sigma_low_ps", "jitter_sigma_high_ps", "dead_time_ns"):
            _check(getattr(self, name) >= 0.0, f"{name} must be >= 0, got {getattr(self, name)}")
        _check(self.jitter_saturation_rate_hz > 0.0,
               f"jitter_saturation_rate_hz must be > 0, got {self.jitter_saturation_rate_hz}")
        _check(self.digitizer_resolution_ps > 0.0,
               f"digitizer_resolution_ps must be > 0, got {self.digitizer_resolution_ps}")
        _check(self.jitter_sigma_high_ps >= self.jitter_sigma_low_ps,
               "jitter_sigma_high_ps must be >= jitter_sigma_low_ps")

    def jitter_sigma_ps(self, rate_hz: float) -> float:
        frac = min(1.0, max(0.0, rate_hz) / self.jitter_saturation_rate_hz)
        return self.jitter_sigma_low_ps + (self.jitter_sigma_high_ps - self.jitter_sigma_low_ps) * frac


@dataclass(frozen=True)
class SecurityParams:
    """Finite-key settings. ``epsilon_cor`` defaults to ``epsilon_qkd / 4``."""

    epsilon_qkd: float = 1e-10
    epsilon_cor: float | None = None
    f_ir: float = 1.2
    block_size_n: float = 2e7

    def __post_init__(self) -> None:
        _check(0.0 < self.epsilon_qkd < 1.0, f"epsilon_qkd must lie in (0, 1), got {self.epsilon_qkd}")
        if self.epsilon_cor is None:
            object.__setattr__(self, "epsilon_cor", self.epsilon_qkd / 4.0)
        _check(0.0 < self.epsilon_cor < 1.0, f"epsilon_cor must lie in (0, 1), got {self.epsilon_cor}")
        _check(self.f_ir >= 1.0, f"f_ir must be >= 1, got {self.f_ir}")
        _check(self.block_size_n >= 1, f"block_size_n must be >= 1, got {self.block_size_n}")

    @property
    def beta(self) -> float:
        return self.epsilon_qkd / 4.0


@dataclass(frozen=True)
class SystemParams:
    """Everything needed to describe one operating point except the channel loss."""

    source: SourceParams = field(default_factory=SourceParams)
    receiver: ReceiverParams = field(default_factory=ReceiverParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    security: SecurityParams = field(default_factory=SecurityParams)
    decoy_probability: float = 0.01

    def __post_init__(self) -> None:
        _check(0.0 <= self.decoy_probability <= 1.0,
               f"decoy_probability must lie in [0, 1], got {self.decoy_probability}")

    def to_dict(self) -> dict:
        return asdict(self)
