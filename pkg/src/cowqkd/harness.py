"""Configuration, attenuation sweeps, detection traces and reference comparison.

Config files are plain ``key = value`` lines (``#`` starts a comment). Keys are
the flat names in :data:`CONFIG_KEYS`; anything else is rejected.
"""
from __future__ import annotations

import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .analytic import mu_for_attenuation, predict_key_rate
from .montecarlo import run_monte_carlo
from .optics import route_and_detect
from .params import (ChannelParams, DetectorParams, ParameterError, ReceiverParams, SecurityParams,
                     SourceParams, SystemParams)
from .protocol import CowSymbol, SymbolSequence, encode_pulse_train
from .security import evaluate_key_rate

_SECTIONS = {
    "source": SourceParams,
    "receiver": ReceiverParams,
    "detector": DetectorParams,
    "security": SecurityParams,
}
CONFIG_KEYS: dict[str, str] = {f.name: sec for sec, cls in _SECTIONS.items() for f in fields(cls)}
CONFIG_KEYS.update({name: "run" for name in (
    "decoy_probability", "low_loss_mu", "low_loss_threshold_db", "mc_counts", "max_slots",
    "seed", "workers", "qber_override", "gate_ps")})


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved parameter set."""

    system: SystemParams = field(default_factory=SystemParams)
    low_loss_mu: float = 0.07
    low_loss_threshold_db: float = 3.0
    mc_counts: float = 1e6
    max_slots: int = 1 << 46
    seed: int = 1
    workers: int = 1
    qber_override: float | None = None
    gate_ps: float | None = None

    def params_at(self, attenuation_db: float) -> SystemParams:
        """System parameters with the mean photon number chosen for this loss."""
        src = self.system.source
        mu = mu_for_attenuation(attenuation_db, src.mu, self.low_loss_mu, self.low_loss_threshold_db)
        return replace(self.system, source=replace(src, mu=mu))

    def to_dict(self) -> dict:
        return asdict(self)

    def param_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def header(self) -> str:
        flat = {k: v for sec in self.to_dict()["system"].values() if isinstance(sec, dict) for k, v in sec.items()}
        flat.update({k: v for k, v in self.to_dict().items() if k != "system"})
        flat["decoy_probability"] = self.system.decoy_probability
        return "\n".join(f"# {k} = {flat[k]}" for k in sorted(flat))


def _coerce(key: str, value):
    if not isinstance(value, str):
        return value
    text = value.strip()
    if text.lower() in ("none", "null", ""):
        return None
    if key in ("umzi_delay_slots", "max_slots", "seed", "workers"):
        return int(float(text)) if "e" in text.lower() else int(text, 0)
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {value!r} as a number") from exc


def read_config_file(path) -> dict[str, str]:
    entries = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{os.fspath(path)}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            entries[key] = value
    return entries


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Resolve defaults, then file values, then ``overrides`` (highest precedence)."""
    raw = dict(read_config_file(path)) if path is not None else {}
    raw.update(overrides or {})
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    values = {k: _coerce(k, v) for k, v in raw.items()}
    by_section: dict[str, dict] = {s: {} for s in (*_SECTIONS, "run")}
    for k, v in values.items():
        by_section[CONFIG_KEYS[k]][k] = v
    try:
        parts = {s: cls(**by_section[s]) for s, cls in _SECTIONS.items()}
        run = by_section["run"]
        system = SystemParams(**parts, decoy_probability=run.pop("decoy_probability", 0.01))
        cfg = RunConfig(system=system, **run)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.mc_counts < 1 or cfg.workers < 1:
        raise ConfigError("mc_counts and workers must be >= 1")
    return cfg


SWEEP_COLUMNS = ("attenuation_db", "km_equiv", "mu_used", "rate_bps", "key_length", "Q", "V_est", "n",
                 "duration_s", "mode", "seed", "partial", "param_hash")


@dataclass(frozen=True)
class SweepRow:
    attenuation_db: float
    km_equiv: float
    mu_used: float
    rate_bps: float
    key_length: float
    Q: float
    V_est: float
    n: float
    duration_s: float
    mode: str
    seed: int
    partial: bool
    param_hash: str
    stats: dict = field(default_factory=dict, compare=False)

    def as_record(self) -> dict:
        return {c: getattr(self, c) for c in SWEEP_COLUMNS}


def _sweep_point(cfg: RunConfig, atten: float, mode: str, seed: int, counts: float | None) -> SweepRow:
    params = cfg.params_at(atten)
    ch = ChannelParams(atten)
    if mode == "analytic":
        result, stats = predict_key_rate(params, ch, qber_override=cfg.qber_override)
        partial = False
    elif mode == "mc":
        target = counts or cfg.mc_counts
        mc = run_monte_carlo(params, ch, target, seed, workers=cfg.workers, max_slots=cfg.max_slots,
                             gate_ps=cfg.gate_ps)
        stats, partial = mc.stats, mc.partial
        Q = stats.qber if cfg.qber_override is None else cfg.qber_override
        V = stats.visibility_est
        V = 0.0 if math.isnan(V) else V
        result = evaluate_key_rate(max(stats.n_sifted, 1), Q, V, params.source.mu,
                                   max(stats.duration_s, 1e-300), params.security)
    else:
        raise ConfigError(f"unknown mode {mode!r}; expected 'analytic' or 'mc'")
    return SweepRow(atten, ch.fiber_equivalent_km, params.source.mu, result.rate_bits_per_s,
                    result.key_length_bits, result.qber, result.visibility, result.n,
                    result.duration_s, mode, seed, partial, cfg.param_hash(), stats.to_dict())


def run_sweep(cfg: RunConfig, attenuations, mode: str = "analytic", seed: int | None = None,
              counts: float | None = None) -> list[SweepRow]:
    """One row per attenuation, sorted by attenuation whatever the completion order."""
    attenuations = sorted(float(a) for a in attenuations)
    if not attenuations:
        raise ConfigError("attenuation list is empty")
    seed = cfg.seed if seed is None else seed
    if cfg.workers > 1 and mode == "mc":
        # Parallelism lives inside each Monte Carlo session.
        return [_sweep_point(cfg, a, mode, seed, counts) for a in attenuations]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(lambda a: _sweep_point(cfg, a, mode, seed, counts), attenuations))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def rows_to_csv(rows: list[SweepRow], header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(header + "\n")
    buf.write(",".join(SWEEP_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row.as_record().values()) + "\n")
    return buf.getvalue()


def rows_to_json(rows: list[SweepRow], cfg: RunConfig | None = None) -> str:
    doc = {"rows": [dict(r.as_record(), stats=r.stats) for r in rows]}
    if cfg is not None:
        doc["config"] = cfg.to_dict()
    return json.dumps(doc, indent=2, sort_keys=True, default=repr)


# Symbols of the published detection-trace example.
TRACE_PATTERN = (CowSymbol.BIT0, CowSymbol.BIT0, CowSymbol.BIT1, CowSymbol.DECOY,
                 CowSymbol.BIT1, CowSymbol.BIT1, CowSymbol.BIT0, CowSymbol.BIT1)
TRACE_COLUMNS = ("bin", "time_ps", "slot", "spd1", "destructive", "constructive")
_TRACE_BLOCK_SLOTS = 1 << 30


@dataclass(frozen=True, eq=False)
class Trace:
    """Arrival-time histograms folded over a repeating symbol frame."""

    pattern: tuple
    resolution_ps: float
    slot_period_ps: float
    spd1: np.ndarray
    destructive: np.ndarray
    constructive: np.ndarray
    duration_s: float

    @property
    def bins_per_slot(self) -> int:
        return int(round(self.slot_period_ps / self.resolution_ps))

    def slot_counts(self, which: str) -> np.ndarray:
        return getattr(self, which).reshape(-1, self.bins_per_slot).sum(axis=1)

    def monitor_slot_kinds(self, delay: int = 1) -> np.ndarray:
        """Occupied contributors (0, 1, 2) of each interferometer output slot in the frame."""
        seq = SymbolSequence.from_symbols(self.pattern)
        slots = np.arange(seq.n_slots)
        occ = seq.occupancy_at(slots)
        return occ + np.roll(occ, delay)

    def peak_ratio(self, which: str = "constructive") -> float:
        """Mean interfering-peak height over mean single-contributor peak height."""
        counts = self.slot_counts(which)
        kinds = self.monitor_slot_kinds()
        return float(counts[kinds == 2].mean() / counts[kinds == 1].mean())

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(TRACE_COLUMNS) + "\n")
        per = self.bins_per_slot
        for i in range(self.spd1.size):
            buf.write(f"{i},{_fmt(i * self.resolution_ps)},{i // per},"
                      f"{self.spd1[i]},{self.destructive[i]},{self.constructive[i]}\n")
        return buf.getvalue()


def emit_trace(cfg: RunConfig, attenuation_db: float, duration_s: float, seed: int | None = None,
               pattern=TRACE_PATTERN) -> Trace:
    """Simulate all three outputs for a repeating pattern and fold the arrival times."""
    seed = cfg.seed if seed is None else seed
    params = cfg.params_at(attenuation_db)
    src, det = params.source, params.detector
    frame_slots = 2 * len(pattern)
    total = int(round(duration_s * src.clock_rate_hz / frame_slots)) * frame_slots
    alice = SymbolSequence.from_symbols(pattern, length=max(total // 2, 1))
    train = encode_pulse_train(alice, src)
    frame_ps = frame_slots * src.slot_period_ps
    n_bins = int(round(frame_ps / det.digitizer_resolution_ps))
    hist = [np.zeros(n_bins, np.int64) for _ in range(3)]
    block = _TRACE_BLOCK_SLOTS - _TRACE_BLOCK_SLOTS % frame_slots
    for b, start in enumerate(range(0, total, block)):
        recs = route_and_detect(train, ChannelParams(attenuation_db), params.receiver, det,
                                src.source_visibility, seed, src.clock_rate_hz, start,
                                min(block, total - start), block_index=b, with_constructive=True)
        for h, rec in zip(hist, recs):
            folded = np.floor(np.mod(rec.time_ps, frame_ps) / det.digitizer_resolution_ps).astype(np.int64)
            h += np.bincount(folded, minlength=n_bins)[:n_bins]
    return Trace(tuple(CowSymbol(s) for s in pattern), det.digitizer_resolution_ps, src.slot_period_ps,
                 *hist, duration_s=total / src.clock_rate_hz)


@dataclass(frozen=True)
class Anchor:
    name: str
    attenuation_db: float
    column: str
    reference: float
    low: float
    high: float


# Published operating points, each with its acceptance band.
REFERENCE_ANCHORS = (
    Anchor("key rate @1.5 dB", 1.5, "rate_bps", 4.57e6, 0.7 * 4.57e6, 1.3 * 4.57e6),
    Anchor("key rate @20 dB", 20.0, "rate_bps", 127.8e3, 0.7 * 127.8e3, 1.3 * 127.8e3),
    Anchor("key rate @30 dB", 30.0, "rate_bps", 6.38e3, 0.7 * 6.38e3, 1.3 * 6.38e3),
    Anchor("QBER @1.5 dB", 1.5, "Q", 0.0078, 0.005, 0.011),
    Anchor("QBER @20 dB", 20.0, "Q", 0.0015, 0.0, 0.0015),
    Anchor("QBER @30 dB", 30.0, "Q", 0.0015, 0.0, 0.0015),
    Anchor("visibility @10 dB", 10.0, "V_est", 0.9781, 0.973, 0.983),
    Anchor("duration for 2e7 counts @30 dB", 30.0, "duration_s", 600.0, 450.0, 750.0),
)
ANCHOR_ATTENUATIONS = tuple(sorted({a.attenuation_db for a in REFERENCE_ANCHORS}))


@dataclass(frozen=True)
class AnchorCheck:
    anchor: Anchor
    observed: float | None
    status: str    # "pass", "fail" or "skipped"

    @property
    def deviation(self) -> float | None:
        if self.observed is None:
            return None
        return (self.observed - self.anchor.reference) / self.anchor.reference


@dataclass(frozen=True)
class ReferenceReport:
    checks: tuple[AnchorCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def format(self) -> str:
        lines = [f"{'anchor':34s} {'reference':>12s} {'observed':>12s} {'deviation':>10s}  status"]
        for c in self.checks:
            obs = "-" if c.observed is None else f"{c.observed:.5g}"
            dev = "-" if c.deviation is None else f"{c.deviation:+.1%}"
            lines.append(f"{c.anchor.name:34s} {c.anchor.reference:12.5g} {obs:>12s} {dev:>10s}  {c.status.upper()}")
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def compare_reference(rows: list[SweepRow], anchors=REFERENCE_ANCHORS) -> ReferenceReport:
    """Check sweep rows against the published anchors; missing points are skipped."""
    by_atten = {r.attenuation_db: r for r in rows}
    checks = []
    for a in anchors:
        row = by_atten.get(a.attenuation_db)
        if row is None:
            checks.append(AnchorCheck(a, None, "skipped"))
            continue
        value = float(getattr(row, a.column))
        ok = a.low <= value <= a.high
        checks.append(AnchorCheck(a, value, "pass" if ok else "fail"))
    return ReferenceReport(tuple(checks))
