"""Block-wise Monte Carlo acquisition sessions.

The slot timeline is cut into fixed-size blocks; block ``b`` draws from the
random streams ``(seed, b, detector)``. Blocks are evaluated in batches (in a
thread pool when ``workers > 1``) and merged strictly in block order until the
sifted-count target is met, so the result is the same for every worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .analytic import expected_time_basis
from .optics import route_and_detect
from .params import ChannelParams, SystemParams
from .postprocess import SessionStats, monitor_stats, sift
from .protocol import SymbolSequence, encode_pulse_train, generate_pattern

MIN_BLOCK_SLOTS = 1 << 16
MAX_BLOCK_SLOTS = 1 << 34
DEFAULT_MAX_SLOTS = 1 << 46


@dataclass(frozen=True)
class MonteCarloResult:
    stats: SessionStats
    target_counts: float
    blocks: int
    block_slots: int
    partial: bool


def choose_block_slots(params: SystemParams, ch: ChannelParams, target_counts: float,
                       blocks_per_target: int = 16) -> int:
    """Even block length giving roughly ``blocks_per_target`` blocks per session."""
    tb = expected_time_basis(params.source, ch, params.receiver, params.detector, params.decoy_probability)
    per_slot = tb.sifted_rate_hz / params.source.clock_rate_hz
    if per_slot <= 0:
        return MAX_BLOCK_SLOTS
    slots = target_counts / per_slot / blocks_per_target
    slots = int(min(MAX_BLOCK_SLOTS, max(MIN_BLOCK_SLOTS, math.ceil(slots))))
    return slots + (slots % 2)


def simulate_block(params: SystemParams, ch: ChannelParams, alice: SymbolSequence, seed: int,
                   block_index: int, block_slots: int, gate_ps: float | None = None) -> SessionStats:
    src = params.source
    train = encode_pulse_train(alice, src)
    spd1, spd2 = route_and_detect(train, ch, params.receiver, params.detector, src.source_visibility,
                                  seed, clock_rate_hz=src.clock_rate_hz,
                                  start_slot=block_index * block_slots, n_slots=block_slots,
                                  block_index=block_index)
    _, time_basis = sift(alice, spd1, seed, gate_ps)
    return time_basis.merge(monitor_stats(spd2, alice, params.receiver.umzi_delay_slots))


def run_monte_carlo(params: SystemParams, ch: ChannelParams, target_counts: float, seed: int,
                    workers: int = 1, max_slots: int = DEFAULT_MAX_SLOTS,
                    block_slots: int | None = None, symbols: SymbolSequence | None = None,
                    gate_ps: float | None = None) -> MonteCarloResult:
    """Simulate until ``target_counts`` sifted bits are collected or ``max_slots`` is spent."""
    block_slots = block_slots or choose_block_slots(params, ch, target_counts)
    if block_slots % 2:
        raise ValueError("block_slots must be even so blocks align with symbols")
    alice = symbols or generate_pattern(seed, max_slots // 2, params.decoy_probability)
    n_blocks_max = max(1, alice.n_slots // block_slots)
    batch = max(1, int(workers))

    def run(b: int) -> SessionStats:
        return simulate_block(params, ch, alice, seed, b, block_slots, gate_ps)

    total = SessionStats(clock_rate_hz=params.source.clock_rate_hz)
    done = 0
    pool = ThreadPoolExecutor(max_workers=batch) if batch > 1 else None
    try:
        while done < n_blocks_max:
            ids = range(done, min(done + batch, n_blocks_max))
            parts = list(pool.map(run, ids)) if pool else [run(b) for b in ids]
            for part in parts:
                total = total.merge(part)
                done += 1
                if total.n_sifted >= target_counts:
                    return MonteCarloResult(total, target_counts, done, block_slots, False)
    finally:
        if pool:
            pool.shutdown()
    return MonteCarloResult(total, target_counts, done, block_slots, True)
