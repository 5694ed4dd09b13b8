"""Reproducible random streams.

Two generators are used:

* SplitMix64 as a counter-based generator: element ``k`` of the stream keyed by
  ``seed`` is ``mix(seed + (k + 1) * GAMMA)``, so any index can be evaluated
  without generating its predecessors. Alice's symbols come from here, which lets
  the simulator look up the symbol behind a click directly.
* numpy's PCG64 seeded through ``SeedSequence([seed, *stream_index])`` for the
  Monte Carlo sampling. Each block of slots and each detector gets its own stream,
  so results do not depend on how work is split between workers.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / (1 << 53)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, index) -> np.ndarray:
    """Return SplitMix64 outputs number ``index`` (0-based) of the stream started at ``seed``."""
    idx = np.asarray(index, dtype=np.int64).astype(np.uint64)
    base = np.uint64(int(seed) & MASK64)
    with np.errstate(over="ignore"):
        return _mix(base + (idx + np.uint64(1)) * _GAMMA)


def uniform_at(seed: int, index) -> np.ndarray:
    """Uniform doubles in [0, 1) from the top 53 bits of :func:`splitmix64`."""
    return (splitmix64(seed, index) >> np.uint64(11)).astype(np.float64) * _INV_2_53


def stream(seed: int, *index: int) -> np.random.Generator:
    """Independent PCG64 generator for the stream ``(seed, *index)``."""
    entropy = [int(seed) & MASK64, *(int(i) for i in index)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
