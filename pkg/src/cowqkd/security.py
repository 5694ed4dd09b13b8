"""Finite-key secure key length for the coherent-one-way protocol.

The extractable length for a block of ``n`` sifted bits with error rate ``Q`` and
monitor visibility ``V`` is::

    zeta = (2V - 1) exp(-mu) - 2 sqrt((1 - exp(-2 mu)) V (1 - V))
    l = n [1 - Q - (1 - Q) h((1 - zeta) / 2)]
        - 7 sqrt(n log2(1 / beta))
        - f_IR h(Q) n
        - log2(1 / (2 eps_cor beta^2))

with ``beta = eps_QKD / 4`` and ``h`` the binary entropy capped at 1 for
arguments above one half.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .params import SecurityParams


def binary_entropy(x: float) -> float:
    """Binary entropy in bits, truncated to 1 for ``x > 0.5``."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary_entropy argument must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x >= 0.5:
        return 1.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def zeta(V: float, mu: float) -> float:
    if not 0.0 <= V <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {V}")
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    return (2.0 * V - 1.0) * math.exp(-mu) - 2.0 * math.sqrt(-math.expm1(-2.0 * mu) * V * (1.0 - V))


def finite_size_penalty(n: float, sec: SecurityParams) -> float:
    """Key-length cost of statistical fluctuations and correctness, independent of Q and V."""
    beta = sec.beta
    return 7.0 * math.sqrt(n * math.log2(1.0 / beta)) + math.log2(1.0 / (2.0 * sec.epsilon_cor * beta ** 2))


def raw_key_length(n: float, Q: float, V: float, mu: float, sec: SecurityParams) -> float:
    """The key-length formula before clamping; may be negative."""
    if n < 1:
        raise ValueError(f"block size must be >= 1, got {n}")
    if not 0.0 <= Q <= 1.0:
        raise ValueError(f"QBER must lie in [0, 1], got {Q}")
    z = zeta(V, mu)
    # h is flat at 1 above one half, so arguments past 1 (zeta < -1) are equivalent.
    phase_term = binary_entropy(min(0.5 * (1.0 - z), 1.0))
    extractable = 1.0 - Q - (1.0 - Q) * phase_term
    return n * extractable - sec.f_ir * binary_entropy(Q) * n - finite_size_penalty(n, sec)


def secure_key_length(n: float, Q: float, V: float, mu: float, sec: SecurityParams) -> float:
    return max(0.0, raw_key_length(n, Q, V, mu, sec))


def secure_key_rate(key_length_bits: float, duration_s: float) -> float:
    if duration_s <= 0:
        raise ValueError(f"duration must be > 0, got {duration_s}")
    return key_length_bits / duration_s


@dataclass(frozen=True)
class KeyRateResult:
    zeta: float
    key_length_bits: float
    rate_bits_per_s: float
    extractable: bool
    n: float
    qber: float
    visibility: float
    mu: float
    duration_s: float
    security: SecurityParams

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_key_rate(n: float, Q: float, V: float, mu: float, duration_s: float,
                      sec: SecurityParams) -> KeyRateResult:
    raw = raw_key_length(n, Q, V, mu, sec)
    length = max(0.0, raw)
    return KeyRateResult(zeta=zeta(V, mu), key_length_bits=length,
                         rate_bits_per_s=secure_key_rate(length, duration_s),
                         extractable=raw > 0, n=n, qber=Q, visibility=V, mu=mu,
                         duration_s=duration_s, security=sec)
