"""
Monte Carlo against the analytic model
======================================

Collect a block of sifted bits by event sampling and set the measured counts
beside the expectations for the same acquisition time.
"""

import math

from cowqkd import ChannelParams, parse_config
from cowqkd.analytic import predict_session
from cowqkd.montecarlo import run_monte_carlo

cfg = parse_config()
for atten in (5.0, 20.0, 30.0):
    params = cfg.params_at(atten)
    ch = ChannelParams(atten)
    mc = run_monte_carlo(params, ch, target_counts=2e5, seed=11, workers=4)
    s = mc.stats
    e = predict_session(params, ch, s.duration_s)
    print(f"{atten:.0f} dB: {s.duration_s:.3f} s simulated in {mc.blocks} blocks")
    for name in ("spd1_counts", "n_errors", "monitor_side_counts", "monitor_overlap_counts"):
        got, want = getattr(s, name), getattr(e, name)
        print(f"   {name:24s} {got:10.0f}  expected {want:12.1f}  z={(got - want) / math.sqrt(want):+.2f}")
    print(f"   QBER {s.qber:.4%} (model {e.qber:.4%}), V {s.visibility_est:.4f} (model {e.visibility_est:.4f})")
