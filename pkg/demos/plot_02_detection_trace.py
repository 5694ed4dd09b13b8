"""
Arrival-time histograms of the three detectors
==============================================

A short repeating frame is sent for a while and every click is folded onto
the frame. The data detector sees the pulse pattern; the two monitor ports
see the interferometer output, where neighbouring pulses interfere.
"""

import numpy as np

from cowqkd import parse_config
from cowqkd.harness import emit_trace

trace = emit_trace(parse_config(), attenuation_db=15.0, duration_s=1.0, seed=3)

kinds = trace.monitor_slot_kinds()
per_slot = np.column_stack([trace.slot_counts(w) for w in ("spd1", "destructive", "constructive")])

print("slot  pulses  spd1   destructive  constructive")
for i, (k, row) in enumerate(zip(kinds, per_slot)):
    print(f"{i:4d}  {k:6d}  {row[0]:5d}  {row[1]:11d}  {row[2]:12d}")

###############################################################################
# Where two pulses overlap, the constructive port collects about four times
# the counts of a slot holding a single pulse, and the destructive port
# stays nearly dark.
print(f"constructive overlap/side ratio: {trace.peak_ratio('constructive'):.2f}")
print(f"destructive  overlap/side ratio: {trace.peak_ratio('destructive'):.3f}")
