"""
Why the visibility matters
==========================

The monitoring line bounds what an eavesdropper can learn. Lower coherence
shows up as counts in the dark port and eats into the key.
"""

import numpy as np

from cowqkd import ChannelParams, DetectorParams, ReceiverParams, SecurityParams, SourceParams
from cowqkd.analytic import expected_visibility_measured
from cowqkd.security import secure_key_length, zeta

src, rx, det, sec = SourceParams(), ReceiverParams(), DetectorParams(), SecurityParams()

print(" V_source  V_measured   zeta    key bits per 2e7")
for v in np.linspace(0.90, 1.0, 6):
    vm = expected_visibility_measured(v, src, ChannelParams(10.0), rx, det)
    print(f"  {v:.3f}     {vm:.4f}   {zeta(vm, src.mu):+.4f}   {secure_key_length(2e7, 0.001, vm, src.mu, sec):12.0f}")

###############################################################################
# The bound crosses zero at a visibility that depends on mu; below it no key
# survives privacy amplification whatever the error rate.
from scipy.optimize import brentq

for mu in (0.05, 0.1, 0.2):
    print(f"mu = {mu}: zeta = 0 at V = {brentq(lambda v: zeta(v, mu), 0.5, 1.0):.4f}")
