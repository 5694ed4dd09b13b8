"""Coherent-one-way QKD: pulse-train simulation, detection statistics and finite-key rates."""
from .analytic import (expected_qber, expected_spd1_rate, expected_visibility_measured, injection_visibility,
                       predict_key_rate, predict_session)
from .harness import compare_reference, emit_trace, parse_config, run_sweep
from .montecarlo import run_monte_carlo
from .optics import (DetectionRecordSet, Port, attenuate, build_monitor_timeline, route_and_detect,
                     simulate_detections, umzi_slot_intensity)
from .params import (ChannelParams, DetectorParams, ParameterError, ReceiverParams, SecurityParams,
                     SourceParams, SystemParams)
from .postprocess import (SessionStats, accumulate_until, estimate_visibility, fringe_visibility, sift)
from .protocol import (CowSymbol, PulseTrain, SymbolSequence, encode_pulse_train, expected_occupancy,
                       generate_pattern)
from .security import KeyRateResult, binary_entropy, secure_key_length, secure_key_rate, zeta

__version__ = "0.1.0"
