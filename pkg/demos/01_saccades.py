"""Walk through the saccade model: fit, simulate, detect.

    python3 demos/01_saccades.py
"""
import numpy as np

from blinkrecon.saccade import RIGHTWARD, detect_saccades, fit_saccade_params, saccade_summary, simulate_saccade
from blinkrecon.synth import SynthConfig, synthesize_trace

# a 100 px saccade with a 40 ms half-period and 10 px overshoot
g, omega = fit_saccade_params(100, 40, 10)
print(f"g = {g:.5f} per ms, omega = {omega:.5f} per ms")

P = simulate_saccade(100, 40, g, RIGHTWARD, (200, 300), tau_ms=2.0, duration_ms=200)
print("peak", P.max(), "at", 2.0 * P.argmax(), "ms")  # 310 px at t' = 40 ms
print("last sample", round(P[-1], 3))

# a short synthetic reading session, blink free
trace, truth, _ = synthesize_trace(SynthConfig(n_trials=10, blink_rate_per_min=0, rng_seed=1))
found = detect_saccades(trace)
print(len(truth), "true saccades,", len(found), "detected")

on = np.array([e.t_sb for e in found])
err = [min(abs(on - t.t_sb)) for t in truth]
print("median onset error", np.median(err), "ms")

s = saccade_summary(found, trace.tau_ms)
print({k: round(v, 3) for k, v in s.items()})
