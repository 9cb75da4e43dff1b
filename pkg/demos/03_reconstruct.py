"""Fill blinks in a synthetic trace and score the artificial-blink grid.

    python3 demos/03_reconstruct.py
"""
from collections import Counter

import numpy as np

from blinkrecon.config import RunConfig
from blinkrecon.reconstruct import reconstruct_trace
from blinkrecon.saccade import detect_saccades
from blinkrecon.synth import SynthConfig, synthesize_trace
from blinkrecon.validate import artificial_blink_grid, blink_free_trials, compute_reading_measures, relative_shift

cfg = RunConfig(t_d_letters=24)
trace, truth, blinks = synthesize_trace(SynthConfig(n_trials=40, rng_seed=3, blink_rate_per_min=20))
print(len(blinks), "blinks,", int((~trace.valid).sum()), "missing samples")

filled, plans = reconstruct_trace(trace, cfg)
print(Counter(p.mode for p in plans))
p = plans[0]
print(f"first plan: l={p.blink.l} B={p.blink.B} mode={p.mode} theta={p.theta:.1f} q={p.q:.1f} A={p.A:.1f}")
assert np.array_equal(filled.p[trace.valid], trace.p[trace.valid])

# reading measures with blinky trials dropped vs the reconstructed trace
ex = compute_reading_measures(trace, detect_saccades(trace), trials=blink_free_trials(trace))
rec = compute_reading_measures(filled, detect_saccades(filled))
for k, v in relative_shift(ex.means, rec.means).items():
    print(f"  {k:30s} {ex.means[k]:9.3f} {rec.means[k]:9.3f}  shift {v:.3f}")

# sigma > 0: onset beats the midpoint guess; beta > 0: period beats the mean
clean, _, _ = synthesize_trace(SynthConfig(n_trials=20, blink_rate_per_min=0, rng_seed=4))
grid = artificial_blink_grid(clean, [20, 40, 60], [40.0, 120.0, 200.0], RunConfig())
np.set_printoptions(precision=3, suppress=True)
print("sigma\n", grid.sigma())
print("beta\n", grid.beta())
