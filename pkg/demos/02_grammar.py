"""Letters, digram tables and the entropy horizon on synthetic data.

    python3 demos/02_grammar.py
"""
import numpy as np

from blinkrecon.grammar import block_entropy, classify, train_digrams
from blinkrecon.saccade import detect_saccades
from blinkrecon.symbolic import encode, extract_saccade_windows
from blinkrecon.synth import SynthConfig, synthesize_trace

print(encode([1, 2, -1, -3, 2]).letters)  # 0123

trace, _, _ = synthesize_trace(SynthConfig(n_trials=60, blink_rate_per_min=0, rng_seed=2))
saccades = [e for e in detect_saccades(trace) if not e.truncated]

pre, post, skipped = extract_saccade_windows(trace, saccades, 24)
print(len(pre), "pre and", len(post), "post windows; skipped", skipped)
print("one post window:", post[0].letters)

# single letters first: rises repeat more often after an onset than before it
p1, q1 = train_digrams(pre, 1, "pre"), train_digrams(post, 1, "post")
print("P(0 -> 0): pre %.3f  post %.3f" % (p1.prob("0", "0"), q1.prob("0", "0")))

pre_t, post_t = train_digrams(pre, 2, "pre"), train_digrams(post, 2, "post")
kinds = [classify(s, pre_t, post_t).kind for s in post[:200]]
print("post windows classified:", {k: kinds.count(k) for k in sorted(set(kinds))})

pre60, post60, _ = extract_saccade_windows(trace, saccades, 60)
prof = block_entropy(post60, range(2, 61, 2))
for t, h in prof.points[:8]:
    print(f"  t_d={t:2d}  H={h:6.3f} bits")
print("horizon L =", prof.L, "letters  (log2 N =", round(np.log2(len(post60)), 2), "bits caps H)")
