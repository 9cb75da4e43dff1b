"""Synthetic reading traces with known saccades and injected blinks.

Each trial is one line of text.  The simulated reader alternates fixations
(constant position plus Gaussian jitter) with oscillator saccades between
words, with occasional skips, refixations of long words and regressions.
Blinks are injected afterwards by invalidating windows of samples.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .saccade import LEFTWARD, RIGHTWARD, SaccadeEvent, fit_saccade_params, saccade_displacement, to_screen
from .trace import BlinkEvent, EyeTrace, detect_blinks


@dataclass(frozen=True)
class SynthConfig:
    n_trials: int = 40
    fixations_per_trial: int = 10
    fixation_duration_range_ms: tuple[float, float] = (150.0, 350.0)
    saccade_amplitude_range_px: tuple[float, float] = (40.0, 160.0)
    saccade_period_range_ms: tuple[float, float] = (20.0, 40.0)
    fixation_noise_std_px: float = 0.5
    blink_rate_per_min: float = 6.97
    blink_duration_range_ms: tuple[float, float] = (50.0, 150.0)
    rng_seed: int = 0
    tau_ms: float = 2.0
    overshoot_ratio_range: tuple[float, float] = (0.05, 0.15)
    # longer saccades get longer periods, as in the main sequence
    main_sequence: bool = True
    # None: blinks anywhere; otherwise this fraction covers a saccade onset
    # and the rest lie strictly inside fixations
    blink_saccade_fraction: float | None = None
    regression_prob: float = 0.1
    letter_px: float = 10.0
    word_length_range: tuple[int, int] = (2, 11)
    line_start_px: float = 60.0

    def __post_init__(self):
        for name in ("fixation_duration_range_ms", "saccade_amplitude_range_px",
                     "saccade_period_range_ms", "blink_duration_range_ms",
                     "overshoot_ratio_range", "word_length_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: min > max")
        if self.n_trials < 1 or self.fixations_per_trial < 1:
            raise ValueError("configuration produces zero-length trials")
        if self.fixation_duration_range_ms[1] <= 0:
            raise ValueError("configuration produces zero-length trials")
        if self.blink_saccade_fraction is not None and not 0 <= self.blink_saccade_fraction <= 1:
            raise ValueError("blink_saccade_fraction must lie in [0, 1]")


def _word_line(cfg: SynthConfig, rng: np.random.Generator, n_words: int):
    lo, hi = cfg.word_length_range
    lengths = rng.integers(lo, hi + 1, size=n_words)
    boxes, x = [], cfg.line_start_px
    for n in lengths:
        w = n * cfg.letter_px
        boxes.append((x, x + w))
        x += w + cfg.letter_px
    return boxes, lengths


def _scanpath(cfg: SynthConfig, rng: np.random.Generator, boxes, lengths):
    """Landing positions (px) and fixated word index for each fixation."""
    def land(w):
        l, r = boxes[w]
        return l + (r - l) * rng.uniform(0.25, 0.5) + rng.normal(0, 0.5 * cfg.letter_px)

    amin, amax = cfg.saccade_amplitude_range_px
    pos = [land(0)]
    word, refixated = 0, False
    for _ in range(cfg.fixations_per_trial - 1):
        u = rng.uniform()
        if u < cfg.regression_prob and word > 0:
            word = max(0, word - int(rng.integers(1, 3)))
            refixated = False
            target = land(word)
        elif lengths[word] >= 8 and not refixated and u < cfg.regression_prob + 0.35:
            refixated = True
            target = pos[-1] + 0.4 * lengths[word] * cfg.letter_px
        else:
            step = 1
            if word + 1 < len(boxes) and lengths[word + 1] <= 3 and rng.uniform() < 0.5:
                step = 2
            elif rng.uniform() < 0.1:
                step = 2
            word = min(word + step, len(boxes) - 1)
            refixated = False
            target = land(word)
        jump = target - pos[-1]
        sign = 1.0 if jump >= 0 else -1.0
        pos.append(pos[-1] + sign * float(np.clip(abs(jump), amin, amax)))
    return pos


def _period(cfg: SynthConfig, rng, A: float) -> float:
    lo, hi = cfg.saccade_period_range_ms
    if not cfg.main_sequence or hi == lo:
        return float(rng.uniform(lo, hi))
    amin, amax = cfg.saccade_amplitude_range_px
    u = (A - amin) / (amax - amin) if amax > amin else 0.5
    u = float(np.clip(u + rng.normal(0, 0.15), 0.0, 1.0))
    return lo + (hi - lo) * u


def synthesize_trace(cfg: SynthConfig):
    """Generate (trace, true saccades, blinks).

    The returned trace has word boxes attached.  Ground truth lists every
    saccade, including those later hidden under a blink.  Output depends only
    on ``cfg``.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    tau = cfg.tau_ms
    chunks, trials, all_boxes, truth = [], [], [], []
    fix_spans = []  # (start, stop) sample ranges of settled fixations
    sacc_spans = []  # (onset, onset + t0) in samples
    start = 0
    for k in range(cfg.n_trials):
        boxes, lengths = _word_line(cfg, rng, n_words=2 * cfg.fixations_per_trial + 4)
        pos = _scanpath(cfg, rng, boxes, lengths)
        fix_ms = rng.uniform(*cfg.fixation_duration_range_ms, size=len(pos))
        n_fix0 = max(1, int(round(fix_ms[0] / tau)))
        segs = [np.full(n_fix0, pos[0])]
        fix_spans.append((start, start + n_fix0))
        cursor = start + n_fix0
        for j in range(1, len(pos)):
            A = abs(pos[j] - pos[j - 1])
            direction = RIGHTWARD if pos[j] > pos[j - 1] else LEFTWARD
            t0 = _period(cfg, rng, A)
            ratio = rng.uniform(*cfg.overshoot_ratio_range)
            g, omega = fit_saccade_params(A, t0, ratio * A)
            settle = int(math.ceil(4 * t0 / tau))
            n_fix = max(1, int(round(fix_ms[j] / tau)))
            n = settle + n_fix
            X = saccade_displacement(np.arange(n) * tau, A, t0, g)
            segs.append(to_screen(X, A, direction, pos[j - 1], pos[j]))
            truth.append(
                SaccadeEvent(
                    t_sb=cursor * tau, t_0=t0, t_fb=(cursor + settle) * tau, A=A,
                    delta=ratio * A, g=g, omega=omega, direction=direction, trial=k,
                )
            )
            sacc_spans.append((cursor, cursor + int(math.ceil(t0 / tau)) + 1))
            fix_spans.append((cursor + settle, cursor + n))
            cursor += n
        p = np.concatenate(segs)
        chunks.append(p)
        trials.append((start, start + p.size))
        last_word = max(_assign_word(boxes, x) for x in pos)
        all_boxes.append(tuple(boxes[: last_word + 1]))
        start += p.size

    p = np.concatenate(chunks)
    p = p + rng.normal(0.0, cfg.fixation_noise_std_px, size=p.size) if cfg.fixation_noise_std_px > 0 else p
    valid = np.ones(p.size, dtype=bool)
    _inject_blinks(cfg, rng, valid, trials, fix_spans, sacc_spans)
    p = np.where(valid, p, 0.0)
    trace = EyeTrace(p=p, valid=valid, tau_ms=tau, trials=tuple(trials), word_boxes=tuple(all_boxes))
    return trace, truth, detect_blinks(trace)


def _assign_word(boxes, x):
    centers = np.array([(l + r) / 2 for l, r in boxes])
    inside = [i for i, (l, r) in enumerate(boxes) if l <= x <= r]
    return inside[0] if inside else int(np.argmin(np.abs(centers - x)))


def _inject_blinks(cfg, rng, valid, trials, fix_spans, sacc_spans, margin=40):
    """Invalidate blink windows in place.

    The blink count is the expected count ``rate * duration`` rounded, so the
    realised rate matches the configured one.  ``margin`` keeps valid context
    between blinks and trial edges.
    """
    tau = cfg.tau_ms
    total_min = valid.size * tau / 60000.0
    n_blinks = int(round(cfg.blink_rate_per_min * total_min))
    if n_blinks == 0:
        return
    bmin, bmax = (int(round(x / tau)) for x in cfg.blink_duration_range_ms)
    bmin = max(bmin, 1)
    trial_bounds = np.array(trials)
    taken = np.zeros(valid.size, dtype=bool)

    def ok(a, b):
        k = np.searchsorted(trial_bounds[:, 0], a, side="right") - 1
        ta, tb = trial_bounds[k]
        return a - margin >= ta and b + margin <= tb and not taken[max(a - margin, 0): b + margin].any()

    n_sacc = 0
    if cfg.blink_saccade_fraction is not None:
        n_sacc = int(round(cfg.blink_saccade_fraction * n_blinks))
    placed = 0
    for attempt in range(200 * n_blinks):
        if placed == n_blinks:
            break
        B = int(rng.integers(bmin, bmax + 1))
        if cfg.blink_saccade_fraction is None:
            a = int(rng.integers(0, valid.size - B))
        elif placed < n_sacc:
            s, e = sacc_spans[int(rng.integers(len(sacc_spans)))]
            a = int(rng.integers(s - B + 1, e))
        else:
            s, e = fix_spans[int(rng.integers(len(fix_spans)))]
            if e - s < B + 2 * 5:
                continue
            a = int(rng.integers(s + 5, e - B - 5 + 1))
        b = a + B
        if a < 0 or b > valid.size or not ok(a, b):
            continue
        valid[a:b] = False
        taken[a:b] = True
        placed += 1
