"""Blink gap reconstruction.

For every interior blink the plan decides whether a saccade happened inside
the gap and, if so, when it started and how long its half-period was:

* a small jump between the last sample before (P_c) and the first after
  (P_o) means no saccade; the gap is held flat;
* otherwise the t_d-letter contexts on both sides are classified against the
  pre- and post-saccade grammars, and the spliced sequence s_c2.s_o2 is
  searched for the longest run of '0' (rightward) or '2' (leftward);
* the run's offset and length, rescaled from t_d letters to B samples, give
  the onset and half-period; without a run the saccade is centred in the gap
  with the mean half-period.

The gap is then filled with P_c up to the onset followed by the oscillator
saccade from P_c towards P_o.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import RunConfig
from .grammar import POST_LIKE, PRE_LIKE, DigramTable, Verdict, classify, train_digrams
from .saccade import LEFTWARD, RIGHTWARD, SaccadeEvent, detect_saccades, saccade_displacement, saccade_summary, to_screen
from .symbolic import ContextError, WordPair, extract_blink_windows, extract_saccade_windows
from .trace import BlinkEvent, EyeTrace, detect_blinks

logger = logging.getLogger(__name__)

FLAT = "flat"
GRAMMAR_RUN = "grammar_run"
MIDPOINT = "midpoint_fallback"

# shortest half-period we render; with theta = B - q this leaves at least one
# sample after the onset, so the end condition can always be met
MIN_Q_SAMPLES = 2.0


@dataclass(frozen=True)
class Run:
    letter: str
    start: int  # offset inside s_c2.s_o2
    length: int
    searched_in: str  # "s_c2", "s_o2" or "joint"


@dataclass(frozen=True)
class ReconstructionPlan:
    blink: BlinkEvent
    mode: str
    P_c: float
    P_o: float
    theta: float  # samples from blink start to onset
    q: float  # half-period in samples
    A: float
    g: float = 0.0
    delta: float = 0.0
    tau_ms: float = 2.0
    verdict_pre: Verdict | None = None
    verdict_post: Verdict | None = None
    run: Run | None = None

    @property
    def direction(self) -> str:
        return RIGHTWARD if self.P_o > self.P_c else LEFTWARD

    @property
    def t_s(self) -> float | None:
        """Absolute onset time (ms) of the reconstructed saccade."""
        if self.mode == FLAT:
            return None
        return (self.blink.l + self.theta) * self.tau_ms

    def as_dict(self) -> dict:
        def verdict(v):
            return None if v is None else {"kind": v.kind, "dp_pre": v.dp_pre, "dp_post": v.dp_post, "dd": v.dd}

        run = None
        if self.run is not None:
            run = {"letter": self.run.letter, "start": self.run.start, "length": self.run.length,
                   "searched_in": self.run.searched_in}
        return {
            "l": self.blink.l,
            "B": self.blink.B,
            "trial": self.blink.trial,
            "mode": self.mode,
            "verdicts": {"pre": verdict(self.verdict_pre), "post": verdict(self.verdict_post)},
            "run": run,
            "theta": self.theta,
            "q": self.q,
            "t_s_ms": self.t_s,
            "A": self.A,
            "g": self.g,
        }


def longest_run(letters: str, letter: str, min_len: int) -> tuple[int, int] | None:
    """(start, length) of the longest run of ``letter``; earliest wins ties."""
    best = None
    i, n = 0, len(letters)
    while i < n:
        if letters[i] != letter:
            i += 1
            continue
        j = i
        while j < n and letters[j] == letter:
            j += 1
        if j - i >= min_len and (best is None or j - i > best[1]):
            best = (i, j - i)
        i = j
    return best


def find_run(s_c2: str, s_o2: str, letter: str, v_pre: Verdict | None, v_post: Verdict | None,
             min_len: int = 4) -> Run | None:
    """Search s_c2 (pre-like), then s_o2 (post-like), then the spliced pair."""
    h = len(s_c2)
    searches = []
    if v_pre is not None and v_pre.kind == PRE_LIKE:
        searches.append(("s_c2", s_c2, 0))
    if v_post is not None and v_post.kind == POST_LIKE:
        searches.append(("s_o2", s_o2, h))
    searches.append(("joint", s_c2 + s_o2, 0))
    for name, letters, offset in searches:
        hit = longest_run(letters, letter, min_len)
        if hit is not None:
            return Run(letter, offset + hit[0], hit[1], name)
    return None


def rescale_run(run: Run, B: int, t_d: int) -> tuple[float, float]:
    """(theta, q) in samples from the run's letter offset and length, before clamping."""
    return run.start * B / t_d, run.length * B / t_d


def _envelope(g: float, A: float, omega: float, T: float) -> float:
    return A * math.exp(-g * T) * math.sqrt(1.0 + (g / omega) ** 2)


def _bisect(f, lo: float, hi: float, iters: int = 60) -> float:
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid):
            hi = mid
        else:
            lo = mid
    return hi


def landing_damping(A: float, q: float, tail: float, tau_ms: float, g_rule: float, residual: float) -> float:
    """Smallest damping >= g_rule whose envelope is within ``residual`` after ``tail`` samples.

    The envelope of A e^{-gt}(cos wt + g/w sin wt) is A e^{-gt} sqrt(1 + (g/w)^2).
    Returns g_rule unchanged when it already lands, or when tail == 0.
    """
    T = tail * tau_ms
    omega = math.pi / (q * tau_ms)
    h = lambda g: _envelope(g, A, omega, T)
    if T <= 0 or h(g_rule) <= residual:
        return g_rule
    ok = lambda g: h(g) <= residual
    disc = 1.0 - 4.0 * (omega * T) ** 2
    if disc >= 0:
        # h falls to a local minimum at g1, rises to g2, then falls for good
        g1 = (1.0 - math.sqrt(disc)) / (2.0 * T)
        g2 = (1.0 + math.sqrt(disc)) / (2.0 * T)
        if g_rule < g1 and ok(g1):
            return _bisect(ok, g_rule, g1)
        lo = max(g_rule, g2)
    else:
        lo = g_rule
    hi = max(lo, 1e-6) * 2
    while not ok(hi):
        hi *= 2
        if hi > 1e12:
            return hi
    return _bisect(ok, lo, hi)


def plan_blink(
    blink: BlinkEvent,
    trace: EyeTrace,
    pre_table: DigramTable | None,
    post_table: DigramTable | None,
    t_d: int,
    mean_t0: float,
    config: RunConfig | None = None,
) -> ReconstructionPlan:
    l, B = blink.l, blink.B
    a, b = trace.trials[blink.trial]
    if l - 1 < a or l + B >= b or not (trace.valid[l - 1] and trace.valid[l + B]):
        raise ValueError("blink has no valid sample on one side")
    try:
        pre_pair, post_pair = extract_blink_windows(trace, blink, t_d)
    except ContextError:
        pre_pair = post_pair = None
    return plan_from_context(blink, float(trace.p[l - 1]), float(trace.p[l + B]), pre_pair, post_pair,
                             pre_table, post_table, t_d, mean_t0, trace.tau_ms, config)


def plan_from_context(
    blink: BlinkEvent,
    P_c: float,
    P_o: float,
    pre_pair: WordPair | None,
    post_pair: WordPair | None,
    pre_table: DigramTable | None,
    post_table: DigramTable | None,
    t_d: int,
    mean_t0: float,
    tau: float,
    config: RunConfig | None = None,
    damping: bool = True,
) -> ReconstructionPlan:
    """Planning once the boundary positions and context words are known.

    ``pre_pair``/``post_pair`` may be None when the context windows are
    unavailable; the mode is then decided by amplitude alone.  With
    ``damping=False`` g and delta are left at zero (timing-only callers).
    """
    cfg = config or RunConfig()
    B = blink.B
    A = abs(P_o - P_c)
    common = dict(blink=blink, P_c=P_c, P_o=P_o, A=A, tau_ms=tau)
    if A <= cfg.flat_threshold_px:
        return ReconstructionPlan(mode=FLAT, theta=float(B), q=0.0, **common)

    letter = "0" if P_o > P_c else "2"
    v_pre = v_post = run = None
    if pre_pair is not None and post_pair is not None:
        if pre_table is not None and post_table is not None:
            v_pre = classify(pre_pair, pre_table, post_table)
            v_post = classify(post_pair, pre_table, post_table)
        run = find_run(pre_pair.second, post_pair.first, letter, v_pre, v_post, cfg.run_min_letters)

    if run is not None:
        theta, q = rescale_run(run, B, t_d)
        mode = GRAMMAR_RUN
    else:
        q = min(mean_t0 / tau, float(B))
        theta = (B - q) / 2.0
        mode = MIDPOINT
    q = max(q, min(MIN_Q_SAMPLES, float(B)))
    if theta + q > B:
        theta = B - q

    if not damping:
        return ReconstructionPlan(mode=mode, theta=theta, q=q, verdict_pre=v_pre, verdict_post=v_post,
                                  run=run, **common)
    g_rule = max(math.log(A / cfg.end_residual_px) / (cfg.end_periods * q * tau), cfg.g_min_per_ms)
    tail = (B - 1) - max(theta, 0.0)
    g = landing_damping(A, q, tail, tau, g_rule, cfg.end_residual_px)
    delta = A * math.exp(-g * q * tau)
    return ReconstructionPlan(mode=mode, theta=theta, q=q, g=g, delta=delta,
                              verdict_pre=v_pre, verdict_post=v_post, run=run, **common)


def render_plan(plan: ReconstructionPlan, trace: EyeTrace | None = None) -> np.ndarray:
    """B samples filling the gap."""
    B = plan.blink.B
    if plan.mode == FLAT:
        out = np.full(B, plan.P_c)
        if B >= 2:
            out[-1] = plan.P_o
        return out
    i = np.arange(B, dtype=float)
    t_prime = (i - plan.theta) * plan.tau_ms
    out = np.full(B, plan.P_c)
    moving = t_prime >= 0
    X = saccade_displacement(t_prime[moving], plan.A, plan.q * plan.tau_ms, plan.g)
    out[moving] = to_screen(X, plan.A, plan.direction, plan.P_c, plan.P_o)
    return out


@dataclass
class Grammar:
    """Everything the planner needs that is learned from blink-free data."""

    pre: DigramTable | None
    post: DigramTable | None
    mean_t0: float
    saccades: list[SaccadeEvent] = field(default_factory=list)


def learn_grammar(trace: EyeTrace, config: RunConfig | None = None,
                  saccades: Sequence[SaccadeEvent] | None = None, t_d: int | None = None) -> Grammar:
    """Detect saccades (unless given) and train pre/post digrams on their windows."""
    cfg = config or RunConfig()
    t_d = t_d or cfg.t_d_letters
    if saccades is None:
        saccades = detect_saccades(trace, threshold=cfg.saccade_threshold_px)
    usable = [e for e in saccades if not e.truncated]
    pre, post, _ = extract_saccade_windows(trace, usable, t_d)
    summary = saccade_summary(usable, trace.tau_ms)
    mean_t0 = summary.get("mean_t0_ms", 30.0)
    pre_t = train_digrams(pre, cfg.D_letters, "pre") if pre else None
    post_t = train_digrams(post, cfg.D_letters, "post") if post else None
    return Grammar(pre_t, post_t, mean_t0, list(saccades))


def reconstruct_trace(trace: EyeTrace, config: RunConfig | None = None, grammar: Grammar | None = None):
    """Fill every interior blink; returns (filled trace, plans).

    Originally valid samples are left untouched.  A blink that cannot be
    planned is logged and left as a gap.
    """
    cfg = config or RunConfig()
    if grammar is None:
        grammar = learn_grammar(trace, cfg)
    p = trace.p.copy()
    valid = trace.valid.copy()
    rec = np.zeros(len(trace), dtype=bool) if trace.reconstructed is None else trace.reconstructed.copy()
    plans = []
    for blink in detect_blinks(trace):
        try:
            plan = plan_blink(blink, trace, grammar.pre, grammar.post, cfg.t_d_letters, grammar.mean_t0, cfg)
        except ValueError as exc:
            logger.warning("blink at %d not reconstructed: %s", blink.l, exc)
            continue
        p[blink.l:blink.stop] = render_plan(plan, trace)
        valid[blink.l:blink.stop] = True
        rec[blink.l:blink.stop] = True
        plans.append(plan)
    return trace.replace(p=p, valid=valid, reconstructed=rec), plans


def write_plans(plans: Sequence[ReconstructionPlan]) -> str:
    return json.dumps([pl.as_dict() for pl in plans], indent=1, sort_keys=True) + "\n"
