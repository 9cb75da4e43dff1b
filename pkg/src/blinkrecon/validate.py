"""Artificial-blink scoring and reading measures.

Artificial blinks are slid across every detected saccade; each replica is
planned with tables trained once on the untouched trace, and the planned
onset and period are compared with a midpoint-and-mean-period guess (sigma
and beta).  Reading measures summarise fixations per word so that analyses
with and without reconstruction can be compared.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import RunConfig
from .grammar import DigramTable, train_digrams
from .reconstruct import FLAT, plan_from_context
from .saccade import SaccadeEvent, detect_saccades, saccade_summary
from .symbolic import WordPair, _to_str, encode_letters, extract_saccade_windows
from .trace import BlinkEvent, EyeTrace


@dataclass(frozen=True)
class ArtificialBlinkResult:
    saccade: int
    replica: int
    t_ab: float
    t_r: float
    t_0r: float
    P_B: float
    t_sb: float
    t_0: float
    mode: str


class _LetterIndex:
    """Letters of the whole trace, computed once; letter k uses samples k..k+2."""

    def __init__(self, trace: EyeTrace):
        self.trace = trace
        p = np.where(trace.valid, trace.p, 0.0)
        self.letters = _to_str(encode_letters(np.diff(p))) if p.size >= 3 else ""
        self.bad = np.concatenate([[0], np.cumsum(~trace.valid)])

    def clean(self, a: int, b: int) -> bool:
        return 0 <= a and b <= len(self.trace) and self.bad[b] == self.bad[a]

    def window(self, start: int, t_d: int, lo: int, hi: int) -> str | None:
        stop = start + t_d + 2
        if start < lo or stop > hi or not self.clean(start, stop):
            return None
        return self.letters[start:start + t_d]


def run_artificial_blinks(
    trace: EyeTrace,
    saccades: Sequence[SaccadeEvent],
    f: int,
    P_B: float,
    t_d: int,
    tables: tuple[DigramTable | None, DigramTable | None],
    mean_t0: float,
    config: RunConfig | None = None,
    index: _LetterIndex | None = None,
):
    """Slide ``f`` blinks of length ``P_B`` ms across every saccade.

    Replica r starts at t_sb + t_0/2 - P_B + r P_B / f (snapped to the next
    sample).  Replicas whose mask or context leaves the trial or touches
    invalid data are skipped.  Returns ``(results, n_skipped)``.
    """
    cfg = config or RunConfig()
    tau = trace.tau_ms
    B = int(round(P_B / tau))
    if B < 1:
        raise ValueError("P_B shorter than one sample")
    idx = index or _LetterIndex(trace)
    h = t_d // 2
    pre_t, post_t = tables
    out, skipped = [], 0
    for j, e in enumerate(saccades):
        if e.truncated:
            continue
        lo, hi = trace.trials[e.trial]
        for r in range(1, f + 1):
            l = int(math.ceil((e.t_sb + e.t_0 / 2 - P_B + r * P_B / f) / tau - 1e-9))
            if l - 1 < lo or l + B >= hi or not idx.clean(l - 1, l + B + 1):
                skipped += 1
                continue
            t_ab = l * tau
            pre = idx.window(l - (t_d + 2), t_d, lo, hi)
            post = idx.window(l + B, t_d, lo, hi)
            pre_pair = post_pair = None
            if pre is not None and post is not None:
                pre_pair, post_pair = WordPair(pre[:h], pre[h:]), WordPair(post[:h], post[h:])
            plan = plan_from_context(
                BlinkEvent(l, B, e.trial), float(trace.p[l - 1]), float(trace.p[l + B]),
                pre_pair, post_pair, pre_t, post_t, t_d, mean_t0, tau, cfg, damping=False,
            )
            if plan.mode == FLAT:
                # no saccade found: the answer coincides with the midpoint guess
                t_r, t_0r = t_ab + P_B / 2, mean_t0
            else:
                t_r, t_0r = t_ab + plan.theta * tau, plan.q * tau
            out.append(ArtificialBlinkResult(j, r, t_ab, t_r, t_0r, P_B, e.t_sb, e.t_0, plan.mode))
    return out, skipped


def midpoint_results(results: Sequence[ArtificialBlinkResult], mean_t0: float):
    """The same replicas answered by the midpoint-and-mean-period strategy."""
    return [
        ArtificialBlinkResult(x.saccade, x.replica, x.t_ab, x.t_ab + x.P_B / 2, mean_t0, x.P_B, x.t_sb, x.t_0, "midpoint")
        for x in results
    ]


@dataclass(frozen=True)
class GridCell:
    t_d: int
    P_B: float
    mean_tr: float
    mean_trp: float
    mean_t0r: float
    mean_t0rp: float
    n: int

    @property
    def sigma(self) -> float:
        return self.mean_trp - self.mean_tr

    @property
    def beta(self) -> float:
        return self.mean_t0rp - self.mean_t0r


def score_cell(results: Sequence[ArtificialBlinkResult], t_d: int, P_B: float, mean_t0: float) -> GridCell | None:
    if not results:
        return None
    t_r = np.array([x.t_r for x in results])
    t_0r = np.array([x.t_0r for x in results])
    t_sb = np.array([x.t_sb for x in results])
    t_0 = np.array([x.t_0 for x in results])
    t_rp = np.array([x.t_ab for x in results]) + P_B / 2
    return GridCell(
        t_d=t_d,
        P_B=P_B,
        mean_tr=float(np.mean(np.abs(t_r - t_sb)) / P_B),
        mean_trp=float(np.mean(np.abs(t_rp - t_sb)) / P_B),
        mean_t0r=float(np.mean(np.abs(t_0r - t_0)) / mean_t0),
        mean_t0rp=float(np.mean(np.abs(mean_t0 - t_0)) / mean_t0),
        n=len(results),
    )


@dataclass
class SigmaBetaGrid:
    t_d_values: list[int]
    P_B_values: list[float]
    cells: dict = field(default_factory=dict)  # (t_d, P_B) -> GridCell | None
    tau_ms: float = 2.0

    def sigma(self) -> np.ndarray:
        return self._matrix(lambda c: c.sigma)

    def beta(self) -> np.ndarray:
        return self._matrix(lambda c: c.beta)

    def _matrix(self, fn) -> np.ndarray:
        m = np.full((len(self.t_d_values), len(self.P_B_values)), np.nan)
        for i, t in enumerate(self.t_d_values):
            for k, pb in enumerate(self.P_B_values):
                c = self.cells.get((t, pb))
                if c is not None:
                    m[i, k] = fn(c)
        return m


def score_grid(
    trace: EyeTrace,
    saccades: Sequence[SaccadeEvent],
    t_d_values: Sequence[int],
    P_B_values: Sequence[float],
    train,
    mean_t0: float,
    config: RunConfig | None = None,
    midpoint: bool = False,
) -> SigmaBetaGrid:
    """Score every (t_d, P_B) cell.

    ``train(t_d)`` returns the (pre, post) tables for a given context length;
    it is called once per t_d on the untouched trace.  With ``midpoint`` the
    control strategy is scored instead of the planner.
    """
    cfg = config or RunConfig()
    idx = _LetterIndex(trace)
    grid = SigmaBetaGrid([int(t) for t in t_d_values], [float(p) for p in P_B_values], tau_ms=trace.tau_ms)
    for t_d in grid.t_d_values:
        tables = train(t_d)
        for pb in grid.P_B_values:
            res, _ = run_artificial_blinks(trace, saccades, cfg.f_replicas, pb, t_d, tables, mean_t0, cfg, idx)
            if midpoint:
                res = midpoint_results(res, mean_t0)
            grid.cells[(t_d, pb)] = score_cell(res, t_d, pb, mean_t0)
    return grid


def artificial_blink_grid(
    trace: EyeTrace,
    t_d_values: Sequence[int],
    P_B_values: Sequence[float],
    config: RunConfig | None = None,
    midpoint: bool = False,
    saccades: Sequence[SaccadeEvent] | None = None,
) -> SigmaBetaGrid:
    """Detect saccades, train tables per t_d and score the whole grid."""
    cfg = config or RunConfig()
    if saccades is None:
        saccades = detect_saccades(trace, threshold=cfg.saccade_threshold_px)
    usable = [e for e in saccades if not e.truncated]
    summary = saccade_summary(usable, trace.tau_ms)
    if not summary["n"]:
        raise ValueError("no usable saccades in trace")
    mean_t0 = summary["mean_t0_ms"]

    def train(t_d):
        pre, post, _ = extract_saccade_windows(trace, usable, t_d)
        if not pre or not post:
            return None, None
        return train_digrams(pre, cfg.D_letters, "pre"), train_digrams(post, cfg.D_letters, "post")

    return score_grid(trace, usable, t_d_values, P_B_values, train, mean_t0, cfg, midpoint)


def merge_grids(grids: Sequence[SigmaBetaGrid]) -> SigmaBetaGrid:
    """Stack grids scored on disjoint t_d rows (for parallel runs)."""
    out = SigmaBetaGrid([], list(grids[0].P_B_values), tau_ms=grids[0].tau_ms)
    for g in grids:
        out.t_d_values.extend(g.t_d_values)
        out.cells.update(g.cells)
    return out


# ---------------------------------------------------------------------------
# Reading measures
# ---------------------------------------------------------------------------

MEASURE_NAMES = (
    "total_reading_time_ms",
    "gaze_duration_ms",
    "single_fixation_duration_ms",
    "single_fixation_position",
    "skipping_probability",
    "regression_probability",
)


@dataclass(frozen=True)
class Fixation:
    trial: int
    start_ms: float
    end_ms: float
    x: float
    word: int

    @property
    def duration(self) -> float:
        return self.end_ms - self.start_ms


@dataclass(frozen=True)
class WordMeasure:
    trial: int
    word: int
    total_reading_time_ms: float
    gaze_duration_ms: float
    single_fixation_duration_ms: float | None
    single_fixation_position: float | None
    skipped: bool
    regression_origin: bool


@dataclass
class ReadingMeasures:
    words: list[WordMeasure]
    means: dict
    outside_boxes: int = 0
    n_fixations: int = 0


def _assign(boxes, x: float) -> tuple[int, bool]:
    for i, (l, r) in enumerate(boxes):
        if l <= x <= r:
            return i, True
    centers = np.array([(l + r) / 2 for l, r in boxes])
    return int(np.argmin(np.abs(centers - x))), False


def fixations(trace: EyeTrace, saccades: Sequence[SaccadeEvent], trial: int) -> list[tuple[int, int]]:
    """Sample ranges between saccades inside one trial: [t_fb(j), t_sb(j+1))."""
    tau = trace.tau_ms
    a, b = trace.trials[trial]
    ev = sorted((e for e in saccades if e.trial == trial), key=lambda e: e.t_sb)
    spans, cursor = [], a
    for e in ev:
        s = int(round(e.t_sb / tau))
        if s > cursor:
            spans.append((cursor, s))
        cursor = max(cursor, int(round(e.t_fb / tau)))
    if b > cursor:
        spans.append((cursor, b))
    return spans


def compute_reading_measures(
    trace: EyeTrace,
    saccades: Sequence[SaccadeEvent],
    word_boxes=None,
    trials: Sequence[int] | None = None,
    letter_px: float = 10.0,
) -> ReadingMeasures:
    """Per-word reading measures and their corpus means.

    A fixation is the stretch between one saccade's settling point and the
    next onset; its position is the mean of its valid samples and it belongs
    to the word box containing that position (else the nearest box).  The
    first pass on a word is its first run of consecutive fixations, provided
    no word further right was fixated earlier; otherwise the word is skipped.
    Words past the last fixated word of a trial are not counted.
    """
    boxes_all = word_boxes if word_boxes is not None else trace.word_boxes
    if boxes_all is None:
        raise ValueError("word boxes are required")
    tau = trace.tau_ms
    trials = range(len(trace.trials)) if trials is None else trials
    words, outside, n_fix = [], 0, 0
    for k in trials:
        boxes = boxes_all[k]
        if not boxes:
            continue
        fx = []
        for s, e in fixations(trace, saccades, k):
            ok = trace.valid[s:e]
            if not ok.any():
                continue
            x = float(trace.p[s:e][ok].mean())
            w, inside = _assign(boxes, x)
            outside += not inside
            fx.append(Fixation(k, s * tau, e * tau, x, w))
        n_fix += len(fx)
        if not fx:
            continue
        seq = [f.word for f in fx]
        last = max(seq)
        for w in range(last + 1):
            visits = [i for i, v in enumerate(seq) if v == w]
            total = sum(fx[i].duration for i in visits)
            skipped = True
            gaze = 0.0
            if visits:
                first = visits[0]
                if max(seq[:first], default=-1) < w:
                    skipped = False
                    i = first
                    while i < len(seq) and seq[i] == w:
                        gaze += fx[i].duration
                        i += 1
            single_d = single_pos = None
            if len(visits) == 1 and not skipped:
                i = visits[0]
                before_fwd = i == 0 or seq[i - 1] < w
                after_fwd = i == len(seq) - 1 or seq[i + 1] > w
                if before_fwd and after_fwd:
                    single_d = fx[i].duration
                    single_pos = (fx[i].x - boxes[w][0]) / letter_px
            regression = any(i + 1 < len(seq) and seq[i + 1] < w for i in visits)
            words.append(WordMeasure(k, w, total, gaze, single_d, single_pos, skipped, regression))
    return ReadingMeasures(words, corpus_means(words), outside, n_fix)


def corpus_means(words: Sequence[WordMeasure]) -> dict:
    def mean(xs):
        xs = list(xs)
        return float(np.mean(xs)) if xs else float("nan")

    fixated = [w for w in words if w.total_reading_time_ms > 0]
    return {
        "total_reading_time_ms": mean(w.total_reading_time_ms for w in fixated),
        "gaze_duration_ms": mean(w.gaze_duration_ms for w in words if not w.skipped),
        "single_fixation_duration_ms": mean(w.single_fixation_duration_ms for w in words
                                            if w.single_fixation_duration_ms is not None),
        "single_fixation_position": mean(w.single_fixation_position for w in words
                                         if w.single_fixation_position is not None),
        "skipping_probability": mean(float(w.skipped) for w in words),
        "regression_probability": mean(float(w.regression_origin) for w in fixated),
    }


def blink_free_trials(trace: EyeTrace) -> list[int]:
    return [k for k, (a, b) in enumerate(trace.trials) if trace.valid[a:b].all()]


def relative_shift(a: dict, b: dict) -> dict:
    return {k: abs(b[k] - a[k]) / abs(a[k]) if a[k] else float("inf") for k in MEASURE_NAMES}


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

GRID_COLUMNS = ["t_d_ms", "P_B_ms", "sigma", "beta", "mean_tr", "mean_trp", "mean_t0r", "mean_t0rp", "n"]


def write_grid_csv(grid: SigmaBetaGrid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GRID_COLUMNS)
    for t in grid.t_d_values:
        for pb in grid.P_B_values:
            c = grid.cells.get((t, pb))
            if c is None:
                w.writerow([repr(t * grid.tau_ms), repr(pb)] + [""] * 6 + [0])
                continue
            w.writerow([repr(t * grid.tau_ms), repr(pb), repr(c.sigma), repr(c.beta), repr(c.mean_tr),
                        repr(c.mean_trp), repr(c.mean_t0r), repr(c.mean_t0rp), c.n])
    return buf.getvalue()


def write_measures_csv(m: ReadingMeasures) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "word", "total_reading_time_ms", "gaze_duration_ms", "single_fixation_duration_ms",
                "single_fixation_position", "skipped", "regression_origin"])
    opt = lambda v: "" if v is None else repr(v)
    for x in m.words:
        w.writerow([x.trial, x.word, repr(x.total_reading_time_ms), repr(x.gaze_duration_ms),
                    opt(x.single_fixation_duration_ms), opt(x.single_fixation_position),
                    int(x.skipped), int(x.regression_origin)])
    return buf.getvalue()


def _color(v: float, vmax: float) -> str:
    if not np.isfinite(v):
        return "#cccccc"
    u = max(-1.0, min(1.0, v / vmax)) if vmax > 0 else 0.0
    # blue for negative, red for positive
    if u >= 0:
        c = int(round(255 * (1 - u)))
        return f"#ff{c:02x}{c:02x}"
    c = int(round(255 * (1 + u)))
    return f"#{c:02x}{c:02x}ff"


def grid_svg(grid: SigmaBetaGrid, which: str = "sigma", cell: int = 28) -> str:
    m = grid.sigma() if which == "sigma" else grid.beta()
    rows, cols = m.shape
    if rows == 0 or cols == 0:
        raise ValueError("empty grid")
    finite = m[np.isfinite(m)]
    vmax = float(np.abs(finite).max()) if finite.size else 0.0
    left, top = 60, 30
    W, H = left + cols * cell + 10, top + rows * cell + 40
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
           f'<text x="{left}" y="18" font-size="12">{which} (rows t_d ms, columns P_B ms)</text>']
    for i in range(rows):
        y = top + i * cell
        out.append(f'<text x="4" y="{y + cell * 0.65:.1f}" font-size="10">{grid.t_d_values[i] * grid.tau_ms:g}</text>')
        for k in range(cols):
            v = m[i, k]
            title = "nan" if not np.isfinite(v) else f"{v:.4f}"
            out.append(f'<rect x="{left + k * cell}" y="{y}" width="{cell}" height="{cell}" '
                       f'fill="{_color(v, vmax)}"><title>{title}</title></rect>')
    for k in range(cols):
        out.append(f'<text x="{left + k * cell + 2}" y="{top + rows * cell + 14}" font-size="9">'
                   f'{grid.P_B_values[k]:g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def emit_report(grid: SigmaBetaGrid | None, measures: dict | None = None, plans: Sequence | None = None) -> dict:
    """Report files as ``{name: text}``; the caller decides where they go."""
    if grid is None or not grid.t_d_values or not grid.P_B_values:
        raise ValueError("empty grid")
    files = {
        "grid.csv": write_grid_csv(grid),
        "sigma.svg": grid_svg(grid, "sigma"),
        "beta.svg": grid_svg(grid, "beta"),
    }
    s, b = grid.sigma(), grid.beta()
    ok = np.isfinite(s) & np.isfinite(b)
    summary = {
        "cells": int(s.size),
        "scored_cells": int(ok.sum()),
        "sigma_and_beta_positive": int(((s > 0) & (b > 0) & ok).sum()),
        "sigma_positive": int(((s > 0) & ok).sum()),
        "beta_positive": int(((b > 0) & ok).sum()),
    }
    if measures:
        summary["measures"] = {name: {k: _clean(v) for k, v in m.items()} for name, m in measures.items()}
    if plans is not None:
        modes: dict[str, int] = {}
        for p in plans:
            modes[p.mode] = modes.get(p.mode, 0) + 1
        summary["plan_modes"] = dict(sorted(modes.items()))
    files["report.json"] = json.dumps(summary, indent=1, sort_keys=True) + "\n"
    return files
