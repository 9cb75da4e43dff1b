"""Velocity symbolisation over the alphabet {0, 1, 2, 3}.

Consecutive velocity pairs (V_i, V_{i+1}) are mapped to a letter by the sign
quadrant they fall in.  Sequences of ``t_d`` letters are taken from windows
around saccades and blinks; ``t_d`` letters need ``t_d + 1`` velocities, i.e.
``t_d + 2`` positions.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .saccade import SaccadeEvent
from .trace import BlinkEvent, EyeTrace

ALPHABET = "0123"

PRE_SACCADE = "pre_saccade"
POST_SACCADE = "post_saccade"
PRE_BLINK = "pre_blink"
POST_BLINK = "post_blink"
SACCADE_CONTEXT = "saccade_context"
GENERIC = "generic"


class ContextError(ValueError):
    """Not enough valid samples around a blink to build symbolic context."""


@dataclass(frozen=True)
class SymbolSequence:
    letters: str
    origin: tuple[str, int] = ("", 0)
    kind: str = GENERIC

    def __post_init__(self):
        if self.letters.strip(ALPHABET):
            raise ValueError(f"letters outside alphabet: {self.letters!r}")

    def __len__(self):
        return len(self.letters)

    def __str__(self):
        return self.letters


@dataclass(frozen=True)
class WordPair:
    first: str
    second: str

    def __post_init__(self):
        if len(self.first) != len(self.second):
            raise ValueError("word pair halves must have equal length")

    @property
    def joined(self) -> str:
        return self.first + self.second


@dataclass
class SymbolicSpace:
    label: str
    points: list[tuple[float, float]] = field(default_factory=list)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float).reshape(-1, 2)


def velocity(segment, tau_ms: float = 2.0) -> np.ndarray:
    """V_i = (P_{i+1} - P_i) / tau, one shorter than the input."""
    P = np.asarray(segment, dtype=float)
    if P.size < 2:
        raise ValueError("need at least two samples")
    if not np.all(np.isfinite(P)):
        raise ValueError("segment contains invalid samples")
    return np.diff(P) / tau_ms


def encode_letters(v) -> np.ndarray:
    """Letter codes (int8) for each consecutive velocity pair.

    Rules are checked in order and the first match wins, so a pair containing
    zeros resolves to '1' before '3'.
    """
    v = np.asarray(v, dtype=float)
    a, b = v[:-1], v[1:]
    return np.select(
        [(a > 0) & (b > 0), (a >= 0) & (b <= 0), (a < 0) & (b < 0)],
        [0, 1, 2],
        default=3,
    ).astype(np.int8)


def encode(velocities, origin=("", 0), kind: str = GENERIC) -> SymbolSequence:
    v = np.asarray(velocities, dtype=float)
    if v.size < 2:
        raise ValueError("need at least two velocities")
    return SymbolSequence(_to_str(encode_letters(v)), origin=origin, kind=kind)


def _to_str(codes: np.ndarray) -> str:
    return (np.asarray(codes, dtype=np.int8) + ord("0")).tobytes().decode("ascii")


def embed_word(word: str) -> float:
    """Real number in [0, 0.25): sum of s_k * 4**-(k+1), first letter k=1."""
    if not word or word.strip(ALPHABET):
        raise ValueError(f"bad word {word!r}")
    s = 0.0
    # Horner from the last letter keeps this exact for short words
    for ch in reversed(word):
        s = (s + int(ch)) / 4.0
    return s / 4.0


def embed_pair(pair: WordPair) -> tuple[float, float]:
    return embed_word(pair.first), embed_word(pair.second)


def letters_between(trace: EyeTrace, start: int, n_letters: int) -> str | None:
    """Letters from positions ``start .. start + n_letters + 1``; None if any is invalid
    or the window leaves the trial containing ``start``."""
    stop = start + n_letters + 2
    if start < 0 or stop > len(trace):
        return None
    k = trace.trial_of(start)
    if stop > trace.trials[k][1]:
        return None
    if not trace.valid[start:stop].all():
        return None
    return _to_str(encode_letters(velocity(trace.p[start:stop], trace.tau_ms)))


def extract_saccade_windows(trace: EyeTrace, saccades: Sequence[SaccadeEvent], t_d: int):
    """Pre-onset and post-peak sequences of ``t_d`` letters per saccade.

    The pre window ends at the onset sample, the post window starts at the
    peak sample (onset + t_0).  Windows that are clipped by a trial edge or
    touch invalid samples are skipped; ``skipped`` counts them.
    """
    if t_d < 4 or t_d % 2:
        raise ValueError("t_d must be even and >= 4")
    tau = trace.tau_ms
    pre, post = [], []
    skipped = {"pre": 0, "post": 0}
    for e in saccades:
        if e.truncated:
            continue
        onset = int(round(e.t_sb / tau))
        peak = int(round((e.t_sb + e.t_0) / tau))
        if trace.trial_of(onset) != trace.trial_of(min(peak, len(trace) - 1)):
            continue
        s = letters_between(trace, onset - (t_d + 1), t_d)
        if s is None or trace.trial_of(max(onset - (t_d + 1), 0)) != trace.trial_of(onset):
            skipped["pre"] += 1
        else:
            pre.append(SymbolSequence(s, ("trace", onset - (t_d + 1)), PRE_SACCADE))
        s = letters_between(trace, peak, t_d)
        if s is None:
            skipped["post"] += 1
        else:
            post.append(SymbolSequence(s, ("trace", peak), POST_SACCADE))
    return pre, post, skipped


def extract_blink_windows(trace: EyeTrace, blink: BlinkEvent, t_d: int) -> tuple[WordPair, WordPair]:
    """Word pairs (s_c1, s_c2) before and (s_o2, s_o3) after a blink.

    The pre window's last position is sample ``l - 1`` and the post window's
    first is ``l + B``.
    """
    if t_d % 2:
        raise ValueError("t_d must be even")
    a, b = trace.trials[blink.trial]
    pre_start = blink.l - (t_d + 2)
    if pre_start < a:
        raise ContextError("not enough valid samples before the blink")
    pre = letters_between(trace, pre_start, t_d)
    if pre is None:
        raise ContextError("not enough valid samples before the blink")
    post = letters_between(trace, blink.stop, t_d)
    if post is None:
        raise ContextError("not enough valid samples after the blink")
    h = t_d // 2
    return WordPair(pre[:h], pre[h:]), WordPair(post[:h], post[h:])


@dataclass
class SaccadeContexts:
    """Six half-words per saccade plus the symbolic spaces built from them."""

    words: list[tuple[str, ...]]
    xi: SymbolicSpace
    xi_pre: SymbolicSpace
    xi_post: SymbolicSpace
    xi_rec: SymbolicSpace
    collisions: int = 0


def _pairs(ws):
    return [(embed_word(x), embed_word(y)) for x, y in zip(ws[:-1], ws[1:])]


def spaces_from_contexts(words: Sequence[Sequence[str]]) -> SaccadeContexts:
    xi, pre, post, rec = (SymbolicSpace(n) for n in ("xi", "xi_pre", "xi_post", "xi_rec"))
    for ws in words:
        b1, b2, b3, a1, a2, a3 = ws
        xi.points.extend(_pairs(ws))
        pre.points.append((embed_word(b1), embed_word(b2)))
        post.points.append((embed_word(a2), embed_word(a3)))
        rec.points.extend(_pairs([b1, b2, b2, a2, a2, a3]))
    return SaccadeContexts([tuple(w) for w in words], xi, pre, post, rec)


def build_saccade_contexts(trace: EyeTrace, saccades: Sequence[SaccadeEvent], t_d: int, K: int = 3) -> SaccadeContexts:
    """Contexts s_b1 s_b2 s_b3 s_a1 s_a2 s_a3 of ``t_d/2``-letter words.

    Each context is cut from a block of ``K * t_d`` letters whose third word
    contains the saccade onset (placed at the middle of that word).  Blocks
    never overlap; when two saccades compete for the same stretch the earlier
    one keeps it and the collision is counted.
    """
    if K < 3:
        raise ValueError("K must be >= 3")
    if t_d % 2:
        raise ValueError("t_d must be even")
    h = t_d // 2
    tau = trace.tau_ms
    words, collisions, last_stop = [], 0, -1
    for e in sorted(saccades, key=lambda e: e.t_sb):
        onset = int(round(e.t_sb / tau))
        first_letter = onset - 2 * h - h // 2
        pad = (K - 3) * t_d // 2
        block_start = first_letter - pad
        block_stop = block_start + K * t_d + 2
        if block_start <= last_stop:
            collisions += 1
            continue
        s = letters_between(trace, first_letter, 3 * t_d)
        if s is None or block_start < 0 or block_stop > len(trace) \
                or trace.trial_of(block_start) != trace.trial_of(block_stop - 1) \
                or not trace.valid[block_start:block_stop].all():
            continue
        words.append(tuple(s[i * h:(i + 1) * h] for i in range(6)))
        last_stop = block_stop - 1
    ctx = spaces_from_contexts(words)
    ctx.collisions = collisions
    return ctx


def write_space_csv(spaces: Sequence[SymbolicSpace]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["S_n", "S_n1", "label"])
    for sp in spaces:
        for x, y in sp.points:
            w.writerow([repr(x), repr(y), sp.label])
    return buf.getvalue()


def write_sequences(seqs: Sequence[SymbolSequence | str]) -> str:
    return "".join(str(s) + "\n" for s in seqs)


def read_sequences(text: str) -> list[SymbolSequence]:
    return [SymbolSequence(line.strip()) for line in text.splitlines() if line.strip()]
