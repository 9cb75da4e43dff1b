"""Digram grammars of symbol sequences, block entropy and pair classification."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .symbolic import SymbolSequence, WordPair, embed_word

PRE = "pre"
POST = "post"

PRE_LIKE = "pre_like"
POST_LIKE = "post_like"
UNDETERMINED = "undetermined"


def _letters(s) -> str:
    return s.letters if isinstance(s, SymbolSequence) else str(s)


def word_index(word: str) -> int:
    return int(word, 4)


def index_word(i: int, D: int) -> str:
    return np.base_repr(i, 4).rjust(D, "0")


def split_words(letters: str, D: int) -> list[int]:
    """Non-overlapping length-D words as base-4 indices; a ragged tail is dropped."""
    return [int(letters[k:k + D], 4) for k in range(0, len(letters) - D + 1, D)]


@dataclass
class DigramTable:
    """Transition counts between consecutive length-D words."""

    D: int
    counts: np.ndarray
    source: str = PRE

    @property
    def n_transitions(self) -> int:
        return int(self.counts.sum())

    @property
    def p(self) -> np.ndarray:
        # computed once; the counts are frozen at that point so the cache stays true
        cached = self.__dict__.get("_p")
        if cached is not None and cached[0] is self.counts:
            return cached[1]
        self.counts.setflags(write=False)
        rows = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            p = np.where(rows > 0, self.counts / np.where(rows > 0, rows, 1), 0.0)
        p.setflags(write=False)
        self.__dict__["_p"] = (self.counts, p)
        return p

    def prob(self, w: str, w_next: str) -> float:
        return float(self.p[word_index(w), word_index(w_next)])

    def merge(self, other: "DigramTable") -> "DigramTable":
        if other.D != self.D:
            raise ValueError("word lengths differ")
        return DigramTable(self.D, self.counts + other.counts, self.source)


def train_digrams(sequences: Iterable, D: int = 2, source: str = PRE) -> DigramTable:
    """Count word-to-word transitions inside each sequence (never across sequences)."""
    if D < 1:
        raise ValueError("D must be >= 1")
    n = 4 ** D
    counts = np.zeros((n, n), dtype=np.int64)
    for s in sequences:
        letters = _letters(s)
        if len(letters) < 2 * D:
            raise ValueError(f"sequence shorter than 2*D: {letters!r}")
        w = split_words(letters, D)
        np.add.at(counts, (w[:-1], w[1:]), 1)
    if counts.sum() == 0:
        raise ValueError("no transitions to train on")
    return DigramTable(D, counts, source)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    kind: str
    dp_pre: float
    dp_post: float
    dd: float


def classify(pair: WordPair | str, pre: DigramTable, post: DigramTable) -> Verdict:
    """Which grammar more plausibly generated the word pair.

    Sums the transition probabilities along the pair's word path under each
    table, and the absolute differences along the same path.  The verdict is
    undetermined when some step is impossible under both tables, or when the
    margin between the sums is smaller than the summed differences (or zero).
    """
    letters = pair.joined if isinstance(pair, WordPair) else str(pair)
    D = pre.D
    if post.D != D or len(letters) % D:
        raise ValueError("pair length must be a multiple of D and tables must share D")
    w = np.array(split_words(letters, D))
    a = pre.p[w[:-1], w[1:]]
    b = post.p[w[:-1], w[1:]]
    dp_pre, dp_post = float(a.sum()), float(b.sum())
    dd = float(np.abs(a - b).sum())
    margin = abs(dp_pre - dp_post)
    if np.any((a == 0) & (b == 0)) or margin == 0.0 or margin < dd:
        kind = UNDETERMINED
    else:
        kind = PRE_LIKE if dp_pre > dp_post else POST_LIKE
    return Verdict(kind, dp_pre, dp_post, dd)


# ---------------------------------------------------------------------------
# Block entropy
# ---------------------------------------------------------------------------


@dataclass
class EntropyProfile:
    points: list[tuple[int, float]]
    L: int | None
    threshold: float = 0.05
    undersampled: list[int] = field(default_factory=list)


def shannon_bits(items: Sequence) -> float:
    _, counts = np.unique(np.asarray(items), return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum()) + 0.0


def block_entropy(
    sequences: Iterable,
    t_d_values: Iterable[int],
    threshold: float = 0.05,
    align: str = "start",
    min_count: int = 4,
) -> EntropyProfile:
    """Plug-in entropy (bits) of length-t_d blocks, one block per sequence.

    Blocks are prefixes (``align="start"``) or suffixes (``align="end"``, for
    sequences that end at an event).  The horizon ``L`` is the first t_d whose
    per-letter entropy gain to the next computed t_d is at most ``threshold``.
    """
    seqs = [_letters(s) for s in sequences]
    points, under = [], []
    for t_d in sorted(set(int(t) for t in t_d_values)):
        blocks = [s[:t_d] if align == "start" else s[len(s) - t_d:] for s in seqs if len(s) >= t_d]
        if len(blocks) < min_count:
            under.append(t_d)
            continue
        points.append((t_d, shannon_bits(blocks)))
    L = None
    for (t1, h1), (t2, h2) in zip(points[:-1], points[1:]):
        if (h2 - h1) / (t2 - t1) <= threshold:
            L = t1
            break
    return EntropyProfile(points, L, threshold, under)


# ---------------------------------------------------------------------------
# Recurrence of the spliced pattern
# ---------------------------------------------------------------------------


def diagonal_gaps(contexts: Sequence[Sequence[str]]) -> np.ndarray:
    """|S_b3 - S_b2| and |S_a1 - S_a2| for every six-word context, flattened."""
    out = []
    for ws in contexts:
        b1, b2, b3, a1, a2, a3 = ws
        out.append(abs(embed_word(b3) - embed_word(b2)))
        out.append(abs(embed_word(a1) - embed_word(a2)))
    return np.asarray(out, dtype=float)


def recurrence_power_law(contexts: Sequence[Sequence[str]], epsilons: Sequence[float]):
    """Fraction rho(eps) of spliced-pattern points within eps, and its log-log slope.

    Each context contributes two points, the (s_b2, s_b3) and (s_a1, s_a2)
    pairs that the splice s_b3 := s_b2, s_a1 := s_a2 would put on the diagonal.
    Returns ``([(eps, rho), ...], exponent)``; the slope uses points with
    rho > 0 and needs at least three of them.
    """
    if not len(contexts):
        raise ValueError("no contexts")
    eps = np.asarray(epsilons, dtype=float)
    if np.any(eps <= 0) or np.any(np.diff(eps) < 0):
        raise ValueError("epsilons must be positive and sorted")
    gaps = np.sort(diagonal_gaps(contexts))
    rho = np.searchsorted(gaps, eps, side="right") / gaps.size
    table = [(float(e), float(r)) for e, r in zip(eps, rho)]
    keep = rho > 0
    if not keep.any():
        raise ValueError("rho is zero for every epsilon")
    if keep.sum() < 3:
        return table, float("nan")
    slope = np.polyfit(np.log(eps[keep]), np.log(rho[keep]), 1)[0]
    return table, float(slope)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def write_digrams(tables: Sequence[DigramTable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["source", "from_word", "to_word", "count", "p"])
    for t in tables:
        p = t.p
        for i, j in zip(*np.nonzero(t.counts)):
            w.writerow([t.source, index_word(i, t.D), index_word(j, t.D), int(t.counts[i, j]), repr(float(p[i, j]))])
    return buf.getvalue()


def read_digrams(text: str) -> dict[str, DigramTable]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty digram file")
    D = len(rows[0]["from_word"])
    tables: dict[str, DigramTable] = {}
    for r in rows:
        t = tables.setdefault(r["source"], DigramTable(D, np.zeros((4 ** D, 4 ** D), dtype=np.int64), r["source"]))
        t.counts[word_index(r["from_word"]), word_index(r["to_word"])] = int(r["count"])
    return tables


def write_entropy(profile: EntropyProfile) -> str:
    return "t_d,H_bits\n" + "".join(f"{t},{h!r}\n" for t, h in profile.points)


def write_power_law(table) -> str:
    return "epsilon,rho\n" + "".join(f"{e!r},{r!r}\n" for e, r in table)
