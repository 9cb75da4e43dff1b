"""Sampled horizontal gaze traces: data model, file I/O and blink segmentation.

A trace is a uniformly sampled sequence of horizontal positions (pixels) with a
validity flag per sample.  Invalid samples (eyelid closed) carry ``p = 0`` by
convention.  Samples are grouped into trials, one per sentence; gaps that touch
a trial edge cannot be reconstructed and are not reported as blinks.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

TIMESTAMP_TOLERANCE = 0.01  # fraction of tau_ms


class TraceFormatError(ValueError):
    """Raised when a trace file cannot be parsed."""


@dataclass(frozen=True, eq=False)
class EyeTrace:
    """Horizontal eye position sampled every ``tau_ms`` milliseconds.

    ``trials`` holds half-open ``(start, end)`` sample index ranges.  ``t_ms``
    keeps the original timestamps so files round-trip exactly.
    """

    p: np.ndarray
    valid: np.ndarray
    tau_ms: float = 2.0
    trials: tuple[tuple[int, int], ...] = ()
    t_ms: np.ndarray | None = None
    trial_ids: tuple[int, ...] = ()
    word_boxes: tuple[tuple[tuple[float, float], ...], ...] | None = None
    reconstructed: np.ndarray | None = None

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        valid = np.array(self.valid, dtype=bool)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("trace needs a non-empty 1-d sample array")
        if valid.shape != p.shape:
            raise ValueError("p and valid must have the same length")
        if not self.tau_ms > 0:
            raise ValueError("tau_ms must be positive")
        n = p.size
        trials = tuple((int(a), int(b)) for a, b in self.trials) or ((0, n),)
        prev = 0
        for a, b in trials:
            if not (prev <= a < b <= n):
                raise ValueError(f"bad trial boundaries {trials!r} for {n} samples")
            prev = b
        t = (
            np.arange(n) * float(self.tau_ms)
            if self.t_ms is None
            else np.array(self.t_ms, dtype=float)
        )
        if t.shape != p.shape:
            raise ValueError("t_ms and p must have the same length")
        ids = tuple(int(i) for i in self.trial_ids) or tuple(range(len(trials)))
        if len(ids) != len(trials):
            raise ValueError("one trial id per trial required")
        boxes = self.word_boxes
        if boxes is not None:
            boxes = tuple(tuple((float(l), float(r)) for l, r in wb) for wb in boxes)
            if len(boxes) != len(trials):
                raise ValueError("word_boxes needs one entry per trial")
        rec = self.reconstructed
        if rec is not None:
            rec = np.array(rec, dtype=bool)
            if rec.shape != p.shape:
                raise ValueError("reconstructed flags must match samples")
            rec.setflags(write=False)
        p.setflags(write=False)
        valid.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "tau_ms", float(self.tau_ms))
        object.__setattr__(self, "trials", trials)
        object.__setattr__(self, "t_ms", t)
        object.__setattr__(self, "trial_ids", ids)
        object.__setattr__(self, "word_boxes", boxes)
        object.__setattr__(self, "reconstructed", rec)

    def __len__(self):
        return self.p.size

    def __eq__(self, other):
        if not isinstance(other, EyeTrace):
            return NotImplemented
        same_rec = (self.reconstructed is None) == (other.reconstructed is None)
        if same_rec and self.reconstructed is not None:
            same_rec = np.array_equal(self.reconstructed, other.reconstructed)
        return (
            same_rec
            and self.tau_ms == other.tau_ms
            and self.trials == other.trials
            and self.trial_ids == other.trial_ids
            and self.word_boxes == other.word_boxes
            and np.array_equal(self.p, other.p)
            and np.array_equal(self.valid, other.valid)
            and np.array_equal(self.t_ms, other.t_ms)
        )

    __hash__ = None

    def trial_of(self, index: int) -> int:
        for k, (a, b) in enumerate(self.trials):
            if a <= index < b:
                return k
        raise IndexError(index)

    def valid_segments(self, trial: int | None = None) -> list[tuple[int, int]]:
        """Maximal runs of valid samples as half-open ranges, never crossing trials."""
        trials = self.trials if trial is None else [self.trials[trial]]
        out = []
        for a, b in trials:
            out.extend((a + s, a + e) for s, e in _runs(self.valid[a:b], True))
        return out

    def replace(self, **changes) -> "EyeTrace":
        fields = dict(
            p=self.p,
            valid=self.valid,
            tau_ms=self.tau_ms,
            trials=self.trials,
            t_ms=self.t_ms,
            trial_ids=self.trial_ids,
            word_boxes=self.word_boxes,
            reconstructed=self.reconstructed,
        )
        fields.update(changes)
        return EyeTrace(**fields)

    def with_mask(self, start: int, stop: int) -> "EyeTrace":
        """Copy with samples ``[start, stop)`` invalidated (p set to 0)."""
        p = self.p.copy()
        valid = self.valid.copy()
        p[start:stop] = 0.0
        valid[start:stop] = False
        return self.replace(p=p, valid=valid)


@dataclass(frozen=True)
class BlinkEvent:
    l: int
    B: int
    trial: int

    @property
    def stop(self) -> int:
        return self.l + self.B


def _runs(mask: np.ndarray, value: bool) -> list[tuple[int, int]]:
    m = np.concatenate(([False], np.asarray(mask) == value, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(m))
    return [(int(s), int(e)) for s, e in zip(edges[::2], edges[1::2])]


def detect_blinks(trace: EyeTrace) -> list[BlinkEvent]:
    """Interior gaps of invalid samples, in time order.

    Gaps touching the first or last sample of a trial are truncated-trial
    losses and are skipped.
    """
    events = []
    for k, (a, b) in enumerate(trace.trials):
        n = b - a
        for s, e in _runs(trace.valid[a:b], False):
            if s == 0 or e == n:
                continue
            events.append(BlinkEvent(l=a + s, B=e - s, trial=k))
    return events


def lint_trace(trace: EyeTrace) -> list[str]:
    """Soft problems that do not make a trace unusable."""
    issues = []
    zero_valid = np.flatnonzero(trace.valid & (trace.p == 0.0))
    if zero_valid.size:
        issues.append(
            f"{zero_valid.size} valid samples at p=0 (first at index {zero_valid[0]})"
        )
    bad = np.flatnonzero(~trace.valid & (trace.p != 0.0))
    if bad.size:
        issues.append(f"{bad.size} invalid samples with non-zero position")
    return issues


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _check_timestamps(t: np.ndarray, tau_ms: float, trial_of_row: Sequence[int]) -> None:
    tol = TIMESTAMP_TOLERANCE * tau_ms
    back = np.flatnonzero(np.diff(t) <= 0)
    if back.size:
        raise TraceFormatError(f"non-monotonic timestamps at row {back[0] + 2}")
    for i in range(1, t.size):
        step = t[i] - t[i - 1]
        if trial_of_row[i] == trial_of_row[i - 1] and abs(step - tau_ms) > tol:
            raise TraceFormatError(
                f"non-uniform sampling at row {i + 1}: step {step} ms vs tau {tau_ms} ms"
            )


def _infer_tau(t: np.ndarray, trial_of_row: Sequence[int]) -> float:
    same = np.flatnonzero(np.diff(np.asarray(trial_of_row)) == 0)
    if same.size == 0:
        return 2.0
    return float(np.round(np.median(np.diff(t)[same]), 9))


def _assemble(t, x, valid, trial_col, tau_ms, word_boxes=None) -> EyeTrace:
    t = np.asarray(t, dtype=float)
    if tau_ms is None:
        tau_ms = _infer_tau(t, trial_col)
    _check_timestamps(t, tau_ms, trial_col)
    trials, ids = [], []
    start = 0
    for i in range(1, len(trial_col) + 1):
        if i == len(trial_col) or trial_col[i] != trial_col[i - 1]:
            if trial_col[start] in ids:
                raise TraceFormatError(f"trial {trial_col[start]} is not contiguous")
            trials.append((start, i))
            ids.append(trial_col[start])
            start = i
    x = np.where(valid, x, 0.0)
    return EyeTrace(
        p=x,
        valid=valid,
        tau_ms=tau_ms,
        trials=tuple(trials),
        t_ms=t,
        trial_ids=tuple(ids),
        word_boxes=word_boxes,
    )


def parse_trace(source, format: str = "csv", tau_ms: float | None = None) -> EyeTrace:
    """Parse a CSV or JSON trace from bytes, text, or a file object.

    Validity comes from the ``valid`` column when present, else from ``x_px == 0``.
    ``tau_ms`` defaults to the median timestamp step (rounded to 1e-9 ms).
    """
    text = _read_text(source)
    if not text.strip():
        raise TraceFormatError("empty input")
    if format == "json":
        return _parse_json(text, tau_ms)
    if format != "csv":
        raise ValueError(f"unknown trace format {format!r}")

    reader = csv.reader(io.StringIO(text))
    header = [h.strip() for h in next(reader)]
    if header[:2] != ["t_ms", "x_px"]:
        raise TraceFormatError("line 1: header must start with t_ms,x_px")
    known = {"t_ms", "x_px", "valid", "trial_id", "reconstructed"}
    unknown = set(header) - known
    if unknown:
        raise TraceFormatError(f"line 1: unknown columns {sorted(unknown)}")
    col = {name: k for k, name in enumerate(header)}
    t, x, valid, trial, rec = [], [], [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise TraceFormatError(f"line {lineno}: expected {len(header)} fields")
        try:
            t.append(float(row[col["t_ms"]]))
            xi = float(row[col["x_px"]])
            x.append(xi)
            if "valid" in col:
                v = row[col["valid"]].strip()
                if v not in ("0", "1"):
                    raise ValueError(v)
                valid.append(v == "1")
            else:
                valid.append(xi != 0.0)
            trial.append(int(row[col["trial_id"]]) if "trial_id" in col else 0)
            if "reconstructed" in col:
                rec.append(row[col["reconstructed"]].strip() == "1")
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: malformed row ({exc})") from None
    if not t:
        raise TraceFormatError("empty input")
    out = _assemble(t, np.array(x), np.array(valid), trial, tau_ms)
    if rec:
        out = out.replace(reconstructed=np.array(rec))
    return out


def _parse_json(text: str, tau_ms: float | None) -> EyeTrace:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"line {exc.lineno}: {exc.msg}") from None
    meta = doc.get("metadata", {})
    samples = doc.get("samples", [])
    if not samples:
        raise TraceFormatError("empty input")
    try:
        t = [float(s["t_ms"]) for s in samples]
        x = np.array([float(s["x_px"]) for s in samples])
        valid = np.array([bool(s.get("valid", s["x_px"] != 0)) for s in samples])
        trial = [int(s.get("trial_id", 0)) for s in samples]
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(f"malformed sample object ({exc})") from None
    tau = tau_ms if tau_ms is not None else meta.get("tau_ms")
    boxes = meta.get("word_boxes")
    out = _assemble(t, x, valid, trial, tau, word_boxes=boxes)
    if "reconstructed" in samples[0]:
        out = out.replace(reconstructed=np.array([bool(s["reconstructed"]) for s in samples]))
    return out


def _trial_column(trace: EyeTrace) -> np.ndarray:
    col = np.empty(len(trace), dtype=np.int64)
    for (a, b), tid in zip(trace.trials, trace.trial_ids):
        col[a:b] = tid
    return col


def write_trace(trace: EyeTrace, out: IO[str] | None = None, format: str = "csv") -> str:
    """Serialize a trace; returns the text and also writes it to ``out`` if given."""
    tid = _trial_column(trace)
    if format == "csv":
        buf = io.StringIO()
        cols = ["t_ms", "x_px", "valid", "trial_id"]
        if trace.reconstructed is not None:
            cols.append("reconstructed")
        buf.write(",".join(cols) + "\n")
        for i in range(len(trace)):
            row = [
                _fmt(trace.t_ms[i]),
                _fmt(trace.p[i]),
                "1" if trace.valid[i] else "0",
                str(int(tid[i])),
            ]
            if trace.reconstructed is not None:
                row.append("1" if trace.reconstructed[i] else "0")
            buf.write(",".join(row) + "\n")
        text = buf.getvalue()
    elif format == "json":
        samples = []
        for i in range(len(trace)):
            s = {
                "t_ms": float(trace.t_ms[i]),
                "x_px": float(trace.p[i]),
                "valid": bool(trace.valid[i]),
                "trial_id": int(tid[i]),
            }
            if trace.reconstructed is not None:
                s["reconstructed"] = bool(trace.reconstructed[i])
            samples.append(s)
        meta = {"tau_ms": trace.tau_ms, "trials": [list(t) for t in trace.trials]}
        if trace.word_boxes is not None:
            meta["word_boxes"] = [[list(b) for b in wb] for wb in trace.word_boxes]
        text = json.dumps({"metadata": meta, "samples": samples}, indent=1) + "\n"
    else:
        raise ValueError(f"unknown trace format {format!r}")
    if out is not None:
        out.write(text)
    return text


def read_word_boxes(source) -> tuple[tuple[tuple[float, float], ...], ...]:
    """Word boxes sidecar: JSON list (one per trial) of [left_px, right_px] pairs."""
    doc = json.loads(_read_text(source))
    return tuple(tuple((float(l), float(r)) for l, r in trial) for trial in doc)


def write_word_boxes(boxes: Iterable[Iterable[tuple[float, float]]]) -> str:
    return json.dumps([[list(b) for b in wb] for wb in boxes]) + "\n"
