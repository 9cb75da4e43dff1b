"""Saccade detection and the damped-oscillator saccade model.

A saccade starting at ``t_sb`` is described by the displacement ``X(t')`` of a
damped oscillator released from rest at ``X(0) = A``::

    X'' + 2 g X' + k X = 0,    X(0) = A,  X'(0) = 0

with ``t' = t - t_sb``.  The fitted angular frequency ``omega = pi / t_0`` is
the frequency of the *observed* oscillation, so the stiffness handed to the
solver is ``k = omega**2 + g**2``.  With that choice the first extremum lands
at exactly ``t' = t_0`` with value ``-A exp(-g t_0) = -delta``, which is what
makes ``g = ln(A / delta) / t_0`` self-consistent.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .trace import EyeTrace

logger = logging.getLogger(__name__)

ONSET_THRESHOLD_PX = 4.0
DELTA_FLOOR_PX = 0.5
MIN_SEGMENT = 5

RIGHTWARD = "rightward"
LEFTWARD = "leftward"


@dataclass(frozen=True)
class SaccadeEvent:
    t_sb: float
    t_0: float
    t_fb: float
    A: float
    delta: float
    g: float
    omega: float
    direction: str
    trial: int = 0
    truncated: bool = False

    @property
    def excited(self) -> bool:
        """Overshoot at least as large as the amplitude (g <= 0)."""
        return self.g <= 0.0

    def onset_index(self, tau_ms: float) -> int:
        return int(round(self.t_sb / tau_ms))


def fit_saccade_params(A: float, t_0: float, delta: float) -> tuple[float, float]:
    """Damping (per ms) and angular frequency (per ms) from amplitude, half-period, overshoot."""
    if not (A > 0 and t_0 > 0 and delta > 0):
        raise ValueError("A, t_0 and delta must be positive")
    g = math.log(A / delta) / t_0
    if g <= 0:
        logger.debug("excited saccade: A=%g delta=%g", A, delta)
    return g, math.pi / t_0


def oscillator(t, A: float, g: float, stiffness: float) -> np.ndarray:
    """Closed-form X(t) for X'' + 2gX' + stiffness*X = 0, X(0)=A, X'(0)=0.

    Picks the under-, critically or over-damped branch from the sign of
    ``stiffness - g**2``.
    """
    t = np.asarray(t, dtype=float)
    disc = stiffness - g * g
    scale = max(stiffness, g * g, 1e-300)
    if abs(disc) <= 1e-12 * scale:
        return A * (1.0 + g * t) * np.exp(-g * t)
    if disc > 0:
        wd = math.sqrt(disc)
        return A * np.exp(-g * t) * (np.cos(wd * t) + (g / wd) * np.sin(wd * t))
    r = math.sqrt(-disc)
    # roots -g+r (slow) and -g-r (fast)
    slow, fast = -g + r, -g - r
    c1 = A * (-fast) / (slow - fast)
    c2 = A * slow / (slow - fast)
    return c1 * np.exp(slow * t) + c2 * np.exp(fast * t)


def saccade_displacement(t_prime, A: float, t_0: float, g: float) -> np.ndarray:
    """X(t') of a saccade whose observed half-period is ``t_0``."""
    omega = math.pi / t_0
    return oscillator(t_prime, A, g, omega * omega + g * g)


def to_screen(X: np.ndarray, A: float, direction: str, p_start: float, p_end: float) -> np.ndarray:
    """Map oscillator displacement to screen position.

    Leftward: ``P = X + P_end``; rightward: ``P = -X + P_start + A``.  Both are
    written relative to ``p_start`` so that ``X = A`` returns ``p_start`` exactly.
    """
    if direction == RIGHTWARD:
        return p_start + (A - X)
    if direction == LEFTWARD:
        return p_start - (A - X)
    raise ValueError(f"unknown direction {direction!r}")


def simulate_saccade(
    A: float,
    t_0: float,
    g: float,
    direction: str,
    p_anchor: tuple[float, float],
    tau_ms: float = 2.0,
    duration_ms: float = 0.0,
) -> np.ndarray:
    """Screen positions sampled at t' = 0, tau, ..., up to ``duration_ms`` inclusive."""
    if not (A > 0 and t_0 > 0 and g >= 0 and duration_ms >= 0):
        raise ValueError("need A > 0, t_0 > 0, g >= 0, duration_ms >= 0")
    n = int(math.floor(duration_ms / tau_ms + 1e-9)) + 1
    X = saccade_displacement(np.arange(n) * tau_ms, A, t_0, g)
    out = to_screen(X, A, direction, p_anchor[0], p_anchor[1])
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite saccade samples; check parameters")
    return out


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------


def _next_sign_change(d: np.ndarray, start: int, sign: float) -> tuple[int, float]:
    """First index >= start whose difference has the opposite strict sign.

    ``sign`` is the last nonzero sign seen before ``start``; zeros never count.
    Returns (index or -1, updated sign).
    """
    for k in range(start, d.size):
        s = d[k]
        if s == 0.0:
            continue
        s = 1.0 if s > 0 else -1.0
        if sign != 0.0 and s != sign:
            return k, s
        sign = s
    return -1, sign


def _last_sign(d: np.ndarray, stop: int) -> float:
    for k in range(stop - 1, -1, -1):
        if d[k] != 0.0:
            return 1.0 if d[k] > 0 else -1.0
    return 0.0


def detect_in_segment(
    P: np.ndarray,
    tau_ms: float,
    offset: int = 0,
    trial: int = 0,
    threshold: float = ONSET_THRESHOLD_PX,
    delta_floor: float = DELTA_FLOOR_PX,
) -> list[SaccadeEvent]:
    """Saccades inside one run of valid samples; ``offset`` is its first sample index."""
    P = np.asarray(P, dtype=float)
    if P.size < MIN_SEGMENT:
        logger.debug("segment at %d shorter than %d samples, skipped", offset, MIN_SEGMENT)
        return []
    d = np.diff(P)
    big = np.abs(d) > threshold
    events = []
    i = 0
    n = d.size
    while i + 3 < n:
        if not (big[i + 1] and big[i + 3]):
            i += 1
            continue
        onset = i
        sign = _last_sign(d, onset + 4)
        m, sign = _next_sign_change(d, onset + 4, sign)
        truncated = m < 0
        fb = -1
        if not truncated:
            changes, k = 0, m + 1
            while changes < 3:
                k, sign = _next_sign_change(d, k, sign)
                if k < 0:
                    break
                changes += 1
                fb = k
                k += 1
            truncated = changes < 3
        if m < 0:
            m = n
        if truncated:
            fb = n
        # d[k] = P[k+1]-P[k]; a sign change at k means P[k] is the extremum
        t0 = (m - onset) * tau_ms
        A = abs(P[fb] - P[onset])
        if A == 0.0:
            i = fb + 1
            continue
        delta = max(abs(P[m] - P[fb]), delta_floor)
        g, omega = fit_saccade_params(A, t0, delta)
        direction = RIGHTWARD if P[fb] > P[onset] else LEFTWARD
        events.append(
            SaccadeEvent(
                t_sb=(offset + onset) * tau_ms,
                t_0=t0,
                t_fb=(offset + fb) * tau_ms,
                A=float(A),
                delta=float(delta),
                g=g,
                omega=omega,
                direction=direction,
                trial=trial,
                truncated=truncated,
            )
        )
        if truncated:
            break
        i = fb
    return events


def detect_saccades(trace: EyeTrace, trial: int | None = None, **kw) -> list[SaccadeEvent]:
    """Run the detector over every valid segment of one trial (or all trials).

    Times in the returned events are ``sample index * tau_ms`` measured from the
    first sample of the trace.
    """
    trials = range(len(trace.trials)) if trial is None else [trial]
    out = []
    for k in trials:
        for a, b in trace.valid_segments(k):
            out.extend(detect_in_segment(trace.p[a:b], trace.tau_ms, offset=a, trial=k, **kw))
    return out


def saccade_summary(events: Iterable[SaccadeEvent], tau_ms: float) -> dict:
    """Mean half-period, angular frequency and damping over usable saccades.

    Truncated and excited events are left out.  Rates are reported per ms and
    per sample interval since tabulated values in the literature do not state
    which one they use.
    """
    ev = [e for e in events if not e.truncated and not e.excited]
    if not ev:
        return {"n": 0}
    t0 = np.array([e.t_0 for e in ev])
    om = np.array([e.omega for e in ev])
    g = np.array([e.g for e in ev])
    return {
        "n": len(ev),
        "mean_t0_ms": float(t0.mean()),
        "mean_omega_per_ms": float(om.mean()),
        "mean_omega_per_tau": float(om.mean() * tau_ms),
        "mean_g_per_ms": float(g.mean()),
        "mean_g_per_tau": float(g.mean() * tau_ms),
    }


SACCADE_COLUMNS = ["trial", "t_sb_ms", "t0_ms", "t_fb_ms", "A_px", "delta_px", "g", "omega", "direction", "truncated"]


def write_saccades(events: Sequence[SaccadeEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SACCADE_COLUMNS)
    for e in events:
        w.writerow([e.trial, repr(e.t_sb), repr(e.t_0), repr(e.t_fb), repr(e.A), repr(e.delta),
                    repr(e.g), repr(e.omega), e.direction, int(e.truncated)])
    return buf.getvalue()


def read_saccades(text: str) -> list[SaccadeEvent]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [
        SaccadeEvent(
            t_sb=float(r["t_sb_ms"]), t_0=float(r["t0_ms"]), t_fb=float(r["t_fb_ms"]),
            A=float(r["A_px"]), delta=float(r["delta_px"]), g=float(r["g"]),
            omega=float(r["omega"]), direction=r["direction"], trial=int(r["trial"]),
            truncated=r["truncated"] == "1",
        )
        for r in rows
    ]
