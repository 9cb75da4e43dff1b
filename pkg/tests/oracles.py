"""Independent reference computations used by the tests.

Nothing here imports the package under test.
"""

import math

import numpy as np


def rk4_oscillator(A, g, stiffness, t_end, dt):
    """Integrate X'' + 2gX' + kX = 0 from X=A, X'=0 with classical RK4.

    All arguments may be arrays of the same shape (vectorised over parameter
    sets).  Returns (t grid, X[..., steps+1], V[..., steps+1]).
    """
    A = np.asarray(A, dtype=float)
    g = np.broadcast_to(np.asarray(g, dtype=float), A.shape)
    k = np.broadcast_to(np.asarray(stiffness, dtype=float), A.shape)
    n = int(round(t_end / dt))
    x, v = A.copy(), np.zeros_like(A)
    X, V = [x.copy()], [v.copy()]

    def f(x, v):
        return v, -2 * g * v - k * x

    for _ in range(n):
        k1x, k1v = f(x, v)
        k2x, k2v = f(x + dt / 2 * k1x, v + dt / 2 * k1v)
        k3x, k3v = f(x + dt / 2 * k2x, v + dt / 2 * k2v)
        k4x, k4v = f(x + dt * k3x, v + dt * k3v)
        x = x + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        X.append(x.copy())
        V.append(v.copy())
    return np.arange(n + 1) * dt, np.stack(X, axis=-1), np.stack(V, axis=-1)


def chi2_sf(x, dof):
    """Upper tail of the chi-square distribution (Wilson-Hilferty approximation)."""
    z = ((x / dof) ** (1 / 3) - (1 - 2 / (9 * dof))) / math.sqrt(2 / (9 * dof))
    return 0.5 * math.erfc(z / math.sqrt(2))


def chi2_uniform(counts):
    counts = np.asarray(counts, dtype=float)
    expected = counts.sum() / counts.size
    stat = float(((counts - expected) ** 2 / expected).sum())
    return stat, chi2_sf(stat, counts.size - 1)


def hand_encode(v):
    """Letter rules written out literally, first match wins."""
    out = []
    for a, b in zip(v[:-1], v[1:]):
        if a > 0 and b > 0:
            out.append("0")
        elif a >= 0 and b <= 0:
            out.append("1")
        elif a < 0 and b < 0:
            out.append("2")
        else:
            out.append("3")
    return "".join(out)


def sample_markov(p, rng, n_words, start=None):
    """Walk a row-stochastic matrix; rows without mass restart uniformly."""
    m = p.shape[0]
    w = int(rng.integers(m)) if start is None else start
    out = [w]
    for _ in range(n_words - 1):
        row = p[w]
        w = int(rng.choice(m, p=row)) if row.sum() > 0 else int(rng.integers(m))
        out.append(w)
    return out
