"""One-dimensional maximization of unimodal (quasiconcave) functions."""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize_scalar

GRID = 64
XTOL = 1e-10


def maximize_scalar(f, lo, hi, *, tol=XTOL, grid=GRID, vectorized=False):
    """Maximize a quasiconcave ``f`` on ``[lo, hi]``.

    A coarse grid pre-scan locates the bracket holding the maximum, which
    guards against flat stretches.  Vectorized ``f`` is refined by repeated
    grid zooms onto that bracket; scalar ``f`` by bounded Brent (golden
    section with parabolic steps).  Either stops at ``tol`` on the argument.

    Returns
    -------
    (x, fx) : tuple of float
    """
    lo, hi = float(lo), float(hi)
    if hi <= lo:
        return lo, float(f(np.array([lo]))[0] if vectorized else f(lo))
    xs = np.linspace(lo, hi, grid + 1)
    fs = np.asarray(f(xs), dtype=float) if vectorized else np.array([f(x) for x in xs])
    i = int(np.argmax(fs))
    best_x, best_f = xs[i], fs[i]
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, grid)]

    if vectorized:
        # zoom the grid onto the bracket; each pass shrinks it by grid / 2
        while b - a > tol:
            xs = np.linspace(a, b, grid + 1)
            fs = np.asarray(f(xs), dtype=float)
            i = int(np.argmax(fs))
            if fs[i] > best_f:
                best_x, best_f = xs[i], fs[i]
            a, b = xs[max(i - 1, 0)], xs[min(i + 1, grid)]
        return float(best_x), float(best_f)

    res = minimize_scalar(lambda x: -float(f(x)), bounds=(a, b), method="bounded",
                          options={"xatol": tol})
    if -res.fun > best_f:
        best_x, best_f = float(res.x), float(-res.fun)
    return float(best_x), float(best_f)
