"""Deterministic numerical primitives: adaptive Simpson quadrature and bisection.

All solvers in this package funnel through these two routines so that results
are reproducible bit-for-bit across runs and platforms with the same inputs.
The quadrature is plain adaptive Simpson with an absolute tolerance and a hard
recursion cap; at the cap the current Richardson-extrapolated estimate is
accepted rather than raising, which keeps long parameter sweeps total.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable

from .errors import ParameterError

DEFAULT_TOL = 1e-10
MAX_DEPTH = 48


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    max_depth: int = MAX_DEPTH,
) -> float:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``."""
    if a == b:
        return 0.0
    if a > b:
        return -adaptive_simpson(f, b, a, tol, max_depth)

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth)


def _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        # Richardson extrapolation of the two Simpson estimates
        return left + right + delta / 15.0
    half = 0.5 * tol
    return _simpson_rec(f, a, m, fa, flm, fm, left, half, depth - 1) + _simpson_rec(
        f, m, b, fm, frm, fb, right, half, depth - 1
    )


def integrate_piecewise(
    f: Callable[[float], float],
    points: Iterable[float],
    tol: float = DEFAULT_TOL,
) -> float:
    """Integrate ``f`` over consecutive intervals of sorted ``points``.

    Callers pass the kink/discontinuity locations of the integrand as interior
    points; each smooth piece then converges quickly under Simpson.
    """
    pts = sorted(set(float(p) for p in points))
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        total += adaptive_simpson(f, lo, hi, tol)
    return total


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    f_lo: float | None = None,
    f_hi: float | None = None,
    xtol: float = 1e-10,
) -> float:
    """Locate a sign change of ``f`` inside ``[lo, hi]`` by pure bisection.

    The iteration path depends only on the signs of ``f`` at midpoints, which
    is what makes the delay solvers scale-equivariant. Requires
    ``f(lo) <= 0 <= f(hi)`` or the reverse.
    """
    if f_lo is None:
        f_lo = f(lo)
    if f_hi is None:
        f_hi = f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0.0) == (f_hi > 0.0):
        raise ParameterError(f"no sign change on [{lo}, {hi}]")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # interval at float resolution
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0.0) == (f_hi > 0.0):
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)
