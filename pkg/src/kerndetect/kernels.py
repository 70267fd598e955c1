"""Smoothing kernels: symmetric Lipschitz probability densities.

Every kernel carries declared lipschitz_const and sup_bound; construction
samples the density on a deterministic grid and fails loudly if the
declared bounds, symmetry, nonnegativity, or unit mass are violated.
Bounds are validated, never inferred.

Infinite supports are truncated for quadrature and windowing at the radius
where the analytic tail mass drops below 1e-12 (gaussian: 8, laplace:
30/rate); support_radius stays infinite, effective_radius is the finite
truncation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .alternatives import GenericAlternative
from .errors import ConstructionError, DomainError, ParameterError
from .quadrature import integrate_piecewise

__all__ = [
    "Kernel",
    "gaussian",
    "epanechnikov",
    "triangular",
    "laplace",
    "tabulated_kernel",
    "kernel_from_csv",
    "make_optimal_kernel",
]

_VALIDATION_POINTS = 2049  # odd, so the grid contains 0 and exact sign pairs


@dataclass(frozen=True)
class Kernel:
    """Immutable kernel with declared (validated) class-membership bounds."""

    name: str
    form: str
    params: dict
    lipschitz_const: float
    sup_bound: float
    support_radius: float
    effective_radius: float
    breakpoints: tuple
    _pdf: Callable = field(repr=False)
    _cdf: Callable | None = field(default=None, repr=False)
    is_subdensity: bool = False

    def eval(self, z):
        """Density K(z); exactly 0 outside support_radius. Vectorized."""
        zz = np.asarray(z, dtype=float)
        if self.form == "tabulated" and not np.all(np.isfinite(zz)):
            raise DomainError("tabulated kernel queried with non-finite argument")
        inside = np.abs(zz) <= self.support_radius
        vals = self._pdf(np.where(inside, zz, 0.0))
        out = np.where(inside, vals, 0.0)
        return float(out) if np.ndim(z) == 0 else out

    def __call__(self, z):
        return self.eval(z)

    def rescale_eval(self, h: float, z):
        """Bandwidth-h rescaling K(z/h)/h; keeps unit mass."""
        if not h > 0:
            raise ParameterError("bandwidth h must be > 0")
        zz = np.asarray(z, dtype=float)
        out = self.eval(zz / h) / h
        return float(out) if np.ndim(z) == 0 else out

    def cdf(self, z: float) -> float:
        """Distribution function F_K(z); quadrature unless a closed form exists."""
        if self._cdf is not None:
            return float(min(1.0, max(0.0, self._cdf(float(z)))))
        lo = -self.effective_radius
        if z <= lo:
            return 0.0
        hi = min(float(z), self.effective_radius)
        pts = [lo] + [p for p in self.breakpoints if lo < p < hi] + [hi]
        val = integrate_piecewise(lambda s: float(self.eval(s)), pts)
        return float(min(1.0, max(0.0, val)))

    def quantile(self, p: float) -> float:
        """Inverse cdf by bisection; p strictly inside (0, 1)."""
        if not 0.0 < p < 1.0:
            raise ParameterError("quantile requires p strictly in (0, 1)")
        lo, hi = -self.effective_radius, self.effective_radius
        f_lo = self.cdf(lo) - p
        f_hi = self.cdf(hi) - p
        # p beyond the truncated tail mass resolves to the truncation edge
        if f_lo >= 0.0:
            return lo
        if f_hi <= 0.0:
            return hi
        a, b = lo, hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            if mid == a or mid == b:
                break
            fm = self.cdf(mid) - p
            if fm == 0.0:
                return mid
            if (fm < 0.0) == (f_lo < 0.0):
                a = mid
            else:
                b = mid
            if b - a <= 1e-12 * max(1.0, abs(a), abs(b)):
                break
        return 0.5 * (a + b)

    def mass(self) -> float:
        """Numerical integral of the density over its (truncated) support."""
        r = self.effective_radius
        pts = [-r] + [p for p in self.breakpoints if -r < p < r] + [r]
        return integrate_piecewise(lambda s: float(self.eval(s)), pts)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "form": self.form,
            "params": dict(self.params),
            "lipschitz_const": self.lipschitz_const,
            "sup_bound": self.sup_bound,
            "support_radius": self.support_radius,
            "is_subdensity": self.is_subdensity,
        }


def _validate(k: Kernel, mass_tol: float) -> Kernel:
    """Check declared invariants on a deterministic grid; raise on violation."""
    r = k.effective_radius
    grid = np.linspace(-r, r, _VALIDATION_POINTS)
    vals = k.eval(grid)
    if not np.all(np.isfinite(vals)):
        raise ConstructionError(f"kernel {k.name}: non-finite density values")
    if np.any(vals < -1e-12):
        raise ConstructionError(f"kernel {k.name}: negative density values")
    sym_err = float(np.max(np.abs(vals - vals[::-1])))
    if sym_err > 1e-9 * max(1.0, k.sup_bound):
        raise ConstructionError(f"kernel {k.name}: asymmetry {sym_err:.3e}")
    vmax = float(np.max(vals))
    if vmax > k.sup_bound * (1.0 + 1e-9) + 1e-12:
        raise ConstructionError(
            f"kernel {k.name}: sampled sup {vmax:.6g} exceeds declared sup_bound {k.sup_bound:.6g}"
        )
    step = grid[1] - grid[0]
    jumps = np.abs(np.diff(vals))
    allowed = k.lipschitz_const * step * (1.0 + 1e-9) + 1e-12
    if np.any(jumps > allowed):
        worst = float(np.max(jumps) / step)
        raise ConstructionError(
            f"kernel {k.name}: sampled slope {worst:.6g} exceeds declared "
            f"lipschitz_const {k.lipschitz_const:.6g}"
        )
    m = k.mass()
    if k.is_subdensity:
        if m > 1.0 + mass_tol:
            raise ConstructionError(f"kernel {k.name}: sub-density mass {m:.12g} exceeds 1")
    elif abs(m - 1.0) > mass_tol:
        raise ConstructionError(f"kernel {k.name}: mass {m:.12g} differs from 1 beyond {mass_tol:g}")
    return k


def gaussian() -> Kernel:
    """Standard normal density; tail beyond |z|=8 is below 1e-15."""
    c = 1.0 / math.sqrt(2.0 * math.pi)

    def pdf(z):
        return c * np.exp(-0.5 * np.square(z))

    return _validate(
        Kernel(
            name="gaussian",
            form="gaussian",
            params={},
            lipschitz_const=c * math.exp(-0.5),  # max |K'| at z = +-1
            sup_bound=c,
            support_radius=math.inf,
            effective_radius=8.0,
            breakpoints=(),
            _pdf=pdf,
            _cdf=lambda z: 0.5 * (1.0 + math.erf(z / math.sqrt(2.0))),
        ),
        mass_tol=1e-8,
    )


def epanechnikov() -> Kernel:
    """Parabolic density 0.75 (1 - z^2) on [-1, 1]."""

    def pdf(z):
        return np.where(np.abs(z) <= 1.0, 0.75 * (1.0 - np.square(z)), 0.0)

    def cdf(z):
        if z <= -1.0:
            return 0.0
        if z >= 1.0:
            return 1.0
        return 0.5 + 0.75 * z - 0.25 * z**3

    return _validate(
        Kernel(
            name="epanechnikov",
            form="epanechnikov",
            params={},
            lipschitz_const=1.5,
            sup_bound=0.75,
            support_radius=1.0,
            effective_radius=1.0,
            breakpoints=(-1.0, 1.0),
            _pdf=pdf,
            _cdf=cdf,
        ),
        mass_tol=1e-8,
    )


def triangular() -> Kernel:
    """Density 1 - |z| on [-1, 1]."""

    def pdf(z):
        return np.maximum(0.0, 1.0 - np.abs(z))

    def cdf(z):
        if z <= -1.0:
            return 0.0
        if z >= 1.0:
            return 1.0
        if z < 0.0:
            return 0.5 * (1.0 + z) ** 2
        return 1.0 - 0.5 * (1.0 - z) ** 2

    return _validate(
        Kernel(
            name="triangular",
            form="triangular",
            params={},
            lipschitz_const=1.0,
            sup_bound=1.0,
            support_radius=1.0,
            effective_radius=1.0,
            breakpoints=(-1.0, 0.0, 1.0),
            _pdf=pdf,
            _cdf=cdf,
        ),
        mass_tol=1e-8,
    )


def laplace(rate: float) -> Kernel:
    """Double-exponential density (rate/2) exp(-rate |z|)."""
    if not rate > 0:
        raise ParameterError("laplace rate must be > 0")
    lam = float(rate)

    def pdf(z):
        return 0.5 * lam * np.exp(-lam * np.abs(z))

    def cdf(z):
        if z < 0.0:
            return 0.5 * math.exp(lam * z)
        return 1.0 - 0.5 * math.exp(-lam * z)

    return _validate(
        Kernel(
            name=f"laplace({lam:g})",
            form="laplace",
            params={"rate": lam},
            lipschitz_const=0.5 * lam * lam,
            sup_bound=0.5 * lam,
            support_radius=math.inf,
            effective_radius=30.0 / lam,  # tail mass e^-30 < 1e-13
            breakpoints=(0.0,),
            _pdf=pdf,
            _cdf=cdf,
        ),
        mass_tol=1e-8,
    )


def tabulated_kernel(grid, values, name: str = "tabulated") -> Kernel:
    """Linear interpolation through (grid, values); zero outside the grid.

    The table must be symmetric and integrate to 1 within 1e-6 (exact
    trapezoid, which is the integral of the interpolant).  Declared
    lipschitz_const is the max segment slope, sup_bound the max value.
    """
    g = np.asarray(grid, dtype=float)
    v = np.asarray(values, dtype=float)
    if g.ndim != 1 or g.shape != v.shape or g.size < 2:
        raise ParameterError("tabulated kernel needs matching 1-d grid/values, length >= 2")
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(v))):
        raise ParameterError("tabulated kernel grid/values must be finite")
    if not np.all(np.diff(g) > 0):
        raise ParameterError("tabulated kernel grid must be strictly increasing")
    if np.any(v < 0):
        raise ParameterError("tabulated kernel values must be nonnegative")

    radius = float(max(abs(g[0]), abs(g[-1])))
    slopes = np.diff(v) / np.diff(g)

    def pdf(z):
        zz = np.asarray(z, dtype=float)
        out = np.where((zz >= g[0]) & (zz <= g[-1]), np.interp(zz, g, v), 0.0)
        return out

    return _validate(
        Kernel(
            name=name,
            form="tabulated",
            params={"grid": g.tolist(), "values": v.tolist()},
            lipschitz_const=float(np.max(np.abs(slopes))),
            sup_bound=float(np.max(v)),
            support_radius=radius,
            effective_radius=radius,
            breakpoints=tuple(float(x) for x in g),
            _pdf=pdf,
        ),
        mass_tol=1e-6,
    )


def kernel_from_csv(path, name: str | None = None) -> Kernel:
    """Load a tabulated kernel from a two-column CSV (abscissa, value)."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except (ValueError, IndexError):
                if not rows:
                    continue  # header line
                raise ParameterError(f"bad CSV row {rec!r} in {path}")
    if len(rows) < 2:
        raise ParameterError(f"CSV {path} needs at least two data rows")
    g, v = zip(*rows)
    return tabulated_kernel(g, v, name=name or f"tabulated[{path}]")


def make_optimal_kernel(
    alt: GenericAlternative,
    rho_star: float,
    tail_policy: str = "lipschitz-bump",
    lipschitz_cap: float | None = None,
    sup_cap: float | None = None,
) -> Kernel:
    """Delay-optimal kernel K*(z) = m0(rho* - |z|) / (2 int_0^inf m0).

    The formula pins K* down only on [-rho*, rho*]; the mass left over is
    attached outside per tail_policy:

    * "lipschitz-bump": symmetric continuous completion that never touches
      [-rho*, rho*].  When the boundary value m0(0) is positive, a linear
      ramp down to zero (its length is forced by the mass balance); when
      it is zero, an isoceles triangular bump with slopes at the core's
      Lipschitz constant (or lipschitz_cap when given).
    * "none": return the bare core flagged as a sub-density.

    Caps, when given, reject completions whose slope or height exceeds
    them.  Values inside [-rho*, rho*] are never altered.
    """
    if not rho_star > 0:
        raise ParameterError("rho_star must be > 0")
    if tail_policy not in ("lipschitz-bump", "none"):
        raise ParameterError(f"unknown tail_policy {tail_policy!r}")
    total = alt.total_integral()
    if not math.isfinite(total) or total <= 0:
        raise ConstructionError(
            "optimal kernel needs 0 < integral of m0 over [0, inf) < inf; "
            f"{alt.form} has {total}"
        )
    denom = 2.0 * total

    def core(z):
        zz = np.asarray(z, dtype=float)
        out = np.where(np.abs(zz) <= rho_star, alt(rho_star - np.abs(zz)) / denom, 0.0)
        return out

    core_mass = alt.integral(0.0, rho_star) / total
    residual = max(0.0, 1.0 - core_mass)
    if residual < 1e-13:
        residual = 0.0

    core_lip = alt.lipschitz_const / denom
    # sup of the core, padded by one Lipschitz half-step of the probe grid
    probe = np.linspace(0.0, rho_star, 8193)
    core_sup = float(np.max(alt(probe))) / denom
    core_sup += core_lip * (rho_star / 8192.0) * 0.5

    boundary = float(alt(0.0)) / denom  # K*(+-rho*)

    tail_extent = 0.0
    tail_peak = 0.0
    slope = 0.0
    subdensity = False

    if tail_policy == "none":
        subdensity = residual > 0.0
    elif residual > 0.0:
        if boundary > 1e-14 * max(1.0, core_sup):
            # ramp from the boundary value down to 0; length forced by mass
            tail_extent = residual / boundary
            slope = boundary / tail_extent
            tail_peak = boundary
            if lipschitz_cap is not None and slope > lipschitz_cap * (1.0 + 1e-12):
                raise ConstructionError(
                    f"tail ramp slope {slope:.6g} exceeds lipschitz cap {lipschitz_cap:.6g} "
                    f"(residual mass {residual:.6g}, boundary value {boundary:.6g})"
                )
        else:
            slope = lipschitz_cap if lipschitz_cap is not None else core_lip
            if slope <= 0:
                raise ConstructionError(
                    "cannot complete tail mass with zero slope budget; give lipschitz_cap > 0"
                )
            tail_peak = math.sqrt(slope * residual / 2.0)
            tail_extent = 2.0 * tail_peak / slope
            if sup_cap is not None and tail_peak > sup_cap * (1.0 + 1e-12):
                raise ConstructionError(
                    f"tail bump height {tail_peak:.6g} exceeds sup cap {sup_cap:.6g} "
                    f"(residual mass {residual:.6g})"
                )

    ramp_like = boundary > 1e-14 * max(1.0, core_sup)

    def pdf(z):
        zz = np.abs(np.asarray(z, dtype=float))
        out = np.asarray(core(zz), dtype=float)
        if tail_extent > 0.0:
            t = zz - rho_star
            if ramp_like:
                tail = np.where((t > 0.0) & (t <= tail_extent), boundary - slope * t, 0.0)
            else:
                half = 0.5 * tail_extent
                up = (t > 0.0) & (t <= half)
                down = (t > half) & (t <= tail_extent)
                tail = np.where(up, slope * t, 0.0) + np.where(down, slope * (tail_extent - t), 0.0)
            out = out + np.maximum(tail, 0.0)
        return out

    radius = rho_star + tail_extent
    bps = {0.0, rho_star, -rho_star, radius, -radius}
    for p in alt.breakpoints:
        if 0.0 <= p <= rho_star:
            bps.update((rho_star - p, -(rho_star - p)))
    if tail_extent > 0.0 and not ramp_like:
        bps.update((rho_star + 0.5 * tail_extent, -(rho_star + 0.5 * tail_extent)))

    declared_sup = max(core_sup, tail_peak, boundary)
    declared_lip = max(core_lip, slope)
    if sup_cap is not None and declared_sup > sup_cap * (1.0 + 1e-12):
        raise ConstructionError(
            f"optimal kernel sup {declared_sup:.6g} exceeds sup cap {sup_cap:.6g}"
        )
    if lipschitz_cap is not None:
        declared_lip = max(declared_lip, 0.0)
        if declared_lip > lipschitz_cap * (1.0 + 1e-12):
            raise ConstructionError(
                f"optimal kernel slope {declared_lip:.6g} exceeds lipschitz cap {lipschitz_cap:.6g}"
            )

    kern = Kernel(
        name=f"optimal[{alt.form}]",
        form="optimal",
        params={
            "alternative": alt.to_dict(),
            "rho_star": rho_star,
            "tail_policy": tail_policy,
            "total_integral": total,
            "residual_mass": residual,
            "tail_extent": tail_extent,
        },
        lipschitz_const=declared_lip,
        sup_bound=declared_sup,
        support_radius=radius,
        effective_radius=radius,
        breakpoints=tuple(sorted(bps)),
        _pdf=pdf,
        is_subdensity=subdensity,
    )
    return _validate(kern, mass_tol=1e-8)


KERNEL_FORMS = {
    "gaussian": gaussian,
    "epanechnikov": epanechnikov,
    "triangular": triangular,
    "laplace": laplace,
}


def make_kernel(form: str, **params) -> Kernel:
    """Build a kernel by form name; tabulated forms go through
    tabulated_kernel / kernel_from_csv, optimal through make_optimal_kernel."""
    if form == "tabulated":
        return tabulated_kernel(params["grid"], params["values"])
    try:
        ctor = KERNEL_FORMS[form]
    except KeyError:
        raise ParameterError(f"unknown kernel form {form!r}")
    return ctor(**params)
