"""Asymptotic normed-delay solvers and optimal kernel design.

The detection delay of the sequential smoother, normed by the bandwidth,
converges to the first rho where Psi(rho) = int_0^rho K(s-rho) m0(s) ds
reaches the threshold c.  This module evaluates Psi, finds that first
crossing (also under non-uniform observation-time designs), constructs the
delay-optimal kernel together with its optimal delay, ranks candidate
kernels, and probes the reachable set of objective values by a discretized
linear program.

Solvers use a fixed composite Simpson rule split at integrand kinks: the
evaluation path is branch-free, so repeated runs and threshold/alternative
rescalings follow bit-identical bracketing decisions.  The public psi()
uses adaptive quadrature and serves as the accuracy reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .alternatives import GenericAlternative
from .errors import (
    InfeasibleError,
    NoSolutionError,
    NumericalError,
    ParameterError,
    SelectionError,
)
from .kernels import Kernel, make_optimal_kernel, tabulated_kernel
from .quadrature import integrate_piecewise

__all__ = [
    "TimeDesign",
    "uniform_design",
    "power_design",
    "tabulated_design",
    "DelaySolution",
    "OptimalPair",
    "KernelSelection",
    "ReachableProbe",
    "psi",
    "solve_rho0",
    "solve_rho0_design",
    "solve_optimal_pair",
    "select_kernel",
    "lp_oracle",
]

ROOT_TOL = 1e-10
SCAN_POINTS = 2048
_PANELS = 256  # composite-Simpson panels per smooth piece


@dataclass(frozen=True)
class TimeDesign:
    """Observation-time design: distribution F_T on [0,1] placing the times
    t_{ni} = n * quantile(i/n).  kind is uniform, power, or tabulated."""

    kind: str
    params: dict
    breakpoints: tuple
    _density: Callable = field(repr=False)
    _quantile: Callable = field(repr=False)

    def density(self, s):
        ss = np.asarray(s, dtype=float)
        out = np.where((ss >= 0.0) & (ss <= 1.0), self._density(np.clip(ss, 0.0, 1.0)), 0.0)
        return float(out) if np.ndim(s) == 0 else out

    def quantile(self, u):
        uu = np.asarray(u, dtype=float)
        if np.any((uu < 0.0) | (uu > 1.0)):
            raise ParameterError("design quantile requires u in [0, 1]")
        out = self._quantile(uu)
        return float(out) if np.ndim(u) == 0 else out

    def times(self, n: int, h: float = 1.0):
        """Design times for a sample of size n: t_i = n * quantile(i/n)."""
        if n < 1:
            raise ParameterError("times requires n >= 1")
        i = np.arange(1, n + 1, dtype=float)
        return n * self.quantile(i / n)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}


def uniform_design() -> TimeDesign:
    """Equispaced times: F_T uniform on [0,1], t_i = i."""
    return TimeDesign(
        kind="uniform",
        params={},
        breakpoints=(),
        _density=lambda s: np.ones_like(np.asarray(s, dtype=float)),
        _quantile=lambda u: np.asarray(u, dtype=float),
    )


def power_design(k: float) -> TimeDesign:
    """F_T(s) = s^k on [0,1]; k > 1 concentrates times near the present.

    k=2 gives density f_T(s) = 2s.  Requires k >= 1 so the density stays
    bounded.
    """
    if not k >= 1.0:
        raise ParameterError("power design requires k >= 1")

    def dens(s):
        ss = np.asarray(s, dtype=float)
        return k * np.power(ss, k - 1.0)

    return TimeDesign(
        kind="power",
        params={"k": float(k)},
        breakpoints=(),
        _density=dens,
        _quantile=lambda u: np.power(np.asarray(u, dtype=float), 1.0 / k),
    )


def tabulated_design(u_grid, q_values) -> TimeDesign:
    """Piecewise-linear quantile function through (u_grid, q_values).

    Must map [0,1] onto [0,1] strictly increasingly; the implied density
    is piecewise constant between the listed quantile nodes.
    """
    u = np.asarray(u_grid, dtype=float)
    q = np.asarray(q_values, dtype=float)
    if u.ndim != 1 or u.shape != q.shape or u.size < 2:
        raise ParameterError("tabulated design needs matching 1-d u/q arrays, length >= 2")
    if u[0] != 0.0 or u[-1] != 1.0 or q[0] != 0.0 or q[-1] != 1.0:
        raise ParameterError("tabulated design must span u, q in [0, 1] exactly")
    if not (np.all(np.diff(u) > 0) and np.all(np.diff(q) > 0)):
        raise ParameterError("tabulated design must be strictly increasing")

    # density on [q_i, q_{i+1}) is du/dq of the linear segment
    seg_dens = np.diff(u) / np.diff(q)

    def dens(s):
        ss = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(q, ss, side="right") - 1, 0, seg_dens.size - 1)
        return seg_dens[idx]

    return TimeDesign(
        kind="tabulated",
        params={"u_grid": u.tolist(), "q_values": q.tolist()},
        breakpoints=tuple(float(x) for x in q[1:-1]),
        _density=dens,
        _quantile=lambda uu: np.interp(np.asarray(uu, dtype=float), u, q),
    )


@dataclass(frozen=True)
class DelaySolution:
    """First-crossing solution: rho with Psi(rho) = target, plus diagnostics."""

    rho: float
    psi_at_rho: float
    bracket: tuple
    grid_step: float
    status: str  # converged | no_crossing | at_upper_bound
    evaluations: int
    target: float

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        return {
            "rho": None if math.isnan(self.rho) else self.rho,
            "psi_at_rho": None if math.isnan(self.psi_at_rho) else self.psi_at_rho,
            "bracket": list(self.bracket),
            "grid_step": self.grid_step,
            "status": self.status,
            "evaluations": self.evaluations,
            "target": self.target,
        }


def _composite_simpson(f: Callable, pts: Sequence[float], panels: int = _PANELS) -> float:
    """Fixed-panel Simpson per piece; vectorized, branch-free."""
    total = 0.0
    weights = np.ones(panels + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b <= a:
            continue
        xs = np.linspace(a, b, panels + 1)
        total += float(np.dot(weights, f(xs))) * (b - a) / (3.0 * panels)
    return total


def _psi_pieces(kernel: Kernel, alt: GenericAlternative, rho: float) -> list:
    lo = max(0.0, rho - kernel.effective_radius)
    pts = {lo, rho}
    pts.update(p for p in alt.breakpoints if lo < p < rho)
    pts.update(rho + b for b in kernel.breakpoints if lo < rho + b < rho)
    return sorted(pts)


def psi(kernel: Kernel, alt: GenericAlternative, rho: float) -> float:
    """Psi(rho) = int_0^rho K(s - rho) m0(s) ds, adaptive quadrature."""
    if rho < 0:
        raise ParameterError("psi requires rho >= 0")
    if rho == 0.0:
        return 0.0
    pts = _psi_pieces(kernel, alt, rho)
    return integrate_piecewise(lambda s: float(kernel.eval(s - rho)) * float(alt(s)), pts)


def _psi_fixed(kernel: Kernel, alt: GenericAlternative, rho: float) -> float:
    """Solver-internal Psi with the fixed composite rule."""
    if rho <= 0.0:
        return 0.0
    pts = _psi_pieces(kernel, alt, rho)
    return _composite_simpson(lambda xs: kernel.eval(xs - rho) * alt(xs), pts)


def _first_crossing(
    g: Callable[[float], float],
    target: float,
    upper: float,
    grid_step: float,
) -> DelaySolution:
    """Scan [0, upper] for the first rho with g(rho) >= target, then bisect.

    The scan guarantees the returned root is the first crossing: no grid
    point below the bracket has g >= target.
    """
    evaluations = 0

    def geval(rho: float) -> float:
        nonlocal evaluations
        evaluations += 1
        return g(rho)

    n_steps = max(2, int(math.ceil(upper / grid_step)))
    prev_rho, prev_val = 0.0, geval(0.0)
    bracket = None
    last_val = prev_val
    last_but_one = prev_val
    for j in range(1, n_steps + 1):
        rho_j = min(j * grid_step, upper)
        val = geval(rho_j)
        last_but_one, last_val = last_val, val
        if val >= target:
            bracket = (prev_rho, rho_j, prev_val, val)
            break
        prev_rho, prev_val = rho_j, val
        if rho_j >= upper:
            break

    if bracket is None:
        status = "at_upper_bound" if last_val > last_but_one else "no_crossing"
        return DelaySolution(
            rho=math.nan,
            psi_at_rho=last_val,
            bracket=(),
            grid_step=grid_step,
            status=status,
            evaluations=evaluations,
            target=target,
        )

    lo, hi, _, _ = bracket
    while hi - lo > ROOT_TOL:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if geval(mid) >= target:
            hi = mid
        else:
            lo = mid
    rho = 0.5 * (lo + hi)
    return DelaySolution(
        rho=rho,
        psi_at_rho=geval(rho),
        bracket=(lo, hi),
        grid_step=grid_step,
        status="converged",
        evaluations=evaluations,
        target=target,
    )


def _default_bound(kernel: Kernel, alt: GenericAlternative, R: float | None) -> float:
    if R is not None:
        if not R > 0:
            raise ParameterError("search bound R must be > 0")
        return float(R)
    if alt.truncation is not None:
        return 4.0 * alt.truncation
    return 4.0 * kernel.effective_radius


def solve_rho0(
    kernel: Kernel,
    alt: GenericAlternative,
    c: float,
    R: float | None = None,
    grid_step: float | None = None,
) -> DelaySolution:
    """First rho > 0 with Psi(rho) = c (the asymptotic normed delay).

    Scans [0, R] at grid_step for the first sign change of Psi - c and
    bisects to 1e-10.  R defaults to 4x the alternative's truncation (4x
    the kernel's effective radius for untruncated shapes).  no_crossing
    means Psi stayed below c and stopped rising; at_upper_bound means Psi
    was still rising at R, so a larger R may find the crossing.
    """
    if not c > 0:
        raise ParameterError("threshold c must be > 0")
    upper = _default_bound(kernel, alt, R)
    step = upper / SCAN_POINTS if grid_step is None else float(grid_step)
    if not 0 < step <= upper:
        raise ParameterError("grid_step must lie in (0, R]")
    return _first_crossing(lambda r: _psi_fixed(kernel, alt, r), c, upper, step)


def _design_pieces(kernel: Kernel, alt: GenericAlternative, design: TimeDesign, rho: float) -> list:
    lo = max(0.0, 1.0 - kernel.effective_radius / rho)
    pts = {lo, 1.0}
    pts.update(p for p in alt.breakpoints if lo < p < 1.0)
    pts.update(p for p in design.breakpoints if lo < p < 1.0)
    pts.update(1.0 + b / rho for b in kernel.breakpoints if lo < 1.0 + b / rho < 1.0)
    return sorted(pts)


def solve_rho0_design(
    kernel: Kernel,
    alt: GenericAlternative,
    c: float,
    design: TimeDesign,
    R: float | None = None,
    grid_step: float | None = None,
) -> DelaySolution:
    """First root of rho * int_0^1 K(rho(s-1)) m0(s) f_T(s) ds = c.

    The delay limit under observation times placed by the design's
    quantile function.  Defaults: R = 4 (1 + kernel effective radius),
    grid_step = R / 2048.
    """
    if not c > 0:
        raise ParameterError("threshold c must be > 0")
    upper = float(R) if R is not None else 4.0 * (1.0 + kernel.effective_radius)
    if not upper > 0:
        raise ParameterError("search bound R must be > 0")
    step = upper / SCAN_POINTS if grid_step is None else float(grid_step)
    if not 0 < step <= upper:
        raise ParameterError("grid_step must lie in (0, R]")

    def g(rho: float) -> float:
        if rho <= 0.0:
            return 0.0
        pts = _design_pieces(kernel, alt, design, rho)
        val = _composite_simpson(
            lambda xs: kernel.eval(rho * (xs - 1.0)) * alt(xs) * design.density(xs), pts
        )
        return rho * val

    return _first_crossing(g, c, upper, step)


@dataclass(frozen=True)
class OptimalPair:
    """Jointly optimal delay and kernel, with the solver trace."""

    rho_star: float
    kernel: Kernel
    psi_at_rho: float
    target: float
    solution: DelaySolution

    def to_dict(self) -> dict:
        return {
            "rho_star": self.rho_star,
            "kernel": self.kernel.to_dict(),
            "psi_at_rho": self.psi_at_rho,
            "target": self.target,
            "solution": self.solution.to_dict(),
        }


def solve_optimal_pair(
    alt: GenericAlternative,
    c: float,
    tail_policy: str = "lipschitz-bump",
    grid_step: float | None = None,
    lipschitz_cap: float | None = None,
    sup_cap: float | None = None,
) -> OptimalPair:
    """Smallest attainable delay rho* and a kernel attaining it.

    rho* is the first root of int_0^rho m0^2 / (2 int_0^inf m0) = c; the
    kernel is m0(rho* - |z|) / (2 int_0^inf m0) on [-rho*, rho*], tail
    completed per policy.  By construction Psi(K*, rho*) = c.
    """
    if not c > 0:
        raise ParameterError("threshold c must be > 0")
    total = alt.total_integral()
    if not (math.isfinite(total) and total > 0):
        raise ParameterError(
            f"optimal pair needs 0 < integral of m0 < inf; {alt.form} has {total}"
        )
    upper = alt.truncation
    step = upper / SCAN_POINTS if grid_step is None else float(grid_step)
    if not 0 < step <= upper:
        raise ParameterError("grid_step must lie in (0, T]")
    denom = 2.0 * total

    sol = _first_crossing(lambda r: alt.sq_integral(0.0, r) / denom, c, upper, step)
    if not sol.converged:
        attainable = alt.sq_integral(0.0, upper) / denom
        raise NoSolutionError(
            f"threshold unreachable for this alternative: c={c:g} exceeds "
            f"the attainable maximum {attainable:.6g}"
        )
    kern = make_optimal_kernel(
        alt, sol.rho, tail_policy=tail_policy, lipschitz_cap=lipschitz_cap, sup_cap=sup_cap
    )
    return OptimalPair(
        rho_star=sol.rho,
        kernel=kern,
        psi_at_rho=psi(kern, alt, sol.rho),
        target=c,
        solution=sol,
    )


@dataclass(frozen=True)
class KernelSelection:
    """Ranking of candidate kernels by their solved delay."""

    best_index: int
    solutions: tuple

    def to_dict(self) -> dict:
        return {
            "best_index": self.best_index,
            "solutions": [s.to_dict() for s in self.solutions],
        }


def select_kernel(
    candidates: Sequence[Kernel],
    alt: GenericAlternative,
    c: float,
    R: float | None = None,
    grid_step: float | None = None,
) -> KernelSelection:
    """Pick the candidate with the smallest converged delay.

    Candidates whose solve never crosses rank last; ties break to the
    lowest index.  All candidates failing to cross is a selection error.
    """
    if not candidates:
        raise ParameterError("select_kernel needs a nonempty candidate list")
    solutions = tuple(solve_rho0(k, alt, c, R=R, grid_step=grid_step) for k in candidates)
    ranked = [(s.rho, i) for i, s in enumerate(solutions) if s.converged]
    if not ranked:
        raise SelectionError("no candidate kernel reaches the threshold on [0, R]")
    best = min(ranked)[1]
    return KernelSelection(best_index=best, solutions=solutions)


@dataclass(frozen=True)
class ReachableProbe:
    """LP estimate of sup I(K, rho) over the discretized kernel class."""

    rho: float
    sup_value: float
    argmax_kernel: Kernel
    grid_n: int
    delta: float
    lipschitz_cap: float
    sup_cap: float

    def objective_of(self, kernel: Kernel, alt: GenericAlternative) -> float:
        """The discretized objective of an arbitrary kernel on this grid."""
        s = np.linspace(0.0, self.rho, self.grid_n + 1)
        w = np.full(self.grid_n + 1, self.delta)
        w[0] = w[-1] = 0.5 * self.delta
        return float(np.dot(w, kernel.eval(s - self.rho) * alt(s)))

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "sup_value": self.sup_value,
            "grid_n": self.grid_n,
            "delta": self.delta,
            "lipschitz_cap": self.lipschitz_cap,
            "sup_cap": self.sup_cap,
            "argmax_kernel": self.argmax_kernel.to_dict(),
        }


def lp_oracle(
    alt: GenericAlternative,
    rho: float,
    grid_n: int = 256,
    lipschitz_cap: float = 1.0,
    sup_cap: float = 1.0,
) -> ReachableProbe:
    """Maximize the discretized objective over symmetric grid kernels.

    Variables are kernel values on [-rho, 0] at spacing rho/grid_n; the
    mirrored half supplies the other side of the unit-mass constraint.
    Constraints: 0 <= K_j <= sup_cap, |K_{j+1} - K_j| <= lipschitz_cap *
    delta, trapezoid half-mass = 1/2.  Solved as a linear program with a
    deterministic method, so repeated calls reproduce the same optimum.
    """
    if not rho > 0:
        raise ParameterError("lp_oracle requires rho > 0")
    if grid_n < 16:
        raise ParameterError("lp_oracle requires grid_n >= 16")
    if lipschitz_cap < 0 or sup_cap <= 0:
        raise ParameterError("lp_oracle requires lipschitz_cap >= 0 and sup_cap > 0")

    n = int(grid_n)
    delta = rho / n
    s = np.linspace(0.0, rho, n + 1)  # s_j = z_j + rho
    m0 = np.asarray(alt(s), dtype=float)
    w = np.full(n + 1, delta)
    w[0] = w[-1] = 0.5 * delta
    objective = w * m0

    a_eq = w.reshape(1, -1)
    b_eq = np.array([0.5])

    diff = np.zeros((2 * n, n + 1))
    rows = np.arange(n)
    diff[2 * rows, rows] = -1.0
    diff[2 * rows, rows + 1] = 1.0
    diff[2 * rows + 1, rows] = 1.0
    diff[2 * rows + 1, rows + 1] = -1.0
    b_ub = np.full(2 * n, lipschitz_cap * delta)

    res = linprog(
        -objective,
        A_ub=diff,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0.0, sup_cap),
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleError(
            f"reachable-set LP infeasible at rho={rho:g}: caps L={lipschitz_cap:g}, "
            f"C_K={sup_cap:g} cannot hold unit mass on [-{rho:g}, {rho:g}]"
        )
    if res.status != 0:
        raise NumericalError(f"reachable-set LP failed with status {res.status}: {res.message}")

    half = np.asarray(res.x, dtype=float)
    z_half = np.linspace(-rho, 0.0, n + 1)
    z_full = np.concatenate([z_half, -z_half[:-1][::-1]])
    v_full = np.concatenate([half, half[:-1][::-1]])
    argmax = tabulated_kernel(z_full, v_full, name=f"lp-argmax(rho={rho:g})")

    return ReachableProbe(
        rho=rho,
        sup_value=float(-res.fun),
        argmax_kernel=argmax,
        grid_n=n,
        delta=delta,
        lipschitz_cap=lipschitz_cap,
        sup_cap=sup_cap,
    )
