"""Noise generation and Monte Carlo studies for the sequential detector.

Streams follow the local-alternative model: the observation at time t is
drift plus stationary noise, where the drift is m0((t - t_q)/h) once t
reaches the change time t_q = floor(t_q_star) + 1 and zero before.  The
built-in noise models (iid Gaussian, AR(1) after burn-in, bounded uniform)
are strongly mixing with exponential moments, which is what the detector's
limit results assume; user-supplied models are not checked.

Every replication derives its generator from (master_seed, replication,
role), so studies reproduce bit-for-bit, serially or with KD_THREADS
workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .alternatives import GenericAlternative
from .delay import TimeDesign, solve_rho0, solve_rho0_design
from .errors import CalibrationError, ConfigError, ParameterError
from .kernels import Kernel
from .monitor import MonitorConfig, RunRecord, run

__all__ = [
    "NoiseModel",
    "iid_gaussian",
    "ar1",
    "uniform_bounded",
    "gen_noise",
    "ScenarioSpec",
    "make_observations",
    "SummaryRow",
    "ExperimentSummary",
    "monte_carlo",
    "FalseAlarmRow",
    "FalseAlarmStudy",
    "false_alarm_study",
    "CalibrationResult",
    "calibrate_threshold",
]

_ROLE_NOISE = 0


@dataclass(frozen=True)
class NoiseModel:
    """Stationary noise description; build via the factory functions."""

    kind: str
    params: dict

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}


def iid_gaussian(sigma: float) -> NoiseModel:
    """Independent N(0, sigma^2) noise; sigma=0 gives a noiseless stream."""
    if sigma < 0:
        raise ParameterError("iid_gaussian requires sigma >= 0")
    return NoiseModel(kind="iid_gaussian", params={"sigma": float(sigma)})


def ar1(phi: float, sigma: float, burn_in: int = 10_000) -> NoiseModel:
    """AR(1) with Gaussian innovations: x_t = phi x_{t-1} + sigma e_t.

    |phi| < 1 makes the chain geometrically mixing; burn_in samples are
    discarded so the emitted series is effectively stationary.
    """
    if not abs(phi) < 1:
        raise ParameterError("ar1 requires |phi| < 1")
    if sigma < 0:
        raise ParameterError("ar1 requires sigma >= 0")
    if burn_in < 0:
        raise ParameterError("ar1 requires burn_in >= 0")
    return NoiseModel(
        kind="ar1", params={"phi": float(phi), "sigma": float(sigma), "burn_in": int(burn_in)}
    )


def uniform_bounded(half_width: float) -> NoiseModel:
    """Uniform noise on [-half_width, half_width]."""
    if half_width < 0:
        raise ParameterError("uniform_bounded requires half_width >= 0")
    return NoiseModel(kind="uniform_bounded", params={"half_width": float(half_width)})


def gen_noise(model: NoiseModel, n: int, seed) -> np.ndarray:
    """Deterministic noise series of length n for the given seed."""
    if n < 1:
        raise ParameterError("gen_noise requires n >= 1")
    rng = np.random.default_rng(seed)
    if model.kind == "iid_gaussian":
        return rng.normal(0.0, model.params["sigma"], n)
    if model.kind == "ar1":
        p = model.params
        innov = rng.normal(0.0, p["sigma"], n + p["burn_in"])
        series = lfilter([1.0], [1.0, -p["phi"]], innov)
        return np.asarray(series[p["burn_in"]:])
    if model.kind == "uniform_bounded":
        w = model.params["half_width"]
        return rng.uniform(-w, w, n)
    raise ParameterError(f"unknown noise model {model.kind!r}")


def _rep_seed(master_seed: int, replication: int, role: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(int(master_seed), int(replication), int(role)))


@dataclass(frozen=True)
class ScenarioSpec:
    """One experiment: detector config + data-generating process."""

    kernel: Kernel
    h: float
    c: float
    noise: NoiseModel
    horizon: int
    alternative: GenericAlternative | None = None
    t_q_star: float = 0.0
    side: str = "two_sided"
    design: TimeDesign | None = None
    replications: int = 1
    master_seed: int = 0

    def __post_init__(self):
        if not self.h > 0:
            raise ParameterError("h must be > 0")
        if not self.c > 0:
            raise ParameterError("c must be > 0")
        if self.replications < 1:
            raise ParameterError("replications must be >= 1")
        if not self.horizon > self.t_q_star:
            raise ParameterError("horizon must exceed t_q_star")

    @property
    def t_q(self) -> float:
        return math.floor(self.t_q_star) + 1.0

    def monitor_config(self, h: float | None = None, horizon: int | None = None) -> MonitorConfig:
        return MonitorConfig(
            kernel=self.kernel,
            h=self.h if h is None else h,
            c=self.c,
            side=self.side,
            horizon=self.horizon if horizon is None else horizon,
        )

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "h": self.h,
            "c": self.c,
            "noise": self.noise.to_dict(),
            "horizon": self.horizon,
            "alternative": self.alternative.to_dict() if self.alternative else None,
            "t_q_star": self.t_q_star,
            "side": self.side,
            "design": self.design.to_dict() if self.design else None,
            "replications": self.replications,
            "master_seed": self.master_seed,
        }


def _drift(spec: ScenarioSpec, times: np.ndarray, h: float) -> np.ndarray:
    if spec.alternative is None:
        return np.zeros_like(times)
    t_q = spec.t_q
    past = times >= t_q
    return np.where(past, spec.alternative(np.where(past, (times - t_q) / h, 0.0)), 0.0)


def make_observations(spec: ScenarioSpec, seed, h: float | None = None, horizon: int | None = None):
    """One stream (times, values) at full horizon.

    Times are 1..horizon, or the design times horizon * quantile(i/horizon)
    when the spec carries a non-uniform design.
    """
    h = spec.h if h is None else h
    n = spec.horizon if horizon is None else int(horizon)
    if spec.design is not None and spec.design.kind != "uniform":
        times = spec.design.times(n)
    else:
        times = np.arange(1, n + 1, dtype=float)
    eps = gen_noise(spec.noise, n, seed)
    return times, _drift(spec, times, h) + eps


def _threads() -> int:
    raw = os.environ.get("KD_THREADS", "")
    if not raw.strip():
        return 1
    try:
        val = int(raw)
    except ValueError:
        raise ConfigError(f"KD_THREADS must be an integer, got {raw!r}")
    return max(1, val)


def _map_reps(fn, replications: int) -> list:
    workers = _threads()
    if workers <= 1:
        return [fn(r) for r in range(replications)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(replications)))


def _run_uniform_once(spec: ScenarioSpec, h: float, horizon: int, replication: int) -> RunRecord:
    seed = _rep_seed(spec.master_seed, replication, _ROLE_NOISE)
    n = horizon
    times = np.arange(1, n + 1, dtype=float)
    eps = gen_noise(spec.noise, n, seed)
    values = _drift(spec, times, h) + eps
    config = spec.monitor_config(h=h, horizon=n)
    return run(values, config, t_q=spec.t_q)


def _run_design_once(spec: ScenarioSpec, h: float, horizon: int, replication: int) -> RunRecord:
    """Design-time run: at step n all times move to n * quantile(i/n), so
    drift and weights are recomputed over the whole prefix each step."""
    seed = _rep_seed(spec.master_seed, replication, _ROLE_NOISE)
    eps = gen_noise(spec.noise, horizon, seed)
    design = spec.design
    kernel, c, t_q = spec.kernel, spec.c, spec.t_q
    two_sided = spec.side == "two_sided"
    stat = math.nan
    for n in range(1, horizon + 1):
        i = np.arange(1, n + 1, dtype=float)
        t = n * design.quantile(i / n)
        y = _drift(spec, t, h) + eps[:n]
        w = kernel.eval((t - n) / h) / h
        stat = float(np.dot(w, y))
        d = abs(stat) > c if two_sided else stat > c
        if d:
            delay = max(n - t_q, 0.0) / h
            return RunRecord(
                n_h=n, censored=False, steps=n, t_q=t_q, h=h,
                normed_delay=delay, last_stat=stat,
            )
    return RunRecord(
        n_h=None, censored=True, steps=horizon, t_q=t_q, h=h,
        normed_delay=None, last_stat=stat,
    )


def _run_once(spec: ScenarioSpec, h: float, horizon: int, replication: int) -> RunRecord:
    if spec.design is not None and spec.design.kind != "uniform":
        return _run_design_once(spec, h, horizon, replication)
    return _run_uniform_once(spec, h, horizon, replication)


@dataclass(frozen=True)
class SummaryRow:
    """Aggregates for one bandwidth; delays exclude censored runs."""

    h: float
    replications: int
    signaled: int
    censored: int
    false_alarms: int
    mean_delay: float
    median_delay: float
    q10: float
    q90: float
    median_abs_gap: float  # median of |rho_h - rho_reference| over replications
    rho_reference: float
    reference_status: str

    CSV_FIELDS = (
        "h", "replications", "signaled", "censored", "false_alarms",
        "mean_delay", "median_delay", "q10", "q90", "median_abs_gap",
        "rho_reference", "reference_status",
    )

    def to_dict(self) -> dict:
        def clean(x):
            if isinstance(x, float) and math.isnan(x):
                return None
            return x

        return {k: clean(getattr(self, k)) for k in self.CSV_FIELDS}


@dataclass(frozen=True)
class ExperimentSummary:
    rows: tuple
    spec: dict
    flags: tuple
    kind: str = "monte_carlo"

    def row_for(self, h: float) -> SummaryRow:
        for row in self.rows:
            if row.h == h:
                return row
        raise KeyError(f"no summary row for h={h}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rows": [r.to_dict() for r in self.rows],
            "flags": list(self.flags),
            "spec": self.spec,
        }


def _horizon_for(spec: ScenarioSpec, h: float) -> int:
    # scale the horizon with h so larger bandwidths keep room to signal
    base = spec.horizon
    scaled = int(math.ceil(spec.t_q + (base - spec.t_q) * (h / spec.h)))
    return max(base, scaled)


def monte_carlo(spec: ScenarioSpec, h_grid: Sequence[float] | None = None) -> ExperimentSummary:
    """Replicate the scenario per bandwidth and summarize normed delays.

    The delay reference per row comes from the delay solver (the design
    variant when the spec carries a non-uniform design).  Censored runs
    are counted, never imputed; false alarms are signals before t_q.
    """
    hs = [float(x) for x in (h_grid if h_grid is not None else [spec.h])]
    flags = []
    if spec.alternative is not None and not spec.alternative.continuous_at_zero:
        flags.append(
            f"alternative {spec.alternative.form} has m0(0) != 0, outside the "
            "delay-convergence hypotheses; results are reported as-is"
        )

    rows = []
    for h in hs:
        horizon = _horizon_for(spec, h)
        records = _map_reps(lambda r: _run_once(spec, h, horizon, r), spec.replications)
        delays = np.array([r.normed_delay for r in records if not r.censored], dtype=float)
        censored = sum(1 for r in records if r.censored)
        false_alarms = sum(1 for r in records if r.n_h is not None and r.n_h < spec.t_q)
        if spec.alternative is None:
            ref, ref_status = math.nan, "in_control"
        elif spec.design is not None and spec.design.kind != "uniform":
            sol = solve_rho0_design(spec.kernel, spec.alternative, spec.c, spec.design)
            ref, ref_status = sol.rho, sol.status
        else:
            sol = solve_rho0(spec.kernel, spec.alternative, spec.c)
            ref, ref_status = sol.rho, sol.status
        if delays.size:
            delays.sort()
            mean_d = float(np.mean(delays))
            med, q10, q90 = (float(np.quantile(delays, q)) for q in (0.5, 0.1, 0.9))
            gap = float(np.median(np.abs(delays - ref))) if not math.isnan(ref) else math.nan
        else:
            mean_d = med = q10 = q90 = gap = math.nan
        rows.append(
            SummaryRow(
                h=h,
                replications=spec.replications,
                signaled=spec.replications - censored,
                censored=censored,
                false_alarms=false_alarms,
                mean_delay=mean_d,
                median_delay=med,
                q10=q10,
                q90=q90,
                median_abs_gap=gap,
                rho_reference=ref,
                reference_status=ref_status,
            )
        )
    return ExperimentSummary(rows=tuple(rows), spec=spec.to_dict(), flags=tuple(flags))


@dataclass(frozen=True)
class FalseAlarmRow:
    h: float
    zeta: float
    replications: int
    alarms: int
    rate: float
    standard_error: float

    CSV_FIELDS = ("h", "zeta", "replications", "alarms", "rate", "standard_error")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.CSV_FIELDS}


@dataclass(frozen=True)
class FalseAlarmStudy:
    rows: tuple
    spec: dict
    kind: str = "false_alarm"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "rows": [r.to_dict() for r in self.rows], "spec": self.spec}


def false_alarm_study(
    spec: ScenarioSpec, h_grid: Sequence[float], zeta: float
) -> FalseAlarmStudy:
    """Empirical P(N_h <= zeta h) per bandwidth on in-control streams."""
    if spec.alternative is not None:
        raise ParameterError("false_alarm_study requires an in-control spec (alternative=None)")
    if not zeta > 0:
        raise ParameterError("zeta must be > 0")
    rows = []
    for h in [float(x) for x in h_grid]:
        cutoff = zeta * h
        horizon = int(math.ceil(cutoff))
        records = _map_reps(lambda r: _run_once(spec, h, horizon, r), spec.replications)
        alarms = sum(1 for r in records if r.n_h is not None and r.n_h <= cutoff)
        rate = alarms / spec.replications
        se = math.sqrt(rate * (1.0 - rate) / spec.replications)
        rows.append(
            FalseAlarmRow(
                h=h, zeta=zeta, replications=spec.replications,
                alarms=alarms, rate=rate, standard_error=se,
            )
        )
    return FalseAlarmStudy(rows=tuple(rows), spec=spec.to_dict())


@dataclass(frozen=True)
class CalibrationResult:
    c: float
    achieved_rate: float
    standard_error: float
    target: float
    zeta: float
    h: float
    replications: int
    iterations: int

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "achieved_rate": self.achieved_rate,
            "standard_error": self.standard_error,
            "target": self.target,
            "zeta": self.zeta,
            "h": self.h,
            "replications": self.replications,
            "iterations": self.iterations,
        }


def _max_stat(spec: ScenarioSpec, horizon: int, replication: int) -> float:
    seed = _rep_seed(spec.master_seed, replication, _ROLE_NOISE)
    _, values = make_observations(spec, seed, horizon=horizon)
    config = MonitorConfig(
        kernel=spec.kernel, h=spec.h, c=math.inf, side=spec.side, horizon=horizon
    )
    record = run(values, config, t_q=spec.t_q, capture_path=True)
    path = np.asarray(record.stat_path, dtype=float)
    return float(np.max(np.abs(path))) if spec.side == "two_sided" else float(np.max(path))


def calibrate_threshold(
    spec: ScenarioSpec,
    target: float,
    zeta: float,
    c_bounds: tuple | None = None,
    max_iter: int = 200,
) -> CalibrationResult:
    """Find c so the empirical alarm rate P(N_h <= zeta h) meets target.

    Per-replication maximal statistics are computed once; the alarm rate
    at any c is then the fraction of maxima above c, identical to what
    false_alarm_study reports on the same seeds.  Bisection stops when the
    rate is within one binomial standard error (floored at 1/replications)
    of target.
    """
    if not 0.0 < target <= 1.0:
        raise ParameterError("target rate must be in (0, 1]")
    if spec.alternative is not None:
        raise ParameterError("calibrate_threshold requires an in-control spec")
    if not zeta > 0:
        raise ParameterError("zeta must be > 0")

    horizon = int(math.ceil(zeta * spec.h))
    maxes = np.array(
        _map_reps(lambda r: _max_stat(spec, horizon, r), spec.replications), dtype=float
    )
    reps = spec.replications

    def rate_at(c: float) -> float:
        return float(np.mean(maxes > c))

    def tol_at(rate: float) -> float:
        return max(math.sqrt(rate * (1.0 - rate) / reps), 1.0 / reps)

    lo = c_bounds[0] if c_bounds else 1e-9
    hi = c_bounds[1] if c_bounds else float(np.max(maxes)) * (1.0 + 1e-9) + 1e-9
    if not 0 < lo < hi:
        raise ParameterError("c_bounds must satisfy 0 < lo < hi")

    r_lo = rate_at(lo)
    if r_lo < target - tol_at(r_lo):
        raise CalibrationError(
            f"target rate {target:g} unattainable: even c={lo:g} alarms at rate {r_lo:g}"
        )
    if abs(r_lo - target) <= tol_at(r_lo):
        se = math.sqrt(r_lo * (1.0 - r_lo) / reps)
        return CalibrationResult(lo, r_lo, se, target, zeta, spec.h, reps, 0)

    iterations = 0
    best = None
    while iterations < max_iter and hi - lo > 1e-12 * max(1.0, hi):
        iterations += 1
        mid = 0.5 * (lo + hi)
        r = rate_at(mid)
        if best is None or abs(r - target) < abs(best[1] - target):
            best = (mid, r)
        if abs(r - target) <= tol_at(r):
            se = math.sqrt(r * (1.0 - r) / reps)
            return CalibrationResult(mid, r, se, target, zeta, spec.h, reps, iterations)
        if r > target:
            lo = mid
        else:
            hi = mid
    if best is not None and abs(best[1] - target) <= max(tol_at(best[1]), 1.0 / reps):
        c, r = best
        se = math.sqrt(r * (1.0 - r) / reps)
        return CalibrationResult(c, r, se, target, zeta, spec.h, reps, iterations)
    raise CalibrationError(
        f"could not bracket target rate {target:g} within its standard error; "
        f"achievable rates step by 1/{reps}"
    )
