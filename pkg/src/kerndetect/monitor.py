"""Online sequential detector.

At each step n the statistic is the kernel-weighted sum over past
observations, sum_i K((t_i - t_n)/h)/h * Y_i, with no weight
normalization.  The decision rule signals when the statistic exceeds the
threshold (in absolute value for the two-sided rule); the stopping index
N_h is the first signaling step, and the normed delay relative to a change
onset t_q is max(N_h - t_q, 0)/h.

Only observations within window_radius of the current time are retained.
For compact-support kernels with window_radius >= support_radius * h this
is exact; for infinite-support kernels the default window is the kernel's
effective radius times h, beyond which the discarded tail weight is below
1e-12.  window_radius=inf keeps full history.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, OrderingError, ParameterError
from .kernels import Kernel

__all__ = [
    "MonitorConfig",
    "StreamState",
    "RunRecord",
    "smoother_stat",
    "step",
    "run",
]

SIDES = ("two_sided", "one_sided_upper")


@dataclass(frozen=True)
class MonitorConfig:
    """Detector parameters; validated at construction, immutable after."""

    kernel: Kernel
    h: float
    c: float
    side: str = "two_sided"
    window_radius: float | None = None  # None -> effective_radius * h; inf -> full history
    horizon: int | None = None

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigError("bandwidth h must be > 0")
        if not self.c > 0:
            raise ConfigError("threshold c must be > 0")
        if self.side not in SIDES:
            raise ConfigError(f"side must be one of {SIDES}")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.window_radius is None:
            object.__setattr__(self, "window_radius", self.kernel.effective_radius * self.h)
        if not self.window_radius > 0:
            raise ConfigError("window_radius must be > 0")
        reach = self.kernel.support_radius * self.h
        if math.isfinite(reach) and self.window_radius < reach:
            raise ConfigError(
                f"window underflow: window_radius {self.window_radius:g} is smaller than "
                f"the kernel reach {reach:g} (support_radius * h); observations would be "
                "dropped while still carrying weight"
            )

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "h": self.h,
            "c": self.c,
            "side": self.side,
            "window_radius": None if math.isinf(self.window_radius) else self.window_radius,
            "horizon": self.horizon,
        }


@dataclass
class StreamState:
    """Mutable single-stream state: the retained window plus decision flags.

    times/values hold only observations within window_radius of the last
    time; n counts everything seen.  Once signaled the state is frozen and
    further steps are no-ops.
    """

    n: int = 0
    times: list = field(default_factory=list)
    values: list = field(default_factory=list)
    last_stat: float = math.nan
    signaled: bool = False
    n_h: int | None = None

    def copy(self) -> "StreamState":
        return StreamState(
            n=self.n,
            times=list(self.times),
            values=list(self.values),
            last_stat=self.last_stat,
            signaled=self.signaled,
            n_h=self.n_h,
        )


def smoother_stat(state: StreamState, config: MonitorConfig) -> float:
    """Kernel-weighted sum over the retained window at the latest time."""
    if state.n < 1 or not state.times:
        raise ParameterError("smoother_stat requires at least one observation")
    t_n = state.times[-1]
    ts = np.asarray(state.times, dtype=float)
    ys = np.asarray(state.values, dtype=float)
    w = config.kernel.eval((ts - t_n) / config.h) / config.h
    return float(np.dot(w, ys))


def step(state: StreamState, y: float, t: float, config: MonitorConfig):
    """Ingest one observation; returns (state, decision, stat).

    Signaled states are frozen: stepping them returns the recorded
    decision without consuming the observation.
    """
    if state.signaled:
        return state, 1, state.last_stat
    if state.times and not t > state.times[-1]:
        raise OrderingError(
            f"observation times must increase: got t={t!r} after t={state.times[-1]!r}"
        )
    state.times.append(float(t))
    state.values.append(float(y))
    state.n += 1
    if not math.isinf(config.window_radius):
        cut = bisect.bisect_left(state.times, t - config.window_radius)
        if cut > 0:
            del state.times[:cut]
            del state.values[:cut]
    stat = smoother_stat(state, config)
    state.last_stat = stat
    if config.side == "two_sided":
        d = 1 if abs(stat) > config.c else 0
    else:
        d = 1 if stat > config.c else 0
    if d:
        state.signaled = True
        state.n_h = state.n
    return state, d, stat


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one monitored stream, scored against a change onset t_q."""

    n_h: int | None  # stopping index; None when censored at the horizon
    censored: bool
    steps: int
    t_q: float
    h: float
    normed_delay: float | None
    last_stat: float
    stat_path: tuple | None = None

    @property
    def signaled(self) -> bool:
        return self.n_h is not None

    def to_dict(self) -> dict:
        return {
            "n_h": self.n_h,
            "censored": self.censored,
            "steps": self.steps,
            "t_q": self.t_q,
            "h": self.h,
            "normed_delay": self.normed_delay,
            "last_stat": None if math.isnan(self.last_stat) else self.last_stat,
            "stat_path": list(self.stat_path) if self.stat_path is not None else None,
        }


def run(
    observations,
    config: MonitorConfig,
    t_q: float,
    capture_path: bool = False,
) -> RunRecord:
    """Feed a time-ordered stream until it signals or runs out.

    observations is a sequence of values (times default to 1, 2, ...) or
    of (time, value) pairs.  t_q is the change onset used only for
    scoring; the detector never reads it.  A stream that exhausts its
    observations (or config.horizon) without signaling is censored, with
    no delay reported.
    """
    observations = list(observations)
    if not observations:
        raise ParameterError("run needs at least one observation")
    state = StreamState()
    path = [] if capture_path else None
    limit = config.horizon if config.horizon is not None else None

    consumed = 0
    for idx, obs in enumerate(observations):
        if limit is not None and consumed >= limit:
            break
        if np.ndim(obs) == 0:
            t, y = float(idx + 1), float(obs)
        else:
            t, y = float(obs[0]), float(obs[1])
        _, d, stat = step(state, y, t, config)
        consumed += 1
        if path is not None:
            path.append(stat)
        if d:
            break

    if state.n_h is not None:
        # t_signal == n_h for the default design t_n = n; explicit-time
        # streams are scored on the clock that t_q lives on
        t_signal = state.times[-1]
        delay = max(t_signal - t_q, 0.0) / config.h
        return RunRecord(
            n_h=state.n_h,
            censored=False,
            steps=consumed,
            t_q=t_q,
            h=config.h,
            normed_delay=delay,
            last_stat=state.last_stat,
            stat_path=tuple(path) if path is not None else None,
        )
    return RunRecord(
        n_h=None,
        censored=True,
        steps=consumed,
        t_q=t_q,
        h=config.h,
        normed_delay=None,
        last_stat=state.last_stat,
        stat_path=tuple(path) if path is not None else None,
    )
