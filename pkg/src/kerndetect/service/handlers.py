"""Command handlers shared by the CLI and the HTTP service.

Each handler takes a validated RunConfig and returns a HandlerResult:
a JSON-safe payload plus named tables.  The CLI writes the payload as
a JSON file and each table as a headered CSV; the service returns the
same payload with tables inlined.  Payloads embed the canonical config
echo and the package version, and contain no timestamps, so identical
configs produce byte-identical artifacts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..config import (
    RunConfig,
    as_float,
    as_int,
    build_alternative,
    build_candidate,
    build_design,
    build_kernel,
    build_noise,
    existing_path,
    need_key,
    parse_h_grid,
)
from ..delay import lp_oracle, select_kernel, solve_optimal_pair, solve_rho0, solve_rho0_design
from ..errors import ConfigError, ParameterError
from ..kernels import Kernel
from ..monitor import MonitorConfig, run
from ..sim import ScenarioSpec, false_alarm_study, monte_carlo


@dataclass
class HandlerResult:
    payload: dict
    tables: dict = field(default_factory=dict)  # name -> (fieldnames, rows)


def json_safe(obj):
    """Strict-JSON copy: nan -> None, +-inf -> 'inf'/'-inf', numpy -> python."""
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _envelope(command: str, cfg: RunConfig, **extra) -> dict:
    body = {"command": command, "version": __version__, "config": cfg.canonical_text()}
    body.update(json_safe(extra))
    return body


def _require_alternative(cfg: RunConfig, command: str):
    alt = build_alternative(cfg.section("alternative"))
    if alt is None:
        raise ConfigError(f"{command} requires an [alternative] section")
    return alt


def _solver_threshold(cfg: RunConfig) -> float:
    sec = cfg.section("solver")
    c = as_float(sec, "c", "solver")
    if c is None:
        raise ConfigError("[solver] requires threshold c")
    return c


def _solver_extent(cfg: RunConfig):
    sec = cfg.section("solver")
    return as_float(sec, "r", "solver"), as_float(sec, "grid_step", "solver")


def _cap(sec: dict, key: str, fallback: float | None) -> float | None:
    """A cap value, 'auto' deferring to the fallback."""
    raw = sec.get(key)
    if raw is None or str(raw).lower() == "auto":
        return fallback
    return as_float(sec, key, "oracle")


def kernel_table(kernel: Kernel, points: int = 1025):
    """(z, value) rows tabulating a kernel; exact knots for tabulated forms."""
    if kernel.form == "tabulated":
        zs = np.asarray(kernel.params["grid"], dtype=float)
    else:
        r = kernel.support_radius
        if not math.isfinite(r):
            r = kernel.effective_radius
        zs = np.linspace(-r, r, points)
        bps = [b for b in kernel.breakpoints if -r <= b <= r]
        if bps:
            zs = np.unique(np.concatenate([zs, np.asarray(bps, dtype=float)]))
    vals = kernel.eval(zs)
    return [(float(z), float(v)) for z, v in zip(zs, vals)]


def handle_solve_delay(cfg: RunConfig) -> HandlerResult:
    """Normed-delay solve; uses the design variant when [design] is given."""
    kernel = build_kernel(cfg.section("kernel"))
    alt = _require_alternative(cfg, "solve-delay")
    c = _solver_threshold(cfg)
    bound, step = _solver_extent(cfg)
    design = build_design(cfg.section("design")) if cfg.has("design") else None
    if design is None:
        sol = solve_rho0(kernel, alt, c, R=bound, grid_step=step)
    else:
        sol = solve_rho0_design(kernel, alt, c, design, R=bound, grid_step=step)
    payload = _envelope(
        "solve-delay",
        cfg,
        kernel=kernel.to_dict(),
        alternative=alt.to_dict(),
        design=design.to_dict() if design is not None else None,
        solution=sol.to_dict(),
    )
    return HandlerResult(payload)


def handle_optimal_kernel(cfg: RunConfig) -> HandlerResult:
    alt = _require_alternative(cfg, "optimal-kernel")
    c = _solver_threshold(cfg)
    sec = cfg.section("solver")
    _, step = _solver_extent(cfg)
    pair = solve_optimal_pair(
        alt,
        c,
        tail_policy=sec.get("tail_policy", "lipschitz-bump"),
        grid_step=step,
        lipschitz_cap=as_float(sec, "lipschitz_cap", "solver"),
        sup_cap=as_float(sec, "sup_cap", "solver"),
    )
    payload = _envelope(
        "optimal-kernel",
        cfg,
        alternative=alt.to_dict(),
        pair=pair.to_dict(),
    )
    table = kernel_table(pair.kernel)
    return HandlerResult(payload, {"kernel": (("z", "value"), table)})


def read_stream(path: str):
    """Observations from CSV: (time, value) rows, or bare values."""
    existing_path(path, "monitor")
    pairs, scalars = [], []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            rec = [tok.strip() for tok in rec if tok.strip() != ""]
            if not rec or rec[0].startswith("#"):
                continue
            try:
                nums = [float(tok) for tok in rec]
            except ValueError:
                if not pairs and not scalars:
                    continue  # header row
                raise ConfigError(f"bad stream row {rec!r} in {path}")
            if len(nums) == 1:
                scalars.append(nums[0])
            elif len(nums) == 2:
                pairs.append((nums[0], nums[1]))
            else:
                raise ConfigError(f"stream rows need 1 or 2 columns, got {rec!r}")
    if pairs and scalars:
        raise ConfigError(f"stream {path} mixes timed and untimed rows")
    if not pairs and not scalars:
        raise ConfigError(f"stream {path} holds no observations")
    return pairs or scalars


def monitor_config_from(cfg: RunConfig, kernel: Kernel) -> MonitorConfig:
    sec = cfg.section("monitor")
    h = as_float(sec, "h", "monitor")
    c = as_float(sec, "c", "monitor")
    if h is None or c is None:
        raise ConfigError("[monitor] requires h and c")
    window = sec.get("window_radius")
    if window is not None and str(window).lower() in ("full", "inf"):
        window = math.inf
    elif window is not None:
        window = as_float(sec, "window_radius", "monitor")
    horizon = as_int(sec, "horizon", "monitor")
    return MonitorConfig(
        kernel=kernel,
        h=h,
        c=c,
        side=sec.get("side", "two_sided"),
        window_radius=window,
        horizon=horizon,
    )


def handle_monitor(cfg: RunConfig, observations=None) -> HandlerResult:
    """Score one observation stream; reads [monitor] stream unless given."""
    kernel = build_kernel(cfg.section("kernel"))
    mon = monitor_config_from(cfg, kernel)
    sec = cfg.section("monitor")
    if observations is None:
        observations = read_stream(need_key(sec, "stream", "monitor"))
    t_q = as_float(sec, "t_q", "monitor", default=0.0)
    record = run(observations, mon, t_q, capture_path=True)
    payload = _envelope(
        "monitor",
        cfg,
        kernel=kernel.to_dict(),
        monitor=mon.to_dict(),
        t_q=t_q,
        record=record.to_dict(),
    )
    return HandlerResult(payload)


def scenario_from(cfg: RunConfig, command: str, in_control: bool = False) -> ScenarioSpec:
    kernel = build_kernel(cfg.section("kernel"))
    mon = cfg.section("monitor")
    study = cfg.section("study")
    h = as_float(mon, "h", "monitor")
    c = as_float(mon, "c", "monitor")
    if h is None or c is None:
        raise ConfigError("[monitor] requires h and c")
    if not cfg.has("noise"):
        raise ConfigError(f"{command} requires a [noise] section")
    alt = None if in_control else build_alternative(cfg.section("alternative"))
    horizon = as_int(mon, "horizon", "monitor")
    if horizon is None:
        raise ConfigError("[monitor] requires horizon for simulation commands")
    return ScenarioSpec(
        kernel=kernel,
        h=h,
        c=c,
        noise=build_noise(cfg.section("noise")),
        horizon=horizon,
        alternative=alt,
        t_q_star=as_float(study, "t_q_star", "study", default=0.0),
        side=mon.get("side", "two_sided"),
        design=build_design(cfg.section("design")) if cfg.has("design") else None,
        replications=as_int(study, "replications", "study", default=1),
        master_seed=as_int(study, "master_seed", "study", default=0),
    )


def handle_montecarlo(cfg: RunConfig) -> HandlerResult:
    spec = scenario_from(cfg, "montecarlo")
    h_grid = parse_h_grid(cfg.section("study"), spec.h)
    summary = monte_carlo(spec, h_grid=h_grid)
    payload = _envelope("montecarlo", cfg, summary=summary.to_dict())
    fields = summary.rows[0].CSV_FIELDS
    rows = [tuple(row.to_dict()[k] for k in fields) for row in summary.rows]
    return HandlerResult(payload, {"summary": (fields, rows)})


def handle_false_alarm(cfg: RunConfig) -> HandlerResult:
    if cfg.has("alternative"):
        alt = build_alternative(cfg.section("alternative"))
        if alt is not None:
            raise ParameterError("false-alarm runs in control; drop the [alternative] section")
    study = cfg.section("study")
    zeta = as_float(study, "zeta", "study", default=2.0)
    mon = cfg.section("monitor")
    h_grid = parse_h_grid(study, as_float(mon, "h", "monitor"))
    if as_int(mon, "horizon", "monitor") is None:
        cfg.sections.setdefault("monitor", {})["horizon"] = str(
            max(1, math.ceil(zeta * max(h_grid)))
        )
    spec = scenario_from(cfg, "false-alarm", in_control=True)
    study_out = false_alarm_study(spec, h_grid, zeta)
    payload = _envelope("false-alarm", cfg, study=study_out.to_dict())
    fields = study_out.rows[0].CSV_FIELDS
    rows = [tuple(row.to_dict()[k] for k in fields) for row in study_out.rows]
    return HandlerResult(payload, {"rates": (fields, rows)})


def handle_select_kernel(cfg: RunConfig) -> HandlerResult:
    alt = _require_alternative(cfg, "select-kernel")
    c = _solver_threshold(cfg)
    bound, step = _solver_extent(cfg)
    raw = need_key(cfg.section("select"), "candidates", "select")
    tokens = [tok.strip() for tok in raw.split(",") if tok.strip()]
    if not tokens:
        raise ConfigError("[select] candidates is empty")
    kernels = []
    for tok in tokens:
        if tok == "optimal":
            kernels.append(solve_optimal_pair(alt, c).kernel)
        else:
            kernels.append(build_candidate(tok))
    sel = select_kernel(kernels, alt, c, R=bound, grid_step=step)
    payload = _envelope(
        "select-kernel",
        cfg,
        alternative=alt.to_dict(),
        candidates=[k.name for k in kernels],
        selection=sel.to_dict(),
    )
    return HandlerResult(payload)


def handle_oracle(cfg: RunConfig) -> HandlerResult:
    """LP reachability probe; rho and caps may be 'auto' via the optimal pair."""
    alt = _require_alternative(cfg, "oracle")
    sec = cfg.section("oracle")
    raw_rho = sec.get("rho", "auto")
    pair = None
    if str(raw_rho).lower() == "auto":
        pair = solve_optimal_pair(alt, _solver_threshold(cfg))
        rho = pair.rho_star
    else:
        rho = as_float(sec, "rho", "oracle")
    fallback_lip = pair.kernel.lipschitz_const if pair is not None else None
    fallback_sup = 2.0 * pair.kernel.sup_bound if pair is not None else None
    lip = _cap(sec, "lipschitz_cap", fallback_lip)
    sup = _cap(sec, "sup_cap", fallback_sup)
    if lip is None or sup is None:
        raise ConfigError("[oracle] requires lipschitz_cap and sup_cap (or rho = auto)")
    probe = lp_oracle(alt, rho, grid_n=as_int(sec, "grid_n", "oracle", default=256),
                      lipschitz_cap=lip, sup_cap=sup)
    extra = {}
    if pair is not None:
        extra["optimal_pair"] = pair.to_dict()
        extra["objective_of_optimal"] = probe.objective_of(pair.kernel, alt)
    payload = _envelope("oracle", cfg, alternative=alt.to_dict(), probe=probe.to_dict(), **extra)
    table = kernel_table(probe.argmax_kernel)
    return HandlerResult(payload, {"kernel": (("z", "value"), table)})


HANDLERS = {
    "solve-delay": handle_solve_delay,
    "optimal-kernel": handle_optimal_kernel,
    "monitor": handle_monitor,
    "montecarlo": handle_montecarlo,
    "false-alarm": handle_false_alarm,
    "select-kernel": handle_select_kernel,
    "oracle": handle_oracle,
}
