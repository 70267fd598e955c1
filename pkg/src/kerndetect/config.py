"""Sectioned run configuration: parsing, validation, canonical echo.

Configs are INI documents with a fixed schema; unknown sections or keys
are rejected.  Every output envelope embeds the canonical rendering of
the effective config (after flag overrides), which is a parse fixed
point: re-running a command on its own echo reproduces the run, so
payloads are byte-identical.

The build_* helpers turn section dicts into domain objects; they accept
raw strings (INI) or typed values (service requests) interchangeably.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field

from . import alternatives as alt_mod
from . import kernels as kern_mod
from .delay import TimeDesign, power_design, tabulated_design, uniform_design
from .errors import ConfigError
from .sim import NoiseModel, ar1, iid_gaussian, uniform_bounded

# section -> ordered allowed keys; also fixes the canonical echo order
SCHEMA = {
    "kernel": ("form", "rate", "csv"),
    "alternative": ("form", "a", "t_max", "rate", "s0", "km", "vmax", "csv"),
    "design": ("kind", "k", "csv"),
    "noise": ("kind", "sigma", "phi", "burn_in", "half_width"),
    "monitor": ("h", "c", "side", "window_radius", "horizon", "stream", "t_q"),
    "study": ("replications", "master_seed", "t_q_star", "h_grid", "zeta", "target"),
    "solver": ("c", "r", "grid_step", "tail_policy", "lipschitz_cap", "sup_cap"),
    "select": ("candidates",),
    "oracle": ("rho", "grid_n", "lipschitz_cap", "sup_cap"),
    "output": ("out_dir", "prefix"),
}


@dataclass
class RunConfig:
    """Validated raw config: sections of stripped key/value strings."""

    sections: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}")
        sections: dict = {}
        for name in parser.sections():
            if name not in SCHEMA:
                raise ConfigError(f"unknown config section [{name}]")
            allowed = SCHEMA[name]
            sec: dict = {}
            for key, value in parser.items(name):
                if key not in allowed:
                    raise ConfigError(f"unknown key {key!r} in section [{name}]")
                sec[key] = value.strip()
            sections[name] = sec
        return cls(sections=sections)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def override(self, assignments) -> None:
        """Apply SECTION.KEY=VALUE overrides (CLI flags beat config keys)."""
        for raw in assignments or ():
            head, sep, value = raw.partition("=")
            if not sep:
                raise ConfigError(f"override must look like section.key=value, got {raw!r}")
            section, dot, key = head.strip().partition(".")
            key = key.strip().lower()
            section = section.strip().lower()
            if not dot or section not in SCHEMA or key not in SCHEMA[section]:
                raise ConfigError(f"unknown override target {head.strip()!r}")
            self.sections.setdefault(section, {})[key] = value.strip()

    def canonical_text(self) -> str:
        """Deterministic rendering; a fixed point of from_text."""
        out = io.StringIO()
        for name, allowed in SCHEMA.items():
            sec = self.sections.get(name)
            if not sec:
                continue
            out.write(f"[{name}]\n")
            for key in allowed:
                if key in sec:
                    out.write(f"{key} = {sec[key]}\n")
            out.write("\n")
        return out.getvalue()

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name, {}))

    def has(self, name: str) -> bool:
        return bool(self.sections.get(name))


def as_float(sec: dict, key: str, where: str, default=None) -> float | None:
    if key not in sec or sec[key] == "":
        if default is not None or key not in sec:
            return default
    try:
        return float(sec[key])
    except (TypeError, ValueError):
        raise ConfigError(f"[{where}] {key} must be a number, got {sec[key]!r}")


def as_int(sec: dict, key: str, where: str, default=None) -> int | None:
    if key not in sec:
        return default
    try:
        return int(str(sec[key]))
    except (TypeError, ValueError):
        raise ConfigError(f"[{where}] {key} must be an integer, got {sec[key]!r}")


def need_key(sec: dict, key: str, where: str) -> str:
    if key not in sec or str(sec[key]) == "":
        raise ConfigError(f"[{where}] requires key {key!r}")
    return str(sec[key])


def existing_path(path: str, where: str) -> str:
    if not os.path.isfile(path):
        raise ConfigError(f"[{where}] references missing file: {path}")
    return path


def build_kernel(sec: dict):
    """Kernel from a [kernel] section dict."""
    form = need_key(sec, "form", "kernel").lower()
    if form == "gaussian":
        return kern_mod.gaussian()
    if form == "epanechnikov":
        return kern_mod.epanechnikov()
    if form == "triangular":
        return kern_mod.triangular()
    if form == "laplace":
        rate = as_float(sec, "rate", "kernel")
        if rate is None:
            raise ConfigError("[kernel] laplace requires rate")
        return kern_mod.laplace(rate)
    if form == "tabulated":
        path = existing_path(need_key(sec, "csv", "kernel"), "kernel")
        return kern_mod.kernel_from_csv(path)
    raise ConfigError(f"[kernel] unknown form {form!r}")


def build_candidate(entry: str):
    """Kernel from a compact candidate token: name, laplace:RATE, csv:PATH."""
    entry = entry.strip()
    if entry in ("gaussian", "epanechnikov", "triangular"):
        return build_kernel({"form": entry})
    if entry.startswith("laplace:"):
        return build_kernel({"form": "laplace", "rate": entry.split(":", 1)[1]})
    if entry.startswith("csv:"):
        return build_kernel({"form": "tabulated", "csv": entry.split(":", 1)[1]})
    raise ConfigError(f"[select] unknown candidate {entry!r}")


def build_alternative(sec: dict | None):
    """GenericAlternative from an [alternative] section; None if absent."""
    if not sec:
        return None
    form = need_key(sec, "form", "alternative").lower()
    if form in ("none", "null"):
        return None
    if form == "step":
        return alt_mod.step(as_float(sec, "a", "alternative"))
    if form == "truncated_linear":
        return alt_mod.truncated_linear(
            as_float(sec, "a", "alternative"), as_float(sec, "t_max", "alternative")
        )
    if form == "truncated_exponential":
        return alt_mod.truncated_exponential(
            as_float(sec, "rate", "alternative"), as_float(sec, "t_max", "alternative")
        )
    if form == "michaelis_menten":
        return alt_mod.michaelis_menten(
            as_float(sec, "s0", "alternative"),
            as_float(sec, "km", "alternative"),
            as_float(sec, "vmax", "alternative"),
            as_float(sec, "t_max", "alternative"),
        )
    if form == "tabulated":
        path = existing_path(need_key(sec, "csv", "alternative"), "alternative")
        return alt_mod.alternative_from_csv(path)
    raise ConfigError(f"[alternative] unknown form {form!r}")


def build_design(sec: dict | None) -> TimeDesign | None:
    if not sec:
        return None
    kind = need_key(sec, "kind", "design").lower()
    if kind == "uniform":
        return uniform_design()
    if kind == "power":
        k = as_float(sec, "k", "design")
        if k is None:
            raise ConfigError("[design] power requires k")
        return power_design(k)
    if kind == "tabulated":
        import csv as _csv

        path = existing_path(need_key(sec, "csv", "design"), "design")
        us, qs = [], []
        with open(path, newline="") as fh:
            for rec in _csv.reader(fh):
                if not rec or rec[0].lstrip().startswith("#"):
                    continue
                try:
                    us.append(float(rec[0]))
                    qs.append(float(rec[1]))
                except (ValueError, IndexError):
                    if not us:
                        continue
                    raise ConfigError(f"bad CSV row {rec!r} in {path}")
        return tabulated_design(us, qs)
    raise ConfigError(f"[design] unknown kind {kind!r}")


def build_noise(sec: dict) -> NoiseModel:
    kind = need_key(sec, "kind", "noise").lower()
    if kind == "iid_gaussian":
        return iid_gaussian(as_float(sec, "sigma", "noise", default=1.0))
    if kind == "ar1":
        phi = as_float(sec, "phi", "noise")
        if phi is None:
            raise ConfigError("[noise] ar1 requires phi")
        sigma = as_float(sec, "sigma", "noise", default=1.0)
        burn = as_int(sec, "burn_in", "noise", default=10_000)
        return ar1(phi, sigma, burn_in=burn)
    if kind == "uniform_bounded":
        w = as_float(sec, "half_width", "noise")
        if w is None:
            raise ConfigError("[noise] uniform_bounded requires half_width")
        return uniform_bounded(w)
    raise ConfigError(f"[noise] unknown kind {kind!r}")


def parse_h_grid(sec: dict, fallback_h: float | None) -> list:
    raw = sec.get("h_grid", "")
    if not raw:
        if fallback_h is None:
            raise ConfigError("[study] requires h_grid (or [monitor] h)")
        return [float(fallback_h)]
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"[study] h_grid must be comma-separated numbers, got {raw!r}")
