"""Request models for the HTTP service.

Each model mirrors one config section; `sections()` on a request turns
it into the same section/key/value mapping the CLI reads from INI, so
both front ends share one validation and execution path.  Unknown keys
are rejected at the boundary, matching the config parser.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


def _stringify(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class SectionModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    def as_section(self) -> dict:
        return {k: _stringify(v) for k, v in self.model_dump(exclude_none=True).items()}


class KernelSection(SectionModel):
    form: str
    rate: float | None = None
    csv: str | None = None


class AlternativeSection(SectionModel):
    form: str
    a: float | None = None
    t_max: float | None = None
    rate: float | None = None
    s0: float | None = None
    km: float | None = None
    vmax: float | None = None
    csv: str | None = None


class DesignSection(SectionModel):
    kind: str
    k: float | None = None
    csv: str | None = None


class NoiseSection(SectionModel):
    kind: str
    sigma: float | None = None
    phi: float | None = None
    burn_in: int | None = None
    half_width: float | None = None


class MonitorSection(SectionModel):
    h: float
    c: float
    side: str | None = None
    window_radius: float | str | None = None
    horizon: int | None = None
    t_q: float | None = None


class StudySection(SectionModel):
    replications: int | None = None
    master_seed: int | None = None
    t_q_star: float | None = None
    h_grid: str | None = None
    zeta: float | None = None


class SolverSection(SectionModel):
    c: float
    r: float | None = None
    grid_step: float | None = None
    tail_policy: str | None = None
    lipschitz_cap: float | None = None
    sup_cap: float | None = None


class SelectSection(SectionModel):
    candidates: str


class OracleSection(SectionModel):
    rho: float | str | None = None
    grid_n: int | None = None
    lipschitz_cap: float | str | None = None
    sup_cap: float | str | None = None


class BaseRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    def sections(self) -> dict:
        out = {}
        for name, value in self:
            if isinstance(value, SectionModel):
                out[name] = value.as_section()
        return out


class SolveDelayRequest(BaseRequest):
    kernel: KernelSection
    alternative: AlternativeSection
    solver: SolverSection
    design: DesignSection | None = None


class OptimalKernelRequest(BaseRequest):
    alternative: AlternativeSection
    solver: SolverSection


class MonitorRunRequest(BaseRequest):
    kernel: KernelSection
    monitor: MonitorSection
    observations: list = Field(min_length=1)


class MonteCarloRequest(BaseRequest):
    kernel: KernelSection
    monitor: MonitorSection
    noise: NoiseSection
    study: StudySection | None = None
    alternative: AlternativeSection | None = None
    design: DesignSection | None = None


class FalseAlarmRequest(BaseRequest):
    kernel: KernelSection
    monitor: MonitorSection
    noise: NoiseSection
    study: StudySection | None = None


class SelectKernelRequest(BaseRequest):
    alternative: AlternativeSection
    solver: SolverSection
    select: SelectSection


class OracleRequest(BaseRequest):
    alternative: AlternativeSection
    oracle: OracleSection | None = None
    solver: SolverSection | None = None


class SessionCreateRequest(BaseRequest):
    kernel: KernelSection
    monitor: MonitorSection


class ObserveRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    y: float
    t: float | None = None
