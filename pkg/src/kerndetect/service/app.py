"""HTTP service exposing the command handlers plus streaming monitor
sessions.

One-shot endpoints accept the section models, rebuild the same
RunConfig the CLI uses, and return the handler payload with tables
inlined.  Monitor sessions hold StreamState in memory behind a lock so
several producers can feed streams concurrently.

Run with:  uvicorn kerndetect.service.app:app
"""

from __future__ import annotations

import itertools
import math
import threading

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import RunConfig
from ..errors import NoSolutionError, NumericalError
from ..monitor import StreamState, step
from . import handlers
from .models import (
    BaseRequest,
    FalseAlarmRequest,
    MonitorRunRequest,
    MonteCarloRequest,
    ObserveRequest,
    OptimalKernelRequest,
    OracleRequest,
    SelectKernelRequest,
    SessionCreateRequest,
    SolveDelayRequest,
)

app = FastAPI(title="kerndetect", version=__version__)


def _config_of(request: BaseRequest) -> RunConfig:
    return RunConfig(sections=request.sections())


def _respond(result: handlers.HandlerResult) -> dict:
    body = dict(result.payload)
    if result.tables:
        body["tables"] = {
            name: {"fields": list(fields), "rows": [list(row) for row in rows]}
            for name, (fields, rows) in result.tables.items()
        }
    return body


@app.exception_handler(NumericalError)
async def _numerical(request, exc):
    return JSONResponse(status_code=500, content={"detail": f"numerical failure: {exc}"})


@app.exception_handler(NoSolutionError)
async def _no_solution(request, exc):
    return JSONResponse(status_code=409, content={"detail": f"no solution: {exc}"})


@app.exception_handler(ValueError)
async def _invalid(request, exc):
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/solve-delay")
def solve_delay(req: SolveDelayRequest) -> dict:
    return _respond(handlers.handle_solve_delay(_config_of(req)))


@app.post("/optimal-kernel")
def optimal_kernel(req: OptimalKernelRequest) -> dict:
    return _respond(handlers.handle_optimal_kernel(_config_of(req)))


@app.post("/montecarlo")
def montecarlo(req: MonteCarloRequest) -> dict:
    return _respond(handlers.handle_montecarlo(_config_of(req)))


@app.post("/false-alarm")
def false_alarm(req: FalseAlarmRequest) -> dict:
    return _respond(handlers.handle_false_alarm(_config_of(req)))


@app.post("/select-kernel")
def select_kernel(req: SelectKernelRequest) -> dict:
    return _respond(handlers.handle_select_kernel(_config_of(req)))


@app.post("/oracle")
def oracle(req: OracleRequest) -> dict:
    return _respond(handlers.handle_oracle(_config_of(req)))


@app.post("/monitor/run")
def monitor_run(req: MonitorRunRequest) -> dict:
    obs = req.observations
    if obs and isinstance(obs[0], (list, tuple)):
        parsed = [(float(t), float(y)) for t, y in obs]
    else:
        parsed = [float(y) for y in obs]
    return _respond(handlers.handle_monitor(_config_of(req), observations=parsed))


class _Session:
    def __init__(self, config):
        self.config = config
        self.state = StreamState()
        self.lock = threading.Lock()


_sessions: dict = {}
_session_ids = itertools.count(1)
_registry_lock = threading.Lock()


def _get_session(session_id: int) -> _Session:
    with _registry_lock:
        sess = _sessions.get(session_id)
    if sess is None:
        raise HTTPException(status_code=404, detail=f"no monitor session {session_id}")
    return sess


@app.post("/monitor/sessions", status_code=201)
def create_session(req: SessionCreateRequest) -> dict:
    cfg = _config_of(req)
    kernel = handlers.build_kernel(cfg.section("kernel"))
    mon = handlers.monitor_config_from(cfg, kernel)
    with _registry_lock:
        session_id = next(_session_ids)
        _sessions[session_id] = _Session(mon)
    return {"session_id": session_id, "monitor": mon.to_dict(), "kernel": kernel.to_dict()}


@app.post("/monitor/sessions/{session_id}/observe")
def observe(session_id: int, req: ObserveRequest) -> dict:
    sess = _get_session(session_id)
    with sess.lock:
        t = req.t if req.t is not None else float(sess.state.n + 1)
        _, decision, stat = step(sess.state, req.y, t, sess.config)
        return {
            "n": sess.state.n,
            "t": t,
            "stat": None if math.isnan(stat) else stat,
            "decision": decision,
            "signaled": sess.state.signaled,
            "n_h": sess.state.n_h,
        }


@app.get("/monitor/sessions/{session_id}")
def session_state(session_id: int) -> dict:
    sess = _get_session(session_id)
    with sess.lock:
        last = sess.state.last_stat
        return {
            "n": sess.state.n,
            "signaled": sess.state.signaled,
            "n_h": sess.state.n_h,
            "last_stat": None if math.isnan(last) else last,
        }


@app.delete("/monitor/sessions/{session_id}", status_code=204)
def drop_session(session_id: int) -> None:
    with _registry_lock:
        if _sessions.pop(session_id, None) is None:
            raise HTTPException(status_code=404, detail=f"no monitor session {session_id}")
