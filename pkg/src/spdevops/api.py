"""HTTP front-end; run with ``spdevops serve`` or ``uvicorn spdevops.api:app``."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__, service
from .nffg import NffgError
from .opex import InvalidModel
from .oracle import DomainTooLarge
from .scenario import ConfigError, DeploymentRejected
from .schemas import (
    DiagnosisOut,
    ExtractRequest,
    ExtractResponse,
    Health,
    OpexRequest,
    OpexResponse,
    OracleRequest,
    OracleResponse,
    ScenarioRequest,
    ScenarioResponse,
    TroubleshootRequest,
    VerifyRequest,
    VerifyResponse,
)
from .troubleshoot import ExprTypeError, TsgError, UnknownTarget, UnknownTool

app = FastAPI(title="spdevops", version=__version__)

# bad input, not a server fault
_CLIENT_ERRORS = (NffgError, InvalidModel, ConfigError, DomainTooLarge, TsgError, ExprTypeError, UnknownTool, UnknownTarget, KeyError, ValueError)


def _call(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except DeploymentRejected as exc:
        raise HTTPException(409, str(exc)) from exc
    except _CLIENT_ERRORS as exc:
        raise HTTPException(422, f"{type(exc).__name__}: {exc}") from exc


@app.get("/health", response_model=Health)
def health():
    return Health(version=__version__)


@app.post("/verify", response_model=VerifyResponse)
def verify(req: VerifyRequest):
    return _call(service.verify, req.nffg, req.policies, req.root_cause)


@app.post("/extract", response_model=ExtractResponse)
def extract(req: ExtractRequest):
    return _call(service.extract, req.nffg)


@app.post("/oracle", response_model=OracleResponse)
def oracle(req: OracleRequest):
    return _call(service.oracle_check, req.nffg, req.policies, req.bits)


@app.post("/opex", response_model=OpexResponse)
def opex(req: OpexRequest):
    return _call(service.opex, req.model, req.scenario)


@app.post("/scenario/run", response_model=ScenarioResponse)
def scenario_run(req: ScenarioRequest):
    return _call(service.run_scenario, req.config, req.seed, req.snapshot)


@app.post("/troubleshoot", response_model=DiagnosisOut)
def troubleshoot(req: TroubleshootRequest):
    return _call(service.troubleshoot, req.tsg, req.snapshot, req.imbalanced, req.growing, req.seed)
