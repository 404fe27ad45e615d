"""Request and response models of the HTTP API."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field


class VerifyRequest(BaseModel):
    nffg: dict[str, Any]
    policies: list[dict[str, Any]]
    root_cause: bool = True


class VerdictOut(BaseModel):
    policy_id: str
    kind: str
    holds: bool
    witness: dict[str, Any] | None = None
    cause: dict[str, str] | None = None
    elapsed_ms: float
    prefix_checks: int = 0
    error: str | None = None


class VerifyResponse(BaseModel):
    all_hold: bool
    verdicts: list[VerdictOut]
    timing: dict[str, dict[str, float]]


class ExtractRequest(BaseModel):
    nffg: dict[str, Any]


class ChainOut(BaseModel):
    index: int
    client: str
    server: str
    path: list[str]
    kinds: list[str]
    traffic: list[dict[str, Any]]


class ExtractResponse(BaseModel):
    valid: bool
    violations: list[str]
    chains: list[ChainOut]


class OracleRequest(BaseModel):
    nffg: dict[str, Any]
    policies: list[dict[str, Any]]
    bits: int = Field(8, ge=1, le=8)


class OracleRow(BaseModel):
    policy_id: str
    kind: str
    symbolic: bool
    oracle: bool
    agree: bool


class OracleResponse(BaseModel):
    bits: int
    agree: bool
    results: list[OracleRow]


class OpexRequest(BaseModel):
    model: dict[str, Any] | None = None
    scenario: Literal["optimistic", "conservative"] | float = "optimistic"


class CategoryOut(BaseModel):
    name: str
    impact: float
    avoided: float
    shortened: float
    reduction: float


class OpexResponse(BaseModel):
    scenario: str
    fraction: float
    overall_addressable: float
    overall_total: float
    categories: list[CategoryOut]
    text: str


class ScenarioRequest(BaseModel):
    config: dict[str, Any] = Field(default_factory=dict)
    seed: int | None = None
    snapshot: bool = False


class ScenarioResponse(BaseModel):
    config: dict[str, Any]
    counters: dict[str, int]
    instances: list[int]
    reports: dict[str, str]
    snapshot: dict[str, Any] | None = None


class TroubleshootRequest(BaseModel):
    tsg: str
    snapshot: dict[str, Any] | None = None
    imbalanced: bool = False
    growing: bool = False
    seed: int = 0


class DiagnosisOut(BaseModel):
    verdict: str | None
    sink: str | None
    executed: list[str]
    branches: dict[str, str]
    values: dict[str, dict[str, Any]]
    trace: str


class Health(BaseModel):
    status: str = "ok"
    version: str
