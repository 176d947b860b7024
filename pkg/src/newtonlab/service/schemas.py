"""Request/response envelopes for the HTTP service.

Request bodies are the experiment configs themselves (re-exported here);
responses wrap the engine's report and tables.
"""

from __future__ import annotations

from pydantic import BaseModel

from ..configs import (  # noqa: F401  (re-exported as the request schemas)
    ConjugateScanConfig,
    CrosscheckDConfig,
    DalphaSweepConfig,
    EstimateMConfig,
    ModeConfig,
    PotentialConfig,
    PotentialSource,
    VerifyCorrespondenceConfig,
)


class TablePayload(BaseModel):
    columns: list[str]
    rows: list[list]


class ExperimentResponse(BaseModel):
    report: dict
    tables: dict[str, TablePayload] = {}


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorDetail(BaseModel):
    code: str
    message: str


class ErrorResponse(BaseModel):
    error: ErrorDetail
