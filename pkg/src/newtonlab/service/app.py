"""FastAPI application exposing the experiment engine.

One POST endpoint per experiment kind, mirroring the CLI subcommands; the
response carries the same report dict and CSV-ready tables the CLI writes to
disk.  Runs are synchronous; this is a single-user lab service, not a queue.
"""

from __future__ import annotations

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse

from .. import __version__, experiments
from ..errors import NumericalFailure, ValidationFailure
from ..reports import plain
from . import schemas


def _error_payload(code: str, exc: Exception) -> dict:
    return {"error": {"code": code, "message": str(exc)}}


def create_app() -> FastAPI:
    app = FastAPI(
        title="newtonlab",
        version=__version__,
        description="Numerical experiments on time-periodic Newton equations: "
                    "conjugate-point scans, minimal-shell sampling, discriminant sweeps.",
    )

    @app.exception_handler(ValidationFailure)
    async def _validation_handler(request: Request, exc: ValidationFailure):
        return JSONResponse(status_code=400, content=_error_payload("validation", exc))

    @app.exception_handler(NumericalFailure)
    async def _numerical_handler(request: Request, exc: NumericalFailure):
        return JSONResponse(status_code=500, content=_error_payload("numerical", exc))

    @app.get("/health", response_model=schemas.HealthResponse)
    async def health():
        return {"status": "ok", "version": __version__}

    def _respond(result: experiments.ExperimentResult) -> JSONResponse:
        return JSONResponse(content=plain(result.to_payload()))

    @app.post("/experiments/conjugate-scan", response_model=schemas.ExperimentResponse)
    def conjugate_scan(cfg: schemas.ConjugateScanConfig,
                       threads: int | None = Query(default=None, ge=1)):
        return _respond(experiments.run(cfg, threads=threads))

    @app.post("/experiments/estimate-m", response_model=schemas.ExperimentResponse)
    def estimate_m(cfg: schemas.EstimateMConfig,
                   threads: int | None = Query(default=None, ge=1)):
        return _respond(experiments.run(cfg, threads=threads))

    @app.post("/experiments/dalpha-sweep", response_model=schemas.ExperimentResponse)
    def dalpha_sweep(cfg: schemas.DalphaSweepConfig,
                     threads: int | None = Query(default=None, ge=1)):
        return _respond(experiments.run(cfg, threads=threads))

    @app.post("/experiments/crosscheck-d", response_model=schemas.ExperimentResponse)
    def crosscheck_d(cfg: schemas.CrosscheckDConfig,
                     threads: int | None = Query(default=None, ge=1)):
        return _respond(experiments.run(cfg, threads=threads))

    @app.post("/experiments/verify-correspondence", response_model=schemas.ExperimentResponse)
    def verify_correspondence(cfg: schemas.VerifyCorrespondenceConfig,
                              threads: int | None = Query(default=None, ge=1)):
        return _respond(experiments.run(cfg, threads=threads))

    return app
