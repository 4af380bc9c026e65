"""FastAPI service wrapping the optimization runner.

Configs are validated inside the handlers so schema violations come back as
structured 400 responses naming the offending keys, for both the run and
scan endpoints.  Exit codes follow the CLI contract: 0 on success, 2 when a
monotonicity violation occurred and strict mode was requested, 1 on errors.
"""
from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import parse_config, problem_summary
from ..errors import ConfigError, Krotov2Error
from ..runner import RunArtifacts, execute_run, execute_scan
from .schemas import (
    ArtifactBundle,
    ErrorResponse,
    HealthResponse,
    RunRequest,
    RunResponse,
    RunSummary,
    ScanEntry,
    ScanRequest,
    ScanResponse,
    ValidateRequest,
    ValidateResponse,
)


def _error_response(status_code: int, errors: list[str]) -> JSONResponse:
    payload = ErrorResponse(errors=errors)
    return JSONResponse(status_code=status_code,
                        content=payload.model_dump())


def _exit_code(artifacts: RunArtifacts, strict_monotonic: bool) -> int:
    if artifacts.status != "ok":
        return 1
    if strict_monotonic and artifacts.summary["violations"] > 0:
        return 2
    return 0


def _bundle(artifacts: RunArtifacts) -> ArtifactBundle:
    return ArtifactBundle(convergence_csv=artifacts.convergence_csv,
                          field=artifacts.field_text,
                          overlaps=artifacts.overlaps_text)


def create_app() -> FastAPI:
    app = FastAPI(title="krotov2", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/validate", response_model=ValidateResponse)
    def validate(request: ValidateRequest):
        try:
            config = parse_config(request.config)
            summary = problem_summary(config)
        except (ConfigError, Krotov2Error) as exc:
            return ValidateResponse(valid=False, errors=str(exc).split("; "))
        return ValidateResponse(valid=True, summary=summary)

    @app.post("/runs", response_model=RunResponse,
              responses={400: {"model": ErrorResponse}})
    def run(request: RunRequest):
        try:
            config = parse_config(request.config)
        except ConfigError as exc:
            return _error_response(400, str(exc).split("; "))
        try:
            artifacts = execute_run(config)
        except Krotov2Error as exc:
            return _error_response(400, [str(exc)])
        return RunResponse(
            status=artifacts.status,
            exit_code=_exit_code(artifacts, request.strict_monotonic),
            summary=RunSummary(**artifacts.summary),
            artifacts=_bundle(artifacts),
            warnings=artifacts.warnings,
        )

    @app.post("/scans", response_model=ScanResponse,
              responses={400: {"model": ErrorResponse}})
    def scan(request: ScanRequest):
        try:
            config = parse_config(request.config)
            result = execute_scan(config, request.parameter, request.values)
        except (ConfigError, Krotov2Error) as exc:
            return _error_response(400, str(exc).split("; "))
        entries = []
        exit_code = 0
        for value, run_artifacts in zip(result.values, result.runs):
            entries.append(ScanEntry(
                value=float(value),
                summary=RunSummary(**run_artifacts.summary),
                artifacts=_bundle(run_artifacts),
            ))
            exit_code = max(exit_code,
                            _exit_code(run_artifacts,
                                       request.strict_monotonic))
        status = "ok" if exit_code == 0 else "violations"
        if not entries:
            status = "empty"
        return ScanResponse(
            status=status, exit_code=exit_code, parameter=result.parameter,
            entries=entries, summary_csv=result.summary_csv,
            warnings=result.warnings,
        )

    return app


app = create_app()
