"""Pydantic request/response models for the HTTP service."""
from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel


class HealthResponse(BaseModel):
    status: str
    version: str


class RunRequest(BaseModel):
    config: dict
    strict_monotonic: bool = False


class RunSummary(BaseModel):
    status: str
    iterations: int
    final_j: float
    final_j_t: float
    final_j_norm: float
    violations: int
    max_retries: int
    message: str


class ArtifactBundle(BaseModel):
    convergence_csv: str
    field: str
    overlaps: str


class RunResponse(BaseModel):
    status: str
    exit_code: int
    summary: RunSummary
    artifacts: ArtifactBundle
    warnings: List[str] = []


class ValidateRequest(BaseModel):
    config: dict


class ValidateResponse(BaseModel):
    valid: bool
    errors: List[str] = []
    summary: Optional[dict] = None


class ScanRequest(BaseModel):
    config: dict
    parameter: str
    values: List[float]
    strict_monotonic: bool = False


class ScanEntry(BaseModel):
    value: float
    summary: RunSummary
    artifacts: ArtifactBundle


class ScanResponse(BaseModel):
    status: str
    exit_code: int
    parameter: str
    entries: List[ScanEntry]
    summary_csv: str
    warnings: List[str] = []


class ErrorResponse(BaseModel):
    errors: List[str]
