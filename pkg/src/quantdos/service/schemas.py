"""Request and response models for the HTTP service.

Requests embed the same config sections the CLI consumes, so a config
file body-posts as-is. Responses carry structured rows plus, on request,
the exact CSV text the CLI would have written, so a thin client can
persist byte-identical artifacts.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from ..config import (
    AnalyzeSpec,
    ControllerSpec,
    DosSpec,
    PlantSpec,
    RoaSpec,
    SamplingSpec,
    SimulateSpec,
    SweepSpec,
)


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="ignore")

    plant: PlantSpec = Field(default_factory=PlantSpec)
    controller: ControllerSpec = Field(default_factory=ControllerSpec)
    sampling: SamplingSpec = Field(default_factory=SamplingSpec)
    dos: DosSpec = Field(default_factory=DosSpec)
    simulate: SimulateSpec
    seed: int | None = None
    include_trace: bool = False
    include_dense: bool = False


class SimulateResponse(BaseModel):
    summary: dict
    trace_csv: str | None = None
    dense_csv: str | None = None


class AnalyzeRequest(BaseModel):
    model_config = ConfigDict(extra="ignore")

    plant: PlantSpec = Field(default_factory=PlantSpec)
    controller: ControllerSpec = Field(default_factory=ControllerSpec)
    sampling: SamplingSpec = Field(default_factory=SamplingSpec)
    dos: DosSpec = Field(default_factory=DosSpec)
    analyze: AnalyzeSpec | None = None


class AnalyzeResponse(BaseModel):
    certificate: dict


class SweepRequest(AnalyzeRequest):
    sweep: SweepSpec = Field(default_factory=SweepSpec)


class SweepRow(BaseModel):
    rho_f: float
    rho_d: float
    margin: float | None  # None when the effective loss rate degenerates
    passed: bool


class SweepResponse(BaseModel):
    rows: list[SweepRow]
    csv: str


class RoaRequest(BaseModel):
    model_config = ConfigDict(extra="ignore")

    plant: PlantSpec = Field(default_factory=PlantSpec)
    controller: ControllerSpec = Field(default_factory=ControllerSpec)
    sampling: SamplingSpec = Field(default_factory=SamplingSpec)
    dos: DosSpec = Field(default_factory=DosSpec)
    roa: RoaSpec = Field(default_factory=RoaSpec)
    seed: int | None = None


class RoaRow(BaseModel):
    x0: list[float]
    converged: bool
    final_norm: float


class RoaResponse(BaseModel):
    rows: list[RoaRow]
    csv: str


class DosVerifyRequest(BaseModel):
    model_config = ConfigDict(extra="ignore")

    dos: DosSpec
    sampling: SamplingSpec = Field(default_factory=SamplingSpec)
    horizon: float = Field(default=30.0, gt=0)


class DosVerifyResponse(BaseModel):
    passed: bool
    horizon: float
    violation_time: float | None
    assumption: str | None
    detail: str


class DosGenerateRequest(BaseModel):
    model_config = ConfigDict(extra="ignore")

    dos: DosSpec
    sampling: SamplingSpec = Field(default_factory=SamplingSpec)
    horizon: float = Field(default=30.0, gt=0)
    strategy: str | None = None
    seed: int | None = None


class DosGenerateResponse(BaseModel):
    attacks: list[tuple[float, float]]
    csv: str


class HealthResponse(BaseModel):
    status: str
    version: str
