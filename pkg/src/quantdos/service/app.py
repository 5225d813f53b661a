"""HTTP service exposing the simulation and certification pipelines.

Thin request handlers over the core package: every endpoint validates a
config-shaped body, runs the same code path the CLI runs, and returns
structured results. Domain infeasibility maps to 409, bad run inputs to
400; validation errors surface as FastAPI's usual 422.
"""

from __future__ import annotations

import io
import json

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..analysis import (
    build_certificate,
    estimate_roa,
    roa_rows_csv,
    sweep_rows_csv,
    sweep_stability_region,
)
from ..config import (
    build_plant,
    build_schedule,
    parse_grid,
    resolve_gain,
    tuning_options,
)
from ..dos import generate_constrained, save_schedule_csv, verify_constraints
from ..errors import ConfigError, GenerationError, InfeasibleError, TuningError
from ..simloop import SimConfig, converged, run_closed_loop, write_dense_csv, write_trace_csv
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    DosGenerateRequest,
    DosGenerateResponse,
    DosVerifyRequest,
    DosVerifyResponse,
    HealthResponse,
    RoaRequest,
    RoaResponse,
    RoaRow,
    SimulateRequest,
    SimulateResponse,
    SweepRequest,
    SweepResponse,
    SweepRow,
)

app = FastAPI(
    title="quantdos",
    version=__version__,
    description="Quantized networked control under denial-of-service packet loss",
)


def _guard(fn):
    try:
        return fn()
    except ConfigError as err:
        raise HTTPException(status_code=400, detail=str(err)) from None
    except GenerationError as err:
        raise HTTPException(status_code=400, detail=str(err)) from None
    except (TuningError, InfeasibleError) as err:
        raise HTTPException(status_code=409, detail=str(err)) from None


def _csv_text(writer, payload) -> str:
    buf = io.StringIO()
    writer(payload, buf)
    return buf.getvalue()


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest) -> SimulateResponse:
    def run():
        plant = build_plant(req.plant)
        K = resolve_gain(req.controller, plant, req.sampling.T)
        horizon = (req.simulate.steps + 1) * req.sampling.T
        schedule = build_schedule(req.dos, req.sampling.T, horizon, seed=req.seed)
        if len(req.simulate.x0) != plant.n:
            raise ConfigError(
                f"simulate.x0: expected {plant.n} entries, got {len(req.simulate.x0)}"
            )
        cfg = SimConfig(
            plant=plant,
            K=K,
            T=req.sampling.T,
            M=req.sampling.M,
            E0=req.simulate.E0,
            x0=np.asarray(req.simulate.x0, dtype=float),
            schedule=schedule,
            steps=req.simulate.steps,
            params=req.dos.params(),
            ode_step=req.sampling.ode_step,
            blowup_threshold=req.simulate.blowup_threshold,
            seed=req.seed if req.seed is not None else req.dos.schedule.seed,
        )
        trace = run_closed_loop(cfg)
        summary = trace.summary()
        if len(trace) >= req.simulate.converged_tail:
            summary["converged"] = converged(
                trace, req.simulate.converged_tol, req.simulate.converged_tail
            )
        return SimulateResponse(
            summary=summary,
            trace_csv=_csv_text(write_trace_csv, trace) if req.include_trace else None,
            dense_csv=_csv_text(write_dense_csv, trace) if req.include_dense else None,
        )

    return _guard(run)


@app.post("/analyze", response_model=AnalyzeResponse)
def analyze(req: AnalyzeRequest) -> AnalyzeResponse:
    def run():
        plant = build_plant(req.plant)
        K = resolve_gain(req.controller, plant, req.sampling.T)
        cert = build_certificate(
            plant, K, req.sampling.T, req.sampling.M, req.dos.params(),
            options=tuning_options(req.analyze),
            samples=req.analyze.samples if req.analyze else 400,
            seed=req.analyze.seed if req.analyze else 0,
        )
        return AnalyzeResponse(certificate=json.loads(cert.to_json()))

    return _guard(run)


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SweepRequest) -> SweepResponse:
    def run():
        plant = build_plant(req.plant)
        K = resolve_gain(req.controller, plant, req.sampling.T)
        cert = build_certificate(
            plant, K, req.sampling.T, req.sampling.M, req.dos.params(),
            options=tuning_options(req.analyze),
            samples=req.analyze.samples if req.analyze else 400,
            seed=req.analyze.seed if req.analyze else 0,
        )
        rows = sweep_stability_region(
            req.sampling.T, cert.mu0, cert.mu1, cert.nu0, cert.nu1,
            parse_grid(req.sweep.rho_f_grid), parse_grid(req.sweep.rho_d_grid),
        )
        out_rows = [
            SweepRow(
                rho_f=r["rho_f"],
                rho_d=r["rho_d"],
                margin=None if not np.isfinite(r["margin"]) else r["margin"],
                passed=r["passed"],
            )
            for r in rows
        ]
        return SweepResponse(rows=out_rows, csv=sweep_rows_csv(rows))

    return _guard(run)


@app.post("/roa", response_model=RoaResponse)
def roa(req: RoaRequest) -> RoaResponse:
    def run():
        plant = build_plant(req.plant)
        K = resolve_gain(req.controller, plant, req.sampling.T)
        axis = parse_grid(req.roa.grid)
        mesh = np.meshgrid(*([axis] * plant.n), indexing="ij")
        points = [list(p) for p in np.stack(mesh, axis=-1).reshape(-1, plant.n)]
        schedule = None
        if req.roa.use_dos:
            horizon = (req.roa.steps + 1) * req.sampling.T
            schedule = build_schedule(req.dos, req.sampling.T, horizon, seed=req.seed)
        rows = estimate_roa(
            plant, K, req.sampling.T, points,
            steps=req.roa.steps, tol=req.roa.tol, tail=req.roa.tail,
            M=req.sampling.M, quantized=req.roa.quantized, schedule=schedule,
            ode_step=req.sampling.ode_step, workers=req.roa.workers,
        )
        return RoaResponse(rows=[RoaRow(**r) for r in rows], csv=roa_rows_csv(rows))

    return _guard(run)


@app.post("/dos/verify", response_model=DosVerifyResponse)
def dos_verify(req: DosVerifyRequest) -> DosVerifyResponse:
    def run():
        schedule = build_schedule(req.dos, req.sampling.T, req.horizon)
        verdict = verify_constraints(schedule, req.dos.params(), req.horizon)
        return DosVerifyResponse(
            passed=verdict.passed,
            horizon=verdict.horizon,
            violation_time=verdict.violation_time,
            assumption=verdict.assumption,
            detail=verdict.detail,
        )

    return _guard(run)


@app.post("/dos/generate", response_model=DosGenerateResponse)
def dos_generate(req: DosGenerateRequest) -> DosGenerateResponse:
    def run():
        strategy = req.strategy or req.dos.schedule.strategy
        seed = req.seed if req.seed is not None else req.dos.schedule.seed
        schedule = generate_constrained(
            req.dos.params(), req.sampling.T, req.horizon, strategy, seed
        )
        return DosGenerateResponse(
            attacks=list(schedule.attacks), csv=_csv_text(save_schedule_csv, schedule)
        )

    return _guard(run)
