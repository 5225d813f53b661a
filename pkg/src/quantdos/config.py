"""Run configuration: one JSON document shared by every command.

The schema has per-command sections (simulate, analyze, sweep, roa) on
top of the shared plant/controller/sampling/dos sections. The same
pydantic models validate CLI config files and service request bodies, so
a config that works locally is exactly a valid request payload.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .dos import DoSParams, DoSSchedule, generate_constrained, load_schedule_csv
from .errors import ConfigError
from .numerics import discretize, dlqr
from .plant import PlantModel, linearize, make_plant
from .simloop import SimConfig

__all__ = [
    "PlantSpec",
    "ControllerSpec",
    "SamplingSpec",
    "ScheduleSpec",
    "DosSpec",
    "SimulateSpec",
    "AnalyzeSpec",
    "SweepSpec",
    "RoaSpec",
    "RootConfig",
    "load_config",
    "parse_grid",
    "build_plant",
    "resolve_gain",
    "build_schedule",
    "build_sim_config",
    "tuning_options",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PlantSpec(_Strict):
    name: Literal["lienard", "linear", "polynomial"] = "lienard"
    params: dict = Field(default_factory=dict)


class LqrSpec(_Strict):
    Q: list[list[float]] | None = None  # defaults to identity
    R: list[list[float]] | None = None


class ControllerSpec(_Strict):
    K: list[list[float]] | None = None
    lqr: LqrSpec | None = None


class SamplingSpec(_Strict):
    T: float = Field(default=0.1, gt=0)
    M: int = Field(default=6, ge=2)
    ode_step: float | None = Field(default=None, gt=0)


class ScheduleSpec(_Strict):
    strategy: Literal["periodic", "front_loaded", "random"] = "periodic"
    seed: int = 0
    file: str | None = None
    attacks: list[tuple[float, float]] | None = None


class DosSpec(_Strict):
    kappa_f: float = Field(default=0.0, ge=0)
    rho_f: float = Field(default=0.0, ge=0)
    kappa_d: float = Field(default=0.0, ge=0)
    rho_d: float = Field(default=0.0, ge=0, lt=1)
    schedule: ScheduleSpec = Field(default_factory=ScheduleSpec)

    def params(self) -> DoSParams:
        return DoSParams(
            kappa_f=self.kappa_f, rho_f=self.rho_f, kappa_d=self.kappa_d, rho_d=self.rho_d
        )


class SimulateSpec(_Strict):
    x0: list[float]
    E0: float = Field(ge=0)
    steps: int = Field(ge=1)
    blowup_threshold: float = Field(default=1e6, gt=0)
    converged_tol: float = Field(default=1e-2, gt=0)
    converged_tail: int = Field(default=50, ge=1)


class AnalyzeSpec(_Strict):
    samples: int = Field(default=400, ge=10)
    seed: int = 0
    phi0_grid: list[float] | None = None
    phi1_grid: list[float] | None = None
    gamma_grid: list[float] | None = None
    eps_grid: list[float] | None = None
    eta1: float = Field(default=1.0, gt=0)


class SweepSpec(_Strict):
    rho_f_grid: str = "0:1:0.05"
    rho_d_grid: str = "0:0.95:0.05"


class RoaSpec(_Strict):
    grid: str = "-2:2:0.5"
    steps: int = Field(default=300, ge=1)
    tol: float = Field(default=1e-2, gt=0)
    tail: int = Field(default=50, ge=1)
    quantized: bool = False
    use_dos: bool = False
    workers: int = Field(default=1, ge=1)


class RootConfig(_Strict):
    schema_version: int = 1
    plant: PlantSpec = Field(default_factory=PlantSpec)
    controller: ControllerSpec = Field(default_factory=ControllerSpec)
    sampling: SamplingSpec = Field(default_factory=SamplingSpec)
    dos: DosSpec = Field(default_factory=DosSpec)
    simulate: SimulateSpec | None = None
    analyze: AnalyzeSpec | None = None
    sweep: SweepSpec | None = None
    roa: RoaSpec | None = None


def _format_validation_error(err: ValidationError) -> str:
    lines = []
    for issue in err.errors():
        path = ".".join(str(p) for p in issue["loc"]) or "<root>"
        lines.append(f"{path}: {issue['msg']}")
    return "; ".join(lines)


def load_config(path) -> RootConfig:
    """Parse and validate a JSON config; failures carry field paths."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    try:
        return RootConfig.model_validate(raw)
    except ValidationError as err:
        raise ConfigError(_format_validation_error(err)) from None


def parse_grid(spec: str) -> list[float]:
    """Inclusive arithmetic grid from an "a:b:step" string."""
    try:
        a, b, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise ConfigError(f'grid must look like "a:b:step", got {spec!r}') from None
    if step <= 0 or b < a:
        raise ConfigError(f"grid needs step > 0 and b >= a, got {spec!r}")
    count = int(np.floor((b - a) / step + 1e-9)) + 1
    return [a + i * step for i in range(count)]


def build_plant(spec: PlantSpec) -> PlantModel:
    try:
        return make_plant(spec.name, spec.params)
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"plant.params: {err}") from None


def resolve_gain(spec: ControllerSpec, plant: PlantModel, T: float) -> np.ndarray:
    """Explicit gain when given, otherwise LQR on the discretized linearization."""
    if spec.K is not None:
        K = np.atleast_2d(np.asarray(spec.K, dtype=float))
        if K.shape != (plant.m, plant.n):
            raise ConfigError(
                f"controller.K: expected shape {plant.m}x{plant.n}, got {K.shape[0]}x{K.shape[1]}"
            )
        return K
    A, B = linearize(plant)
    Ad, Bd = discretize(A, B, T)
    lqr = spec.lqr or LqrSpec()
    Q = np.eye(plant.n) if lqr.Q is None else np.asarray(lqr.Q, dtype=float)
    R = np.eye(plant.m) if lqr.R is None else np.asarray(lqr.R, dtype=float)
    return dlqr(Ad, Bd, Q, R)


def build_schedule(
    spec: DosSpec, T: float, horizon: float, seed: int | None = None, base_dir=None
) -> DoSSchedule:
    """Schedule from file, explicit attacks, or a generated realization."""
    sch = spec.schedule
    if sch.file is not None:
        path = Path(sch.file)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        if not path.exists():
            raise ConfigError(f"dos.schedule.file: not found: {path}")
        return load_schedule_csv(path)
    if sch.attacks is not None:
        try:
            return DoSSchedule(attacks=tuple(sorted(sch.attacks)))
        except ValueError as err:
            raise ConfigError(f"dos.schedule.attacks: {err}") from None
    return generate_constrained(
        spec.params(), T, horizon, sch.strategy, seed if seed is not None else sch.seed
    )


def build_sim_config(
    cfg: RootConfig, seed: int | None = None, base_dir=None
) -> tuple[SimConfig, PlantModel]:
    if cfg.simulate is None:
        raise ConfigError("simulate: section missing")
    plant = build_plant(cfg.plant)
    K = resolve_gain(cfg.controller, plant, cfg.sampling.T)
    sim = cfg.simulate
    horizon = (sim.steps + 1) * cfg.sampling.T
    schedule = build_schedule(cfg.dos, cfg.sampling.T, horizon, seed=seed, base_dir=base_dir)
    if len(sim.x0) != plant.n:
        raise ConfigError(f"simulate.x0: expected {plant.n} entries, got {len(sim.x0)}")
    sim_cfg = SimConfig(
        plant=plant,
        K=K,
        T=cfg.sampling.T,
        M=cfg.sampling.M,
        E0=sim.E0,
        x0=np.asarray(sim.x0, dtype=float),
        schedule=schedule,
        steps=sim.steps,
        params=cfg.dos.params(),
        ode_step=cfg.sampling.ode_step,
        blowup_threshold=sim.blowup_threshold,
        seed=seed if seed is not None else cfg.dos.schedule.seed,
    )
    return sim_cfg, plant


def tuning_options(spec: AnalyzeSpec | None):
    from .analysis import TuningOptions

    if spec is None:
        return TuningOptions()
    kwargs = {}
    if spec.phi0_grid is not None:
        kwargs["phi0_grid"] = tuple(spec.phi0_grid)
    if spec.phi1_grid is not None:
        kwargs["phi1_grid"] = tuple(spec.phi1_grid)
    if spec.gamma_grid is not None:
        kwargs["gamma_grid"] = tuple(spec.gamma_grid)
    if spec.eps_grid is not None:
        kwargs["eps_grid"] = tuple(spec.eps_grid)
    kwargs["eta1"] = spec.eta1
    return TuningOptions(**kwargs)
