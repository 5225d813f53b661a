"""Stability-region sweeps, attraction-region grids, and decay checks.

The sweep evaluates the average-rate margin over a (rho_f, rho_d) grid.
The attraction-region estimator runs the closed loop from a grid of
initial states, with or without quantization and attacks, and reports
per-point convergence; blow-ups count as non-converged and never abort
the sweep. The decay checks evaluate the switched mode functions along a
trace against their certified per-step factors and cumulative envelope.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import simloop as _simloop
from ..dos import DoSParams, DoSSchedule, is_active
from ..errors import BlowUpError
from ..numerics import inf_norm, rk4_endpoint
from ..plant import PlantModel
from ..quantizer import QuantizerState, decode, encode
from .certificate import StabilityCertificate
from .constants import check_stability_condition, lyapunov_value

__all__ = [
    "sweep_stability_region",
    "estimate_roa",
    "DecayVerdict",
    "check_trace_decay",
    "spot_check_decay",
    "sweep_rows_csv",
    "roa_rows_csv",
]

#: relative slack for the strict decay inequalities, covering float noise
DECAY_RTOL = 1e-9


def sweep_stability_region(
    T: float,
    mu0: float,
    mu1: float,
    nu0: float,
    nu1: float,
    rho_f_grid,
    rho_d_grid,
) -> list[dict]:
    """Margin verdict per (rho_f, rho_d) cell.

    Cells where the effective loss rate reaches one carry an infinite
    margin and fail. Rows come back in row-major (rho_f outer) order.
    """
    rows = []
    for rf in rho_f_grid:
        for rd in rho_d_grid:
            verdict = check_stability_condition(
                DoSParams(kappa_f=0.0, rho_f=float(rf), kappa_d=0.0, rho_d=float(rd)),
                T, mu0, mu1, nu0, nu1,
            )
            rows.append(
                {
                    "rho_f": float(rf),
                    "rho_d": float(rd),
                    "margin": verdict.margin,
                    "passed": verdict.passed,
                }
            )
    return rows


def _run_direct(
    plant: PlantModel,
    K: np.ndarray,
    T: float,
    steps: int,
    x0,
    schedule: DoSSchedule,
    ode_step: float,
    threshold: float,
) -> tuple[list[float], bool]:
    """Sampled-feedback loop without quantization: u_k = K x_k, zeroed on loss.

    Returns the per-sample norms and whether the run stayed finite.
    """
    f = plant.f
    x = tuple(float(v) for v in x0)
    norms = [max(abs(v) for v in x)]
    for k in range(steps):
        theta = 1 if is_active(schedule, k * T) else 0
        u = (0.0,) * plant.m if theta else tuple(float(v) for v in K @ np.asarray(x))
        try:
            x = rk4_endpoint(lambda y: f(y, u), x, T, ode_step)
        except BlowUpError:
            return norms, False
        nrm = max(abs(v) for v in x)
        norms.append(nrm)
        if nrm > threshold:
            return norms, False
    return norms, True


def _roa_point(args) -> dict:
    (plant, K, T, M, x0, steps, tol, tail, quantized, schedule, ode_step, threshold) = args
    x0 = np.asarray(x0, dtype=float)
    if quantized:
        cfg = _simloop.SimConfig(
            plant=plant,
            K=K,
            T=T,
            M=M,
            E0=float(inf_norm(x0)),
            x0=x0,
            schedule=schedule,
            steps=steps,
            ode_step=ode_step,
            blowup_threshold=threshold,
        )
        trace = _simloop.run_closed_loop(cfg)
        finished = trace.status == _simloop.COMPLETED
        ok = finished and len(trace) >= tail and _simloop.converged(trace, tol, tail)
        final = float(np.max(np.abs(trace.x[-1]))) if len(trace) else math.inf
    else:
        norms, finished = _run_direct(plant, K, T, steps, x0, schedule, ode_step, threshold)
        ok = finished and len(norms) >= tail and all(v <= tol for v in norms[-tail:])
        final = norms[-1] if norms else math.inf
    return {
        "x0": [float(v) for v in x0],
        "converged": bool(ok),
        "final_norm": float(final),
    }


def estimate_roa(
    plant: PlantModel,
    K,
    T: float,
    grid_points,
    steps: int,
    tol: float,
    tail: int = 20,
    M: int = 6,
    quantized: bool = False,
    schedule: DoSSchedule | None = None,
    ode_step: float | None = None,
    blowup_threshold: float = 1e6,
    workers: int = 1,
) -> list[dict]:
    """Per-point convergence verdicts over a grid of initial states.

    quantized=False runs plain sampled feedback (no coder in the loop),
    the baseline attraction region; quantized=True runs the full coder
    loop with the per-point initial radius set to the state norm. Points
    are independent, so `workers` > 1 fans them out over processes.
    """
    Km = np.atleast_2d(np.asarray(K, dtype=float))
    sched = schedule if schedule is not None else DoSSchedule.empty()
    h = ode_step if ode_step is not None else T / 100.0
    jobs = [
        (plant, Km, T, M, np.asarray(p, dtype=float), steps, tol, tail, quantized, sched, h, blowup_threshold)
        for p in grid_points
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_roa_point, jobs))
    return [_roa_point(j) for j in jobs]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def sweep_rows_csv(rows: list[dict]) -> str:
    """Sweep rows as CSV text: rho_f,rho_d,margin,passed."""
    lines = ["rho_f,rho_d,margin,passed"]
    for r in rows:
        lines.append(
            f'{_fmt(r["rho_f"])},{_fmt(r["rho_d"])},{_fmt(r["margin"])},{int(r["passed"])}'
        )
    return "\n".join(lines) + "\n"


def roa_rows_csv(rows: list[dict]) -> str:
    """Attraction-grid rows as CSV text: x0_1..x0_n,converged,final_norm."""
    if not rows:
        return "converged,final_norm\n"
    n = len(rows[0]["x0"])
    header = ",".join([f"x0_{i+1}" for i in range(n)] + ["converged", "final_norm"])
    lines = [header]
    for r in rows:
        cells = [_fmt(v) for v in r["x0"]] + [str(int(r["converged"])), _fmt(r["final_norm"])]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DecayVerdict:
    """Outcome of evaluating the decay inequalities along a trace."""

    passed: bool
    steps_checked: int
    steps_excluded: int
    first_violation: int | None = None
    kind: str | None = None  # "per_step" | "envelope"
    detail: str = ""

    def __bool__(self) -> bool:
        return self.passed


def check_trace_decay(trace, cert: StabilityCertificate) -> DecayVerdict:
    """Verify the per-step factors and the cumulative envelope along a trace.

    Per step k (while |xi_k| + E_k stays within the certificate's delta):
    the mode function after the step is bounded by omega_theta times its
    value, with an extra mu_theta on mode switches. Cumulatively,
    W_theta_k <= c_w omega^k W_theta_0. Steps outside the delta ball are
    excluded and counted; the envelope is anchored at step 0 and checked
    until the first exclusion.
    """
    P = (cert.P0, cert.P1)
    eta = (cert.eta0, cert.eta1)
    om = (cert.omega0, cert.omega1)
    mu = (cert.mu0, cert.mu1)
    n = len(trace)
    if n == 0:
        return DecayVerdict(passed=True, steps_checked=0, steps_excluded=0)

    W = np.array(
        [
            lyapunov_value(P[trace.theta[k]], eta[trace.theta[k]], trace.xi[k], trace.E[k])
            for k in range(n)
        ]
    )
    inside = np.array(
        [inf_norm(trace.xi[k]) + trace.E[k] <= cert.delta * (1 + 1e-12) for k in range(n)]
    )
    excluded = int(np.sum(~inside))

    checked = 0
    for k in range(n - 1):
        if not inside[k]:
            continue
        th, th_next = int(trace.theta[k]), int(trace.theta[k + 1])
        factor = om[th] * (mu[th] if th_next != th else 1.0)
        checked += 1
        if W[k + 1] > factor * W[k] * (1.0 + DECAY_RTOL):
            return DecayVerdict(
                passed=False,
                steps_checked=checked,
                steps_excluded=excluded,
                first_violation=k + 1,
                kind="per_step",
                detail=(
                    f"W[{k+1}]={W[k+1]:.6g} exceeds factor {factor:.6g} * W[{k}]={W[k]:.6g}"
                ),
            )

    # envelope anchored at step 0, valid while every earlier step stayed inside
    envelope_limit = n
    for k in range(n):
        if not inside[k]:
            envelope_limit = k
            break
    for k in range(envelope_limit):
        bound = cert.c_w * cert.omega**k * W[0]
        if W[k] > bound * (1.0 + DECAY_RTOL):
            return DecayVerdict(
                passed=False,
                steps_checked=checked,
                steps_excluded=excluded,
                first_violation=k,
                kind="envelope",
                detail=f"W[{k}]={W[k]:.6g} exceeds envelope {bound:.6g}",
            )
    return DecayVerdict(passed=True, steps_checked=checked, steps_excluded=excluded)


def spot_check_decay(
    cert: StabilityCertificate,
    plant: PlantModel,
    K,
    n_samples: int = 50,
    seed: int = 0,
    ode_step: float | None = None,
) -> DecayVerdict:
    """One-step decay checks at sampled coder states inside the delta ball.

    For each sample both channel outcomes are exercised: a delivery
    (encode a state from the region, recenter on the decoded point's
    flow, contract) and a loss (recenter on the center's own flow,
    expand), each against its same-mode factor and its switch factor.
    """
    rng = np.random.default_rng(seed)
    Km = np.atleast_2d(np.asarray(K, dtype=float))
    T, M = cert.T, cert.M
    h = ode_step if ode_step is not None else T / 100.0
    P = (cert.P0, cert.P1)
    eta = (cert.eta0, cert.eta1)
    f = plant.f
    checked = 0
    for i in range(n_samples):
        # split the delta budget between center norm and radius
        share = rng.uniform(0.05, 0.95)
        r = 0.99 * cert.delta
        xi = rng.uniform(-1, 1, size=plant.n)
        norm = max(np.max(np.abs(xi)), 1e-30)
        xi = xi / norm * (share * r)
        E = (1.0 - share) * r
        state = QuantizerState(xi=tuple(xi), E=float(E), M=M)

        # delivery: any state in the region goes through the coder
        x = xi + rng.uniform(-E, E, size=plant.n)
        q = decode(state, encode(state, x))
        u = tuple(float(v) for v in Km @ np.asarray(q))
        xi_in = rk4_endpoint(lambda y: f(y, u), q, T, h)
        E_in = cert.growth / M * E
        W0 = lyapunov_value(P[0], eta[0], xi, E)
        for mode_next, mu_factor in ((0, 1.0), (1, cert.mu0)):
            lhs = lyapunov_value(P[mode_next], eta[mode_next], xi_in, E_in)
            bound = mu_factor * cert.omega0 * W0 * (1.0 + DECAY_RTOL)
            checked += 1
            if lhs > bound:
                return DecayVerdict(
                    passed=False,
                    steps_checked=checked,
                    steps_excluded=0,
                    first_violation=i,
                    kind="per_step",
                    detail=f"delivery step to mode {mode_next}: {lhs:.6g} > {bound:.6g}",
                )

        # loss: the region flows under zero input and expands
        xi_out = rk4_endpoint(lambda y: f(y, (0.0,) * plant.m), tuple(xi), T, h)
        E_out = cert.growth * E
        W1 = lyapunov_value(P[1], eta[1], xi, E)
        for mode_next, mu_factor in ((1, 1.0), (0, cert.mu1)):
            lhs = lyapunov_value(P[mode_next], eta[mode_next], xi_out, E_out)
            bound = mu_factor * cert.omega1 * W1 * (1.0 + DECAY_RTOL)
            checked += 1
            if lhs > bound:
                return DecayVerdict(
                    passed=False,
                    steps_checked=checked,
                    steps_excluded=0,
                    first_violation=i,
                    kind="per_step",
                    detail=f"loss step to mode {mode_next}: {lhs:.6g} > {bound:.6g}",
                )
    return DecayVerdict(passed=True, steps_checked=checked, steps_excluded=0)
