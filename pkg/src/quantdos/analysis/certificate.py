"""Assembly of the full stability certificate.

`choose_tuning` grid-searches the free scalars (phi0, phi1, gamma,
epsilon) that the theory only asserts to exist, picking the combination
that minimizes the average-rate stability margin; eta0 follows a closed
rule that equalizes the two arguments of the omega0 max, and eta1 stays
at a documented default. `build_certificate` then evaluates every
constant, runs the sampled radius estimates, and packages verdicts plus
provenance into one serializable bundle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from ..dos import DoSParams
from ..errors import InfeasibleError, TuningError
from ..numerics import discretize
from ..plant import PlantModel, empirical_lipschitz, linearize
from .constants import (
    StabilityMargin,
    check_stability_condition,
    compute_alpha_beta,
    compute_c_constants,
    compute_gamma_constants,
    compute_lambda,
    compute_mu,
    compute_nu,
    compute_omega,
    data_rate,
    max_E0,
    solve_mode_lyapunov,
)
from .estimates import estimate_d, estimate_delta

__all__ = ["TuningOptions", "TuningResult", "choose_tuning", "StabilityCertificate", "build_certificate"]


def _default_phi0_grid() -> tuple:
    return tuple(np.round(np.linspace(0.30, 0.95, 27), 6))


def _default_phi1_grid() -> tuple:
    return tuple(np.round(np.linspace(1.05, 4.00, 25), 6))


def _default_gamma_grid() -> tuple:
    return tuple(np.logspace(-4, -1, 7))


def _default_eps_grid() -> tuple:
    return tuple(np.logspace(0, 3, 7))


@dataclass(frozen=True)
class TuningOptions:
    """Search ranges for the free certificate scalars. All overridable."""

    phi0_grid: Sequence[float] = dc_field(default_factory=_default_phi0_grid)
    phi1_grid: Sequence[float] = dc_field(default_factory=_default_phi1_grid)
    gamma_grid: Sequence[float] = dc_field(default_factory=_default_gamma_grid)
    eps_grid: Sequence[float] = dc_field(default_factory=_default_eps_grid)
    eta1: float = 1.0


@dataclass(frozen=True)
class TuningResult:
    phi0: float
    phi1: float
    gamma: float
    epsilon: float
    eta0: float
    eta1: float
    margin: float
    diagnostics: dict


def _eta0_rule(phi0_tilde: float, vartheta: float, growth: float, M: int) -> float:
    """Weight that equalizes the two arguments of the omega0 max.

    When phi0_tilde already exceeds (growth/M)^2 the offset argument is
    pushed down to meet it; otherwise it is placed at the midpoint
    between (growth/M)^2 and 1 so omega0 stays strictly below one.
    """
    frac = ((M - 1) / M) ** 2
    floor = (growth / M) ** 2
    if phi0_tilde > floor:
        return vartheta * frac / (phi0_tilde - floor)
    return 2.0 * vartheta * frac / (1.0 - floor)


def choose_tuning(
    A,
    B,
    Atilde,
    Btilde,
    K,
    T: float,
    growth: float,
    M: int,
    params: DoSParams,
    options: TuningOptions | None = None,
) -> TuningResult:
    """Deterministic grid search minimizing the stability margin.

    Iterates phi0 x phi1 (caching the Lyapunov solves) and gamma x
    epsilon within; infeasible combinations are counted, never fatal.
    Raises TuningError with the failure counts when nothing is feasible.
    """
    opts = options or TuningOptions()
    c0, c1 = compute_c_constants(A, B, K, T)
    skip = {"mode_lyapunov": 0, "phi0_hat": 0, "phi0_tilde": 0, "margin_degenerate": 0}
    best: TuningResult | None = None
    for phi0 in opts.phi0_grid:
        for phi1 in opts.phi1_grid:
            try:
                P0, P1 = solve_mode_lyapunov(Atilde, Btilde, K, phi0, phi1)
            except InfeasibleError:
                skip["mode_lyapunov"] += 1
                continue
            for gamma in opts.gamma_grid:
                gamma0, gamma1 = compute_gamma_constants(gamma, c0, K, A, T, c1)
                for eps in opts.eps_grid:
                    try:
                        probe = compute_omega(
                            phi0, phi1, gamma0, gamma1, P0, P1, K, Atilde, Btilde,
                            1.0, opts.eta1, eps, growth, M,
                        )
                    except InfeasibleError:
                        skip["phi0_hat"] += 1
                        continue
                    if probe.phi0_tilde >= 1.0:
                        skip["phi0_tilde"] += 1
                        continue
                    eta0 = _eta0_rule(probe.phi0_tilde, probe.vartheta, growth, M)
                    mu0, mu1 = compute_mu(P0, P1, eta0, opts.eta1)
                    nu0, nu1 = compute_nu(phi0, phi1, growth, M)
                    verdict = check_stability_condition(params, T, mu0, mu1, nu0, nu1)
                    if not math.isfinite(verdict.margin):
                        skip["margin_degenerate"] += 1
                        continue
                    if best is None or verdict.margin < best.margin:
                        best = TuningResult(
                            phi0=float(phi0),
                            phi1=float(phi1),
                            gamma=float(gamma),
                            epsilon=float(eps),
                            eta0=float(eta0),
                            eta1=float(opts.eta1),
                            margin=float(verdict.margin),
                            diagnostics=dict(skip),
                        )
    if best is None:
        raise TuningError(
            "no feasible tuning in the searched ranges; "
            f"skip counts: {skip}",
            diagnostics=skip,
        )
    return best


@dataclass
class StabilityCertificate:
    """Every constant of the certificate plus the two verdicts.

    `stability_margin` is the left side of the average-rate condition
    (negative passes); `max_initial_radius` is the exclusive bound on the
    starting radius guaranteeing convergence, None when the margin test
    fails. `provenance` records the inputs, seeds, and sample counts the
    numbers were derived from.
    """

    growth: float  # e^(L T)
    c0: float
    c1: float
    gamma: float
    gamma0: float
    gamma1: float
    phi0: float
    phi1: float
    phi0_hat: float
    phi0_tilde: float
    vartheta: float
    phi1_hat: float
    P0: np.ndarray
    P1: np.ndarray
    eta0: float
    eta1: float
    epsilon: float
    alpha: float
    beta: float
    mu0: float
    mu1: float
    nu0: float
    nu1: float
    omega0: float
    omega1: float
    d: float
    delta: float
    delta_star: float
    kappa_d_star: float
    rho_d_star: float
    c_w: float
    omega: float
    rate_bits: float
    T: float
    M: int
    dos_params: DoSParams
    stability_margin: float
    stability_passed: bool
    stability_reason: str
    max_initial_radius: float | None
    provenance: dict

    def residual_max_eigs(self, Atilde, Btilde, K) -> tuple[float, float]:
        """Largest eigenvalues of the two mode Lyapunov residuals (negative = strict)."""
        At = np.atleast_2d(np.asarray(Atilde, dtype=float))
        Bt = np.atleast_2d(np.asarray(Btilde, dtype=float))
        Km = np.atleast_2d(np.asarray(K, dtype=float))
        closed = At + Bt @ Km
        r0 = closed.T @ self.P0 @ closed - self.phi0 * self.P0
        r1 = At.T @ self.P1 @ At - self.phi1 * self.P1
        return (
            float(np.max(np.linalg.eigvalsh(0.5 * (r0 + r0.T)))),
            float(np.max(np.linalg.eigvalsh(0.5 * (r1 + r1.T)))),
        )

    def validate(self) -> list[str]:
        """Internal-consistency problems, empty when the bundle is coherent."""
        issues = []
        scalars = {
            "growth": self.growth, "c0": self.c0, "c1": self.c1, "gamma": self.gamma,
            "gamma0": self.gamma0, "gamma1": self.gamma1, "phi0": self.phi0,
            "phi1": self.phi1, "alpha": self.alpha, "beta": self.beta,
            "mu0": self.mu0, "mu1": self.mu1, "nu0": self.nu0, "nu1": self.nu1,
            "omega0": self.omega0, "omega1": self.omega1, "d": self.d,
            "delta": self.delta, "delta_star": self.delta_star, "c_w": self.c_w,
            "omega": self.omega,
        }
        for name, v in scalars.items():
            if not math.isfinite(v):
                issues.append(f"{name} is not finite")
        for name, P in (("P0", self.P0), ("P1", self.P1)):
            if not np.allclose(P, P.T, atol=1e-10):
                issues.append(f"{name} is not symmetric")
            elif float(np.min(np.linalg.eigvalsh(P))) <= 0:
                issues.append(f"{name} is not positive definite")
        if not self.nu0 <= self.omega0 < 1.0:
            issues.append("need nu0 <= omega0 < 1")
        if not self.nu1 <= self.omega1:
            issues.append("need nu1 <= omega1")
        if self.mu0 * self.mu1 < 1.0 - 1e-12:
            issues.append("mu0 * mu1 must be at least 1")
        if self.alpha > self.beta:
            issues.append("alpha must not exceed beta")
        kds, rds = self.dos_params.effective(self.T)
        if abs(kds - self.kappa_d_star) > 1e-12 * (1 + abs(kds)):
            issues.append("kappa_d_star inconsistent with dos_params")
        if abs(rds - self.rho_d_star) > 1e-12 * (1 + abs(rds)):
            issues.append("rho_d_star inconsistent with dos_params")
        cw = (self.mu0 * self.mu1) ** self.dos_params.kappa_f * (
            self.omega1 / self.omega0
        ) ** (self.kappa_d_star / self.T)
        if abs(cw - self.c_w) > 1e-9 * (1 + abs(cw)):
            issues.append("c_w inconsistent with its parts")
        om = (self.mu0 * self.mu1) ** (self.dos_params.rho_f * self.T) * self.omega0 ** (
            1.0 - self.rho_d_star
        ) * self.omega1**self.rho_d_star
        if abs(om - self.omega) > 1e-9 * (1 + abs(om)):
            issues.append("omega inconsistent with its parts")
        if abs(self.delta_star - self.delta * math.sqrt(self.alpha / self.beta)) > 1e-12 * (
            1 + self.delta_star
        ):
            issues.append("delta_star inconsistent with delta*sqrt(alpha/beta)")
        if self.stability_passed:
            if self.max_initial_radius is None or not 0 < self.max_initial_radius <= self.delta_star:
                issues.append("max_initial_radius must lie in (0, delta_star] when passing")
        return issues

    def to_dict(self) -> dict:
        out = {}
        for name, val in self.__dict__.items():
            if isinstance(val, np.ndarray):
                out[name] = val.tolist()
            elif isinstance(val, DoSParams):
                out[name] = {
                    "kappa_f": val.kappa_f,
                    "rho_f": val.rho_f,
                    "kappa_d": val.kappa_d,
                    "rho_d": val.rho_d,
                }
            else:
                out[name] = val
        return out

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @staticmethod
    def from_dict(data: dict) -> "StabilityCertificate":
        kwargs = dict(data)
        kwargs["P0"] = np.asarray(kwargs["P0"], dtype=float)
        kwargs["P1"] = np.asarray(kwargs["P1"], dtype=float)
        kwargs["dos_params"] = DoSParams(**kwargs["dos_params"])
        return StabilityCertificate(**kwargs)


def build_certificate(
    plant: PlantModel,
    K,
    T: float,
    M: int,
    params: DoSParams,
    options: TuningOptions | None = None,
    samples: int = 400,
    seed: int = 0,
) -> StabilityCertificate:
    """Full constants pipeline for one plant/gain/rate/budget combination.

    Raises TuningError when no feasible tuning exists; every other failure
    mode surfaces as the InfeasibleError of the step that hit it.
    """
    Km = np.atleast_2d(np.asarray(K, dtype=float))
    A, B = linearize(plant)
    Atilde, Btilde = discretize(A, B, T)
    growth = compute_lambda(plant.L, T)
    c0, c1 = compute_c_constants(A, B, Km, T)

    tuning = choose_tuning(A, B, Atilde, Btilde, Km, T, growth, M, params, options)
    P0, P1 = solve_mode_lyapunov(Atilde, Btilde, Km, tuning.phi0, tuning.phi1)
    gamma0, gamma1 = compute_gamma_constants(tuning.gamma, c0, Km, A, T, c1)
    om = compute_omega(
        tuning.phi0, tuning.phi1, gamma0, gamma1, P0, P1, Km, Atilde, Btilde,
        tuning.eta0, tuning.eta1, tuning.epsilon, growth, M,
    )
    nu0, nu1 = compute_nu(tuning.phi0, tuning.phi1, growth, M)
    mu0, mu1 = compute_mu(P0, P1, tuning.eta0, tuning.eta1)
    alpha, beta = compute_alpha_beta(P0, P1, tuning.eta0, tuning.eta1, plant.n)

    d_est = estimate_d(plant, Km, T, c0, samples=samples, seed=seed, A=A, B=B)
    delta_est = estimate_delta(
        plant, Km, tuning.gamma, d_est.d, c0, samples=samples, seed=seed, A=A, B=B
    )
    delta = delta_est.delta
    if not delta < plant.rho:
        raise InfeasibleError(
            f"delta={delta:.6g} does not stay below the region radius rho={plant.rho:.6g}; "
            "decrease gamma"
        )

    verdict: StabilityMargin = check_stability_condition(params, T, mu0, mu1, nu0, nu1)
    kappa_d_star, rho_d_star = params.effective(T)
    c_w = (mu0 * mu1) ** params.kappa_f * (om.omega1 / om.omega0) ** (kappa_d_star / T)
    omega = (mu0 * mu1) ** (params.rho_f * T) * om.omega0 ** (1.0 - rho_d_star) * (
        om.omega1**rho_d_star
    )
    delta_star = delta * math.sqrt(alpha / beta)
    bound = (
        max_E0(delta, alpha, beta, mu0, mu1, om.omega0, om.omega1, params, T)
        if verdict.passed
        else None
    )

    cert = StabilityCertificate(
        growth=growth,
        c0=c0,
        c1=c1,
        gamma=tuning.gamma,
        gamma0=gamma0,
        gamma1=gamma1,
        phi0=tuning.phi0,
        phi1=tuning.phi1,
        phi0_hat=om.phi0_hat,
        phi0_tilde=om.phi0_tilde,
        vartheta=om.vartheta,
        phi1_hat=om.phi1_hat,
        P0=P0,
        P1=P1,
        eta0=tuning.eta0,
        eta1=tuning.eta1,
        epsilon=tuning.epsilon,
        alpha=alpha,
        beta=beta,
        mu0=mu0,
        mu1=mu1,
        nu0=nu0,
        nu1=nu1,
        omega0=om.omega0,
        omega1=om.omega1,
        d=d_est.d,
        delta=delta,
        delta_star=delta_star,
        kappa_d_star=kappa_d_star,
        rho_d_star=rho_d_star,
        c_w=c_w,
        omega=omega,
        rate_bits=data_rate(plant.n, M, T),
        T=T,
        M=M,
        dos_params=params,
        stability_margin=verdict.margin,
        stability_passed=verdict.passed,
        stability_reason=verdict.reason,
        max_initial_radius=bound,
        provenance={
            "plant": plant.name,
            "n": plant.n,
            "m": plant.m,
            "L": plant.L,
            "rho": plant.rho,
            "empirical_lipschitz": empirical_lipschitz(plant, n_pairs=500, seed=seed),
            "K": Km.tolist(),
            "A": A.tolist(),
            "B": B.tolist(),
            "Atilde": Atilde.tolist(),
            "Btilde": Btilde.tolist(),
            "tuning_margin": tuning.margin,
            "tuning_skip_counts": tuning.diagnostics,
            "radius_samples": samples,
            "radius_seed": seed,
            "d_grid_radius": d_est.grid_radius_passed,
            "delta_grid_radius": delta_est.grid_radius_passed,
        },
    )
    issues = cert.validate()
    if issues:
        raise InfeasibleError("certificate failed validation: " + "; ".join(issues))
    return cert
