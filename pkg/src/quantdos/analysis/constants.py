"""Closed-form constants for the switched-loop stability certificate.

Everything here is a literal formula evaluation: the growth factor of the
sampled flow, inter-sample and remainder-gain constants, the mode
Lyapunov matrices, comparison constants between the two mode functions,
per-mode contraction/expansion rates, and the stability margin and
initial-radius bound assembled from them. No simulation, no sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dos import DoSParams
from ..errors import InfeasibleError
from ..numerics import inf_norm, solve_discrete_lyapunov, spectral_radius

__all__ = [
    "compute_lambda",
    "data_rate",
    "compute_c_constants",
    "compute_gamma_constants",
    "solve_mode_lyapunov",
    "compute_alpha_beta",
    "compute_mu",
    "compute_nu",
    "OmegaConstants",
    "compute_omega",
    "StabilityMargin",
    "check_stability_condition",
    "max_E0",
    "lyapunov_value",
]


def compute_lambda(L: float, T: float) -> float:
    """Per-sample growth factor e^(L T) of flows under Lipschitz constant L."""
    if L < 0:
        raise ValueError("Lipschitz constant must be nonnegative")
    if T <= 0:
        raise ValueError("sampling period must be positive")
    return math.exp(L * T)


def data_rate(n: int, M: int, T: float) -> float:
    """Channel rate n*log2(M)/T in bits per unit time."""
    return n * math.log2(M) / T


def compute_c_constants(A, B, K, T: float) -> tuple[float, float]:
    """Inter-sample growth constants.

    c0 = (1 + T(|BK| + |K|)) e^(T(|A| + 1)) bounds the flow under state
    feedback, c1 = e^(T(|A| + 1)) bounds it under zero input; both use
    induced infinity norms.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    c1 = math.exp(T * (inf_norm(A) + 1.0))
    c0 = (1.0 + T * (inf_norm(B @ K) + inf_norm(K))) * c1
    return c0, c1


def compute_gamma_constants(gamma: float, c0: float, K, A, T: float, c1: float) -> tuple[float, float]:
    """Remainder gains over one sampling interval.

    gamma0 = (c0 + |K|) gamma T e^(T|A|) for the feedback mode and
    gamma1 = c1 gamma T e^(T|A|) for the zero-input mode.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    K = np.atleast_2d(np.asarray(K, dtype=float))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    scale = gamma * T * math.exp(T * inf_norm(A))
    return (c0 + inf_norm(K)) * scale, c1 * scale


def solve_mode_lyapunov(Atilde, Btilde, K, phi0: float, phi1: float) -> tuple[np.ndarray, np.ndarray]:
    """Positive definite P0, P1 for the two closed/open loop modes.

    P0 solves F'P0 F = P0 - I with F = (Atilde + Btilde K)/sqrt(phi0), so
    (Atilde+Btilde K)' P0 (Atilde+Btilde K) - phi0 P0 = -phi0 I < 0;
    P1 likewise with F = Atilde/sqrt(phi1). Raises InfeasibleError naming
    the mode whose rate is below the required spectral radius.
    """
    if not 0.0 < phi0 < 1.0:
        raise InfeasibleError(f"phi0 must lie in (0, 1), got {phi0}")
    if phi1 <= 1.0:
        raise InfeasibleError(f"phi1 must exceed 1, got {phi1}")
    At = np.atleast_2d(np.asarray(Atilde, dtype=float))
    Bt = np.atleast_2d(np.asarray(Btilde, dtype=float))
    Km = np.atleast_2d(np.asarray(K, dtype=float))
    closed = At + Bt @ Km
    r0 = spectral_radius(closed)
    if r0 >= math.sqrt(phi0):
        raise InfeasibleError(
            f"feedback mode infeasible: spectral radius {r0:.6g} >= sqrt(phi0)={math.sqrt(phi0):.6g}"
        )
    r1 = spectral_radius(At)
    if r1 >= math.sqrt(phi1):
        raise InfeasibleError(
            f"open-loop mode infeasible: spectral radius {r1:.6g} >= sqrt(phi1)={math.sqrt(phi1):.6g}"
        )
    P0 = solve_discrete_lyapunov(closed / math.sqrt(phi0), np.eye(At.shape[0]))
    P1 = solve_discrete_lyapunov(At / math.sqrt(phi1), np.eye(At.shape[0]))
    return P0, P1


def compute_alpha_beta(P0, P1, eta0: float, eta1: float, n: int) -> tuple[float, float]:
    """Quadratic sandwich constants for both mode functions.

    alpha = min(lmin(P_p), eta_p)/2 and beta = max(n lmax(P_p), eta_p)
    bound W_p between alpha (|xi| + E)^2 and beta (|xi| + E)^2.
    """
    lmin0 = float(np.min(np.linalg.eigvalsh(P0)))
    lmin1 = float(np.min(np.linalg.eigvalsh(P1)))
    lmax0 = float(np.max(np.linalg.eigvalsh(P0)))
    lmax1 = float(np.max(np.linalg.eigvalsh(P1)))
    alpha = 0.5 * min(lmin0, lmin1, eta0, eta1)
    beta = max(n * lmax0, n * lmax1, eta0, eta1)
    return alpha, beta


def compute_mu(P0, P1, eta0: float, eta1: float) -> tuple[float, float]:
    """Mode-comparison constants: W_1 <= mu0 W_0 and W_0 <= mu1 W_1 pointwise."""
    lmin0 = float(np.min(np.linalg.eigvalsh(P0)))
    lmin1 = float(np.min(np.linalg.eigvalsh(P1)))
    lmax0 = float(np.max(np.linalg.eigvalsh(P0)))
    lmax1 = float(np.max(np.linalg.eigvalsh(P1)))
    mu0 = max(lmax1 / lmin0, eta1 / eta0)
    mu1 = max(lmax0 / lmin1, eta0 / eta1)
    return mu0, mu1


def compute_nu(phi0: float, phi1: float, growth: float, M: int) -> tuple[float, float]:
    """Idealized per-step rates: nu0 = max(phi0, (growth/M)^2), nu1 = max(phi1, growth^2)."""
    return max(phi0, (growth / M) ** 2), max(phi1, growth**2)


@dataclass(frozen=True)
class OmegaConstants:
    """Per-step W rates with the quantization and remainder terms folded in."""

    omega0: float
    omega1: float
    phi0_hat: float
    phi0_tilde: float
    vartheta: float
    phi1_hat: float


def compute_omega(
    phi0: float,
    phi1: float,
    gamma0: float,
    gamma1: float,
    P0,
    P1,
    K,
    Atilde,
    Btilde,
    eta0: float,
    eta1: float,
    epsilon: float,
    growth: float,
    M: int,
) -> OmegaConstants:
    """Realized per-step rates of the mode functions.

    phi0_hat folds the remainder gain into the feedback rate; phi0_tilde
    adds the cross term between center and quantization offset resolved
    by a Young split with weight epsilon; vartheta = (1+epsilon)|P0| is
    the matching offset weight. Then

        omega0 = max(phi0_tilde, (vartheta/eta0)((M-1)/M)^2 + (growth/M)^2)
        omega1 = max(phi1_hat, growth^2)

    A value omega0 < 1 exists (for large eta0) iff phi0_tilde < 1, which
    needs phi0_hat < 1 first; violations raise InfeasibleError advising a
    smaller gamma.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    At = np.atleast_2d(np.asarray(Atilde, dtype=float))
    Bt = np.atleast_2d(np.asarray(Btilde, dtype=float))
    Km = np.atleast_2d(np.asarray(K, dtype=float))
    closed = At + Bt @ Km
    lmin0 = float(np.min(np.linalg.eigvalsh(P0)))
    lmin1 = float(np.min(np.linalg.eigvalsh(P1)))
    nP0 = inf_norm(P0)
    nP1 = inf_norm(P1)
    phi0_hat = phi0 + (2.0 * gamma0 * inf_norm(P0 @ closed) + gamma0**2 * nP0) / lmin0
    if phi0_hat >= 1.0:
        raise InfeasibleError(
            f"phi0_hat = {phi0_hat:.6g} >= 1: remainder gain too large, decrease gamma"
        )
    phi0_tilde = phi0_hat + nP0 / (epsilon * lmin0)
    vartheta = (1.0 + epsilon) * nP0
    phi1_hat = phi1 + (2.0 * gamma1 * inf_norm(P1 @ At) + gamma1**2 * nP1) / lmin1
    omega0 = max(phi0_tilde, (vartheta / eta0) * ((M - 1) / M) ** 2 + (growth / M) ** 2)
    omega1 = max(phi1_hat, growth**2)
    return OmegaConstants(
        omega0=omega0,
        omega1=omega1,
        phi0_hat=phi0_hat,
        phi0_tilde=phi0_tilde,
        vartheta=vartheta,
        phi1_hat=phi1_hat,
    )


@dataclass(frozen=True)
class StabilityMargin:
    """Left-hand side of the average-rate stability condition; negative passes."""

    margin: float
    passed: bool
    rho_d_star: float
    reason: str = ""


def check_stability_condition(
    p: DoSParams, T: float, mu0: float, mu1: float, nu0: float, nu1: float
) -> StabilityMargin:
    """Average-rate test: rho_f T ln(mu0 mu1) + (1-rho_d*) ln nu0 + rho_d* ln nu1 < 0.

    rho_d* = rho_d + rho_f T is the effective per-sample loss rate. A
    value rho_d* >= 1 leaves no certified fraction of contracting steps
    and is reported as a distinct failure.
    """
    if not 0.0 < nu0 < 1.0:
        raise ValueError(f"nu0 must lie in (0, 1), got {nu0}")
    if nu1 <= 0.0:
        raise ValueError(f"nu1 must be positive, got {nu1}")
    _, rho_d_star = p.effective(T)
    if rho_d_star >= 1.0:
        return StabilityMargin(
            margin=math.inf,
            passed=False,
            rho_d_star=rho_d_star,
            reason=f"rho_d_star = {rho_d_star:.6g} >= 1: losses can dominate every sample",
        )
    margin = (
        p.rho_f * T * math.log(mu0 * mu1)
        + (1.0 - rho_d_star) * math.log(nu0)
        + rho_d_star * math.log(nu1)
    )
    return StabilityMargin(margin=margin, passed=margin < 0.0, rho_d_star=rho_d_star)


def max_E0(
    delta: float,
    alpha: float,
    beta: float,
    mu0: float,
    mu1: float,
    omega0: float,
    omega1: float,
    p: DoSParams,
    T: float,
) -> float:
    """Strict upper bound on the initial radius for certified convergence.

    bound = (mu0 mu1)^(-kappa_f/2) * (omega0/omega1)^(kappa_d*/(2T)) * delta*sqrt(alpha/beta),
    with kappa_d* = kappa_d + kappa_f T. Exclusive: any E0 below it keeps
    |xi_k| + E_k under delta for all k once the margin test passes.
    """
    if delta <= 0 or alpha <= 0 or beta <= 0:
        raise ValueError("delta, alpha, beta must be positive")
    if not 0.0 < omega0 < 1.0 or omega1 < 1.0:
        raise ValueError("need omega0 in (0,1) and omega1 >= 1")
    kappa_d_star, _ = p.effective(T)
    delta_star = delta * math.sqrt(alpha / beta)
    return (mu0 * mu1) ** (-p.kappa_f / 2.0) * (omega0 / omega1) ** (
        kappa_d_star / (2.0 * T)
    ) * delta_star


def lyapunov_value(P, eta: float, xi, E: float) -> float:
    """Mode function W(xi, E) = xi' P xi + eta E^2."""
    v = np.asarray(xi, dtype=float)
    return float(v @ np.asarray(P) @ v + eta * E * E)
