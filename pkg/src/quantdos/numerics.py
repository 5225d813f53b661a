"""Dense linear-algebra and integration kernels.

Small, deterministic routines shared by every other module: matrix
exponentials, zero-order-hold discretization, discrete Lyapunov and
Riccati solves, spectral radii, and a fixed-step RK4 integrator. All
functions are pure; nothing here knows about plants or quantizers.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import BlowUpError, DimensionError, InfeasibleError, NumericError

__all__ = [
    "inf_norm",
    "mat_exp",
    "discretize",
    "solve_discrete_lyapunov",
    "dlqr",
    "spectral_radius",
    "integrate_ode",
    "rk4_endpoint",
]

#: residual tolerance for Lyapunov/Riccati solves, relative to solution scale
LYAPUNOV_RESIDUAL_TOL = 1e-9


def _as_matrix(M, name: str = "matrix") -> np.ndarray:
    A = np.asarray(M, dtype=float)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def _require_square(A: np.ndarray, name: str = "matrix") -> None:
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")


def inf_norm(a) -> float:
    """Vector max-abs entry, or induced infinity norm (max abs row sum)."""
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("inf_norm input has non-finite entries")
    if arr.ndim == 1:
        return float(np.max(np.abs(arr))) if arr.size else 0.0
    if arr.ndim == 2:
        return float(np.max(np.sum(np.abs(arr), axis=1))) if arr.size else 0.0
    raise DimensionError(f"inf_norm expects a vector or matrix, got ndim={arr.ndim}")


def mat_exp(A, t: float) -> np.ndarray:
    """Matrix exponential e^(A t) via scaling-and-squaring with Pade core."""
    M = _as_matrix(A, "A")
    _require_square(M, "A")
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    return scipy.linalg.expm(M * float(t))


def discretize(A, B, T: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold discretization of (A, B) at sampling period T.

    Returns (Ad, Bd) with Ad = e^(A T) and Bd = int_0^T e^(A s) ds B,
    evaluated exactly through the exponential of the augmented matrix
    [[A, B], [0, 0]].
    """
    Am = _as_matrix(A, "A")
    _require_square(Am, "A")
    Bm = _as_matrix(B, "B")
    n = Am.shape[0]
    if Bm.shape[0] != n:
        raise DimensionError(f"B must have {n} rows, got {Bm.shape[0]}")
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    m = Bm.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = Am
    aug[:n, n:] = Bm
    E = scipy.linalg.expm(aug * float(T))
    return E[:n, :n], E[:n, n:]


def spectral_radius(M) -> float:
    """Largest eigenvalue magnitude of a square matrix.

    Backed by the LAPACK QR eigensolver; accurate to well under 1e-8 at
    the matrix sizes used here.
    """
    A = _as_matrix(M, "M")
    _require_square(A, "M")
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def solve_discrete_lyapunov(F, Q) -> np.ndarray:
    """Solve F' P F - P = -Q for symmetric positive definite P.

    Requires the spectral radius of F to be strictly below one and Q to be
    symmetric positive definite; the solution is symmetrized and its
    residual checked against LYAPUNOV_RESIDUAL_TOL.
    """
    Fm = _as_matrix(F, "F")
    _require_square(Fm, "F")
    Qm = _as_matrix(Q, "Q")
    _require_square(Qm, "Q")
    if Fm.shape != Qm.shape:
        raise DimensionError(f"F and Q shapes differ: {Fm.shape} vs {Qm.shape}")
    if not np.allclose(Qm, Qm.T, rtol=0, atol=1e-12 * (1 + np.max(np.abs(Qm)))):
        raise ValueError("Q must be symmetric")
    if np.min(np.linalg.eigvalsh(Qm)) <= 0:
        raise ValueError("Q must be positive definite")
    rho = spectral_radius(Fm)
    if rho >= 1.0:
        raise InfeasibleError(
            f"discrete Lyapunov equation infeasible: spectral radius {rho:.12g} >= 1"
        )
    # scipy convention: a X a^T - X + q = 0, so pass a = F'.
    P = scipy.linalg.solve_discrete_lyapunov(Fm.T, Qm)
    P = 0.5 * (P + P.T)
    residual = Fm.T @ P @ Fm - P + Qm
    tol = LYAPUNOV_RESIDUAL_TOL * (1.0 + float(np.max(np.abs(P))))
    if float(np.max(np.abs(residual))) > tol:
        raise NumericError(
            f"Lyapunov residual {np.max(np.abs(residual)):.3g} exceeds tolerance {tol:.3g}"
        )
    if np.min(np.linalg.eigvalsh(P)) <= 0:
        raise NumericError("Lyapunov solution is not positive definite")
    return P


def dlqr(Atilde, Btilde, Qw, Rw, max_iter: int = 10_000) -> np.ndarray:
    """Discrete-time LQR gain for u = K x (note the sign convention).

    Iterates the Riccati recursion to its fixed point S and returns
    K = -(Rw + B'SB)^(-1) B'SA, so that Atilde + Btilde K is Schur stable.
    Raises NumericError when the recursion does not settle within the
    iteration cap, and InfeasibleError when the resulting loop is not
    stable.
    """
    A = _as_matrix(Atilde, "Atilde")
    _require_square(A, "Atilde")
    B = _as_matrix(Btilde, "Btilde")
    Q = _as_matrix(Qw, "Qw")
    R = _as_matrix(Rw, "Rw")
    n = A.shape[0]
    if B.shape[0] != n:
        raise DimensionError("Btilde rows must match Atilde")
    m = B.shape[1]
    if Q.shape != (n, n) or R.shape != (m, m):
        raise DimensionError("Qw/Rw shapes inconsistent with (Atilde, Btilde)")
    if np.min(np.linalg.eigvalsh(0.5 * (Q + Q.T))) < -1e-12:
        raise ValueError("Qw must be positive semidefinite")
    if np.min(np.linalg.eigvalsh(0.5 * (R + R.T))) <= 0:
        raise ValueError("Rw must be positive definite")

    S = Q.copy()
    for _ in range(max_iter):
        BtS = B.T @ S
        gain = np.linalg.solve(R + BtS @ B, BtS @ A)
        S_next = Q + A.T @ S @ (A - B @ gain)
        S_next = 0.5 * (S_next + S_next.T)
        if not np.all(np.isfinite(S_next)):
            raise NumericError("Riccati recursion diverged")
        if float(np.max(np.abs(S_next - S))) <= 1e-14 * (1.0 + float(np.max(np.abs(S_next)))):
            S = S_next
            break
        S = S_next
    else:
        raise NumericError(f"Riccati recursion did not converge in {max_iter} iterations")

    residual = A.T @ S @ A - S - (A.T @ S @ B) @ np.linalg.solve(R + B.T @ S @ B, B.T @ S @ A) + Q
    if float(np.max(np.abs(residual))) > LYAPUNOV_RESIDUAL_TOL * (1.0 + float(np.max(np.abs(S)))):
        raise NumericError("Riccati residual exceeds tolerance")
    K = -np.linalg.solve(R + B.T @ S @ B, B.T @ S @ A)
    if spectral_radius(A + B @ K) >= 1.0:
        raise InfeasibleError("LQR gain does not stabilize the pair (Atilde, Btilde)")
    return K


# ---------------------------------------------------------------------------
# fixed-step RK4
#
# The inner loop works on tuples of Python floats: for the small state
# dimensions used here that is several times faster than ndarray
# arithmetic, and the operation order is fixed so results are
# reproducible bit for bit.
# ---------------------------------------------------------------------------

Field = Callable[[Sequence[float]], Sequence[float]]


def _rk4_step(field: Field, x: tuple, h: float) -> tuple:
    h2 = 0.5 * h
    h6 = h / 6.0
    k1 = field(x)
    k2 = field(tuple(xi + h2 * ki for xi, ki in zip(x, k1)))
    k3 = field(tuple(xi + h2 * ki for xi, ki in zip(x, k2)))
    k4 = field(tuple(xi + h * ki for xi, ki in zip(x, k3)))
    return tuple(
        xi + h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        for xi, a1, a2, a3, a4 in zip(x, k1, k2, k3, k4)
    )


def _steps_for_span(length: float, step: float) -> int:
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if length < 0:
        raise ValueError("time span must run forward")
    n = int(round(length / step))
    if n == 0 or abs(n * step - length) > 1e-9 * max(1.0, abs(length)):
        raise ValueError(f"step {step} does not divide span length {length}")
    return n


def integrate_ode(
    field: Field,
    x0,
    t_span: tuple[float, float],
    step: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Classical fixed-step RK4 over t_span, sampled at every grid point.

    `field` maps a state sequence to its derivative sequence and must be
    time-invariant (bind any input into the closure). Returns (times,
    states) including both endpoints. Raises BlowUpError carrying the
    first grid time at which a non-finite state appears.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    nsteps = _steps_for_span(t1 - t0, step)
    x = tuple(float(v) for v in x0)
    out = [x]
    for k in range(nsteps):
        # plain-float arithmetic raises OverflowError where IEEE would give inf
        try:
            x = _rk4_step(field, x, step)
        except OverflowError:
            raise BlowUpError(t0 + (k + 1) * step) from None
        if not all(np.isfinite(v) for v in x):
            raise BlowUpError(t0 + (k + 1) * step)
        out.append(x)
    times = t0 + step * np.arange(nsteps + 1)
    return times, np.array(out, dtype=float)


def rk4_endpoint(field: Field, x0: Sequence[float], length: float, step: float) -> tuple:
    """Endpoint-only RK4 flow over a span of the given length.

    Same arithmetic as integrate_ode, without storing the interior grid.
    """
    nsteps = _steps_for_span(length, step)
    x = tuple(float(v) for v in x0)
    for k in range(nsteps):
        try:
            x = _rk4_step(field, x, step)
        except OverflowError:
            raise BlowUpError((k + 1) * step) from None
        if not all(np.isfinite(v) for v in x):
            raise BlowUpError((k + 1) * step)
    return x
