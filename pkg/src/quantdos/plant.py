"""Nonlinear plant models, linearization, and flow maps.

A plant is a continuous-time system dx/dt = f(x, u) with an equilibrium
at the origin, a declared Lipschitz constant L valid on the box
{ |x|_inf < rho }, and known state/input dimensions. Fields return plain
float tuples so the fixed-step integrator can run without array
overhead; wrap with numpy at the call site when convenient.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError
from .numerics import inf_norm, integrate_ode, rk4_endpoint

__all__ = [
    "PlantModel",
    "LienardField",
    "LinearField",
    "PolynomialField",
    "lienard_plant",
    "linear_plant",
    "polynomial_plant",
    "linearize",
    "flow_map",
    "remainder",
    "empirical_lipschitz",
    "PLANT_BUILDERS",
    "make_plant",
]


class LienardField:
    """Controlled oscillator with cubic/quintic feedback nonlinearity.

    dx1/dt = x2 + x1 + a*x1^3 - b*x1^5
    dx2/dt = -x1 + u
    """

    def __init__(self, a: float, b: float):
        self.a = float(a)
        self.b = float(b)

    def __call__(self, x: Sequence[float], u: Sequence[float]) -> tuple:
        x1 = x[0]
        return (x[1] + x1 + self.a * x1**3 - self.b * x1**5, -x1 + u[0])


class LinearField:
    """dx/dt = A x + B u with matrices stored row-wise as float tuples."""

    def __init__(self, A, B):
        self.A = tuple(tuple(float(v) for v in row) for row in np.atleast_2d(A))
        self.B = tuple(tuple(float(v) for v in row) for row in np.atleast_2d(B))

    def __call__(self, x: Sequence[float], u: Sequence[float]) -> tuple:
        return tuple(
            sum(a * xi for a, xi in zip(arow, x)) + sum(b * ui for b, ui in zip(brow, u))
            for arow, brow in zip(self.A, self.B)
        )


class PolynomialField:
    """Sum of monomial terms per state derivative.

    Each term is (target, coef, x_powers, u_powers); the constant monomial
    is rejected so the origin stays an equilibrium.
    """

    def __init__(self, n: int, m: int, terms: Sequence[tuple]):
        self.n = int(n)
        self.m = int(m)
        packed = []
        for target, coef, xpow, upow in terms:
            target = int(target)
            if not 0 <= target < self.n:
                raise DimensionError(f"term target {target} out of range for n={self.n}")
            xpow = tuple(int(p) for p in xpow)
            upow = tuple(int(p) for p in upow)
            if len(xpow) != self.n or len(upow) != self.m:
                raise DimensionError("term power vectors must match (n, m)")
            if all(p == 0 for p in xpow) and all(p == 0 for p in upow):
                raise ValueError("constant terms would move the equilibrium off the origin")
            packed.append((target, float(coef), xpow, upow))
        self.terms = tuple(packed)

    def __call__(self, x: Sequence[float], u: Sequence[float]) -> tuple:
        out = [0.0] * self.n
        for target, coef, xpow, upow in self.terms:
            v = coef
            for xi, p in zip(x, xpow):
                if p:
                    v *= xi**p
            for ui, p in zip(u, upow):
                if p:
                    v *= ui**p
            out[target] += v
        return tuple(out)


@dataclass(frozen=True)
class PlantModel:
    """Continuous-time plant with declared Lipschitz data.

    `f(x, u)` returns the state derivative as a float sequence. `jac`
    optionally carries the analytic Jacobians (A, B) at the origin, which
    `linearize` prefers over finite differences.
    """

    n: int
    m: int
    f: Callable[[Sequence[float], Sequence[float]], Sequence[float]]
    L: float
    rho: float
    name: str = ""
    jac: tuple[np.ndarray, np.ndarray] | None = dc_field(default=None, repr=False)

    def __post_init__(self):
        if self.n <= 0 or self.m <= 0:
            raise DimensionError("state and input dimensions must be positive")
        if self.L < 0:
            raise ValueError("Lipschitz constant must be nonnegative")
        if not self.rho > 0:
            raise ValueError("region radius rho must be positive")
        f0 = np.asarray(self.f((0.0,) * self.n, (0.0,) * self.m), dtype=float)
        if f0.shape != (self.n,):
            raise DimensionError(f"f must return {self.n} derivatives, got shape {f0.shape}")
        if np.max(np.abs(f0)) > 1e-12:
            raise ValueError("f(0, 0) must vanish: the origin is not an equilibrium")


def lienard_plant(
    a: float = 1.0 / 3.0,
    b: float = 1.0 / 50.0,
    L: float = 10.0,
    rho: float = 1.5,
) -> PlantModel:
    """Benchmark oscillator: unstable origin surrounded by a stable limit cycle."""
    A = np.array([[1.0, 1.0], [-1.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    return PlantModel(n=2, m=1, f=LienardField(a, b), L=L, rho=rho, name="lienard", jac=(A, B))


def linear_plant(A, B, L: float | None = None, rho: float = 1e6, name: str = "linear") -> PlantModel:
    """Linear plant dx/dt = A x + B u; L defaults to the induced inf-norm of A."""
    Am = np.atleast_2d(np.asarray(A, dtype=float))
    Bm = np.atleast_2d(np.asarray(B, dtype=float))
    if Am.shape[0] != Am.shape[1] or Bm.shape[0] != Am.shape[0]:
        raise DimensionError("A must be square and B row-compatible")
    return PlantModel(
        n=Am.shape[0],
        m=Bm.shape[1],
        f=LinearField(Am, Bm),
        L=float(inf_norm(Am)) if L is None else float(L),
        rho=rho,
        name=name,
        jac=(Am.copy(), Bm.copy()),
    )


def polynomial_plant(n: int, m: int, terms: Sequence[tuple], L: float, rho: float,
                     name: str = "polynomial") -> PlantModel:
    """User plant from monomial terms; L and rho must be supplied explicitly."""
    return PlantModel(n=n, m=m, f=PolynomialField(n, m, terms), L=L, rho=rho, name=name)


def linearize(plant: PlantModel, h: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians (A, B) of f at the origin.

    Uses the plant's analytic Jacobians when present, otherwise central
    finite differences with step h.
    """
    if plant.jac is not None:
        A, B = plant.jac
        return A.copy(), B.copy()
    n, m = plant.n, plant.m
    A = np.zeros((n, n))
    B = np.zeros((n, m))
    z_x = [0.0] * n
    z_u = [0.0] * m
    for j in range(n):
        xp = list(z_x)
        xm = list(z_x)
        xp[j] = h
        xm[j] = -h
        fp = np.asarray(plant.f(xp, z_u), dtype=float)
        fm = np.asarray(plant.f(xm, z_u), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise ValueError("plant dynamics not evaluable near the origin")
        A[:, j] = (fp - fm) / (2.0 * h)
    for j in range(m):
        up = list(z_u)
        um = list(z_u)
        up[j] = h
        um[j] = -h
        fp = np.asarray(plant.f(z_x, up), dtype=float)
        fm = np.asarray(plant.f(z_x, um), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise ValueError("plant dynamics not evaluable near the origin")
        B[:, j] = (fp - fm) / (2.0 * h)
    return A, B


def flow_map(plant: PlantModel, xbar, ubar, T: float, step: float) -> np.ndarray:
    """State reached from xbar after holding ubar constant for T time units."""
    u = tuple(float(v) for v in np.atleast_1d(ubar))
    f = plant.f
    return np.asarray(rk4_endpoint(lambda x: f(x, u), xbar, T, step), dtype=float)


def flow_dense(plant: PlantModel, xbar, ubar, T: float, step: float):
    """Like flow_map but returns the full (times, states) grid."""
    u = tuple(float(v) for v in np.atleast_1d(ubar))
    f = plant.f
    return integrate_ode(lambda x: f(x, u), xbar, (0.0, T), step)


def remainder(plant: PlantModel, x, u, A: np.ndarray | None = None,
              B: np.ndarray | None = None) -> np.ndarray:
    """Nonlinear remainder g(x, u) = f(x, u) - A x - B u of the linearization."""
    if A is None or B is None:
        A, B = linearize(plant)
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    uv = np.atleast_1d(np.asarray(u, dtype=float))
    return np.asarray(plant.f(tuple(xv), tuple(uv)), dtype=float) - A @ xv - B @ uv


def empirical_lipschitz(plant: PlantModel, n_pairs: int = 2000, seed: int = 0) -> float:
    """Sampled lower estimate of the Lipschitz constant of f over the region.

    Draws state pairs inside { |x|_inf < rho } with random inputs and
    returns the largest observed difference quotient. Useful for sanity
    checks against the declared L; it never replaces it.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        y = rng.uniform(-plant.rho, plant.rho, size=plant.n)
        z = rng.uniform(-plant.rho, plant.rho, size=plant.n)
        u = tuple(rng.uniform(-1.0, 1.0, size=plant.m))
        gap = inf_norm(y - z)
        if gap < 1e-12:
            continue
        dy = np.asarray(plant.f(tuple(y), u), dtype=float)
        dz = np.asarray(plant.f(tuple(z), u), dtype=float)
        worst = max(worst, inf_norm(dy - dz) / gap)
    return worst


def _build_lienard(params: dict) -> PlantModel:
    return lienard_plant(
        a=params.get("a", 1.0 / 3.0),
        b=params.get("b", 1.0 / 50.0),
        L=params.get("L", 10.0),
        rho=params.get("rho", 1.5),
    )


def _build_linear(params: dict) -> PlantModel:
    return linear_plant(
        params["A"], params["B"], L=params.get("L"), rho=params.get("rho", 1e6)
    )


def _build_polynomial(params: dict) -> PlantModel:
    terms = [
        (t["target"], t["coef"], t["xpow"], t["upow"]) for t in params["terms"]
    ]
    return polynomial_plant(
        n=params["n"], m=params["m"], terms=terms, L=params["L"], rho=params["rho"]
    )


#: name -> builder(params dict), the registry the CLI and service resolve against
PLANT_BUILDERS: dict[str, Callable[[dict], PlantModel]] = {
    "lienard": _build_lienard,
    "linear": _build_linear,
    "polynomial": _build_polynomial,
}


def make_plant(name: str, params: dict | None = None) -> PlantModel:
    """Build a registered plant by name."""
    if name not in PLANT_BUILDERS:
        raise KeyError(f"unknown plant {name!r}; registered: {sorted(PLANT_BUILDERS)}")
    return PLANT_BUILDERS[name](params or {})
