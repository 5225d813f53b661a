"""Sampled estimates of the linearization-validity radii.

The certificate needs two radii: `d`, inside which the remainder of the
linearization is dominated by the state/input norm itself, and `delta`,
inside which it is dominated by an arbitrarily small multiple gamma of
that norm. Both existence statements are non-constructive, so the radii
are estimated by dense seeded sampling on a geometric radius grid, with
one conservative halving on top. Estimates carry their sample counts and
seed so they can be reproduced bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import QuantdosError
from ..numerics import inf_norm
from ..plant import PlantModel, linearize

__all__ = ["RadiusEstimate", "DeltaEstimate", "estimate_d", "estimate_delta"]

#: grid radii per decade of shrinkage below the region radius
GRID_LEVELS = 24


class EstimateError(QuantdosError):
    """The domination bound failed even at the smallest grid radius."""


@dataclass(frozen=True)
class RadiusEstimate:
    """Radius d with the raw passing radius and sampling provenance."""

    d: float
    d_prime: float
    grid_radius_passed: float
    samples_per_radius: int
    seed: int
    scale: float  # sqrt(c0^2 + |K|^2)


@dataclass(frozen=True)
class DeltaEstimate:
    """Radius delta = min(d, halved delta'/scale) with provenance."""

    delta: float
    delta_prime: float
    grid_radius_passed: float
    samples_per_radius: int
    seed: int
    gamma: float


def _radius_grid(top: float) -> list[float]:
    # geometric grid from the region radius down by a factor 2 per level
    return [top * 2.0**-j for j in range(GRID_LEVELS + 1)]


def _samples_within(plant: PlantModel, r: float, count: int, seed: int):
    """Seeded (x, u) proposals with sqrt(|x|^2 + |u|^2) < r, prefix-stable.

    Proposals are drawn in a fixed order so a larger count extends rather
    than reshuffles the sample set; a denser estimate can then only
    shrink the passing radius.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        x = rng.uniform(-r, r, size=plant.n)
        u = rng.uniform(-r, r, size=plant.m)
        if math.hypot(inf_norm(x), inf_norm(u)) < r:
            out.append((x, u))
    return out


def _largest_passing_radius(plant, A, B, bound, top, samples, seed) -> float | None:
    for j, r in enumerate(_radius_grid(top)):
        ok = True
        for x, u in _samples_within(plant, r, samples, seed + 1000 * j):
            g = np.asarray(plant.f(tuple(x), tuple(u)), dtype=float) - A @ x - B @ u
            if inf_norm(g) > bound(inf_norm(x), inf_norm(u)):
                ok = False
                break
        if ok:
            return r
    return None


def estimate_d(
    plant: PlantModel,
    K,
    T: float,
    c0: float,
    samples: int = 400,
    seed: int = 0,
    A: np.ndarray | None = None,
    B: np.ndarray | None = None,
) -> RadiusEstimate:
    """Largest sampled radius where the remainder is below the norm itself.

    Finds the largest grid radius r such that every sampled pair with
    sqrt(|x|^2+|u|^2) < r satisfies |g(x,u)| <= |x| + |u|, halves it once,
    and rescales by sqrt(c0^2 + |K|^2) to account for where one sampling
    period can take the state. Raises EstimateError when even the
    smallest radius fails.
    """
    if A is None or B is None:
        A, B = linearize(plant)
    Km = np.atleast_2d(np.asarray(K, dtype=float))
    passing = _largest_passing_radius(
        plant, A, B, lambda nx, nu: nx + nu, plant.rho, samples, seed
    )
    if passing is None:
        raise EstimateError("remainder exceeds |x|+|u| even at the smallest sampled radius")
    scale = math.sqrt(c0**2 + inf_norm(Km) ** 2)
    d_prime = 0.5 * passing
    return RadiusEstimate(
        d=d_prime / scale,
        d_prime=d_prime,
        grid_radius_passed=passing,
        samples_per_radius=samples,
        seed=seed,
        scale=scale,
    )


def estimate_delta(
    plant: PlantModel,
    K,
    gamma: float,
    d: float,
    c0: float,
    samples: int = 400,
    seed: int = 0,
    A: np.ndarray | None = None,
    B: np.ndarray | None = None,
) -> DeltaEstimate:
    """Largest sampled radius where |g(x,u)| <= gamma (|x| + |u|).

    Returns min(d, halved passing radius / sqrt(c0^2 + |K|^2)); always at
    most d.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if A is None or B is None:
        A, B = linearize(plant)
    Km = np.atleast_2d(np.asarray(K, dtype=float))
    passing = _largest_passing_radius(
        plant, A, B, lambda nx, nu: gamma * (nx + nu), plant.rho, samples, seed
    )
    if passing is None:
        raise EstimateError(
            f"remainder exceeds gamma(|x|+|u|) with gamma={gamma:.3g} "
            "even at the smallest sampled radius"
        )
    scale = math.sqrt(c0**2 + inf_norm(Km) ** 2)
    delta_prime = 0.5 * passing
    return DeltaEstimate(
        delta=min(d, delta_prime / scale),
        delta_prime=delta_prime,
        grid_radius_passed=passing,
        samples_per_radius=samples,
        seed=seed,
        gamma=gamma,
    )
