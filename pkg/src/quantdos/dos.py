"""Denial-of-service attack schedules and their admissibility algebra.

A schedule is a finite list of closed intervals [a_i, a_i + tau_i]; a
zero-length attack is impulsive and disables exactly the instant a_i.
Admissibility over a horizon is an affine budget on two counters:

    frequency:  N(t)   <= kappa_f + rho_f * t   (attack starts in [0, t])
    duration:   |A(t)| <= kappa_d + rho_d * t   (union length in [0, t])

verify_constraints checks both inequalities on a finite critical set,
which is exhaustive: N(t) - rho_f*t only increases at attack starts, and
|A(t)| - rho_d*t has slope 1 - rho_d > 0 inside covered spans and
-rho_d <= 0 outside, so its local maxima sit at merged-interval right
endpoints (clipped to the horizon) and at the horizon itself.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GenerationError

__all__ = [
    "DoSSchedule",
    "DoSParams",
    "VerifyResult",
    "is_active",
    "count_attacks",
    "duration",
    "merged_intervals",
    "verify_constraints",
    "generate_constrained",
    "count_lost_samples",
    "save_schedule_csv",
    "load_schedule_csv",
]

#: multiplicative safety margin generators leave on affine budgets so the
#: constructed schedules verify cleanly in floating point
GENERATOR_MARGIN = 0.999


@dataclass(frozen=True)
class DoSSchedule:
    """Ordered attack list: tuples (start, duration), starts nondecreasing."""

    attacks: tuple[tuple[float, float], ...]

    def __post_init__(self):
        cleaned = tuple((float(a), float(tau)) for a, tau in self.attacks)
        object.__setattr__(self, "attacks", cleaned)
        prev = -np.inf
        for a, tau in cleaned:
            if not (np.isfinite(a) and np.isfinite(tau)):
                raise ValueError("attack times must be finite")
            if a < 0 or tau < 0:
                raise ValueError("attack start and duration must be nonnegative")
            if a < prev:
                raise ValueError("attack starts must be nondecreasing")
            prev = a

    def __len__(self) -> int:
        return len(self.attacks)

    @staticmethod
    def empty() -> "DoSSchedule":
        return DoSSchedule(attacks=())


@dataclass(frozen=True)
class DoSParams:
    """Affine budget parameters (kappa_f, rho_f) and (kappa_d, rho_d)."""

    kappa_f: float = 0.0
    rho_f: float = 0.0
    kappa_d: float = 0.0
    rho_d: float = 0.0

    def __post_init__(self):
        if self.kappa_f < 0 or self.rho_f < 0 or self.kappa_d < 0:
            raise ValueError("budget parameters must be nonnegative")
        if not 0.0 <= self.rho_d < 1.0:
            raise ValueError(f"duty rate rho_d must lie in [0, 1), got {self.rho_d}")

    def effective(self, T: float) -> tuple[float, float]:
        """Sample-loss budget (kappa_d_star, rho_d_star) at sampling period T.

        Every lost sample is either covered by attack time or sits at one
        of the N attack onsets, so the loss count obeys
        chi(t) <= (kappa_d_star + rho_d_star * t) / T.
        """
        return self.kappa_d + self.kappa_f * T, self.rho_d + self.rho_f * T


def is_active(sched: DoSSchedule, t: float) -> bool:
    """Whether t falls inside any closed attack interval."""
    return any(a <= t <= a + tau for a, tau in sched.attacks)


def count_attacks(sched: DoSSchedule, t: float) -> int:
    """Number of attacks whose start lies in [0, t]; coincident starts both count."""
    return sum(1 for a, _ in sched.attacks if a <= t)


def merged_intervals(sched: DoSSchedule) -> list[tuple[float, float]]:
    """Union of the attack intervals as disjoint [lo, hi] spans (impulses kept)."""
    merged: list[list[float]] = []
    for a, tau in sched.attacks:  # starts already sorted
        hi = a + tau
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([a, hi])
    return [(lo, hi) for lo, hi in merged]


def duration(sched: DoSSchedule, t: float) -> float:
    """Lebesgue measure of the attack union intersected with [0, t]."""
    total = 0.0
    for lo, hi in merged_intervals(sched):
        if lo > t:
            break
        total += min(hi, t) - lo
    return total


@dataclass(frozen=True)
class VerifyResult:
    """Outcome of an admissibility check over a finite horizon."""

    passed: bool
    horizon: float
    violation_time: float | None = None
    assumption: str | None = None  # "frequency" | "duration"
    detail: str = ""

    def __bool__(self) -> bool:
        return self.passed


def verify_constraints(sched: DoSSchedule, p: DoSParams, horizon: float) -> VerifyResult:
    """Check both affine budgets on [0, horizon] at the critical points.

    Returns the earliest violating time with the assumption that failed.
    The verdict only covers the given horizon.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    events: list[tuple[float, str, float, float]] = []  # (t, which, observed, allowed)
    for a, _ in sched.attacks:
        if a <= horizon:
            n = count_attacks(sched, a)
            events.append((a, "frequency", float(n), p.kappa_f + p.rho_f * a))
    checkpoints = {horizon}
    for lo, hi in merged_intervals(sched):
        if lo <= horizon:
            checkpoints.add(min(hi, horizon))
    for t in checkpoints:
        events.append((t, "duration", duration(sched, t), p.kappa_d + p.rho_d * t))
    events.sort(key=lambda e: e[0])
    for t, which, observed, allowed in events:
        if observed > allowed:
            return VerifyResult(
                passed=False,
                horizon=horizon,
                violation_time=t,
                assumption=which,
                detail=f"{which} budget exceeded at t={t:.6g}: {observed:.6g} > {allowed:.6g}",
            )
    return VerifyResult(passed=True, horizon=horizon)


# ---------------------------------------------------------------------------
# admissible-schedule generators
# ---------------------------------------------------------------------------


def _periodic(p: DoSParams, horizon: float) -> list[tuple[float, float]]:
    if p.rho_f <= 0 or p.rho_d <= 0:
        if p.rho_f == 0 and p.rho_d == 0 and p.kappa_f == 0 and p.kappa_d == 0:
            return []
        if p.rho_f <= 0 or p.rho_d <= 0:
            raise GenerationError(
                "periodic strategy needs rho_f > 0 and rho_d > 0; "
                "use front_loaded to spend kappa budgets"
            )
    period = 1.0 / p.rho_f
    tau = GENERATOR_MARGIN * min(p.rho_d / p.rho_f, period)
    attacks = []
    k = 1
    while k * period <= horizon:
        attacks.append((k * period, tau))
        k += 1
    return attacks


def _front_loaded(p: DoSParams, horizon: float) -> list[tuple[float, float]]:
    if p.kappa_f < 1.0:
        raise GenerationError(
            "front_loaded strategy spends the kappa_f budget at t=0 and needs kappa_f >= 1"
        )
    attacks: list[tuple[float, float]] = []
    # one initial block: |A(t)| = t along it, admissible while t <= kappa_d + rho_d t
    block = GENERATOR_MARGIN * p.kappa_d / (1.0 - p.rho_d)
    if block > 0:
        attacks.append((0.0, min(block, horizon)))
    else:
        attacks.append((0.0, 0.0))  # impulsive: still blocks the t=0 sample
    # sustain at the average rates afterwards
    if p.rho_f > 0 and p.rho_d > 0:
        period = 1.0 / p.rho_f
        tau = GENERATOR_MARGIN * min(p.rho_d / p.rho_f, period)
        start = attacks[-1][0] + attacks[-1][1] + period
        t = start
        while t <= horizon:
            attacks.append((t, tau))
            t += period
    return attacks


def _random(p: DoSParams, horizon: float, seed: int, proposals: int = 200) -> list[tuple[float, float]]:
    rng = np.random.default_rng(seed)
    dur_scale = max(p.kappa_d, p.rho_d * horizon / 4.0)
    attacks: list[tuple[float, float]] = []
    for _ in range(proposals):
        a = float(rng.uniform(0.0, horizon))
        tau = float(rng.uniform(0.0, dur_scale)) if dur_scale > 0 else 0.0
        candidate = sorted(attacks + [(a, tau)])
        if verify_constraints(DoSSchedule(tuple(candidate)), p, horizon).passed:
            attacks = candidate
    return attacks


def generate_constrained(
    p: DoSParams,
    T: float,
    horizon: float,
    strategy: str = "periodic",
    seed: int = 0,
) -> DoSSchedule:
    """Build a schedule over [0, horizon] that passes verify_constraints.

    periodic: evenly spaced bursts at rate rho_f with duty rho_d.
    front_loaded: spend kappa budgets in an initial block, then sustain.
    random: seeded rejection sampling of uniform proposals.
    """
    if T <= 0 or horizon <= 0:
        raise ValueError("T and horizon must be positive")
    if strategy == "periodic":
        attacks = _periodic(p, horizon)
    elif strategy == "front_loaded":
        attacks = _front_loaded(p, horizon)
    elif strategy == "random":
        attacks = _random(p, horizon, seed)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    sched = DoSSchedule(tuple(attacks))
    verdict = verify_constraints(sched, p, horizon)
    if not verdict.passed:
        raise GenerationError(f"generated schedule failed verification: {verdict.detail}")
    return sched


def count_lost_samples(sched: DoSSchedule, T: float, steps: int) -> int:
    """Number of sampling instants kT, k = 0..steps, hit by an attack."""
    return sum(1 for k in range(steps + 1) if is_active(sched, k * T))


def save_schedule_csv(sched: DoSSchedule, out) -> None:
    """Write one attack per row under the header start,duration.

    `out` is a path or a writable text file.
    """
    if hasattr(out, "write"):
        from contextlib import nullcontext

        ctx = nullcontext(out)
    else:
        ctx = open(out, "w", newline="")
    with ctx as fh:
        w = csv.writer(fh)
        w.writerow(["start", "duration"])
        for a, tau in sched.attacks:
            w.writerow([format(a, ".17g"), format(tau, ".17g")])


def load_schedule_csv(path) -> DoSSchedule:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    attacks = tuple((float(r["start"]), float(r["duration"])) for r in rows)
    return DoSSchedule(attacks=tuple(sorted(attacks)))
