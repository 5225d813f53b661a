"""Closed-loop engine: sampled plant, lossy channel, zooming quantizer.

One run is a strictly sequential loop over sampling instants. At each
instant the channel either delivers the encoded state (the input becomes
gain times the decoded point, held for one period) or drops it under an
active attack (input held at zero). Encoder- and decoder-side quantizer
replicas advance with the shared loss flag; their equality at every step
is asserted, not assumed. Runs are deterministic functions of the config.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field

import numpy as np

from .analysis.constants import compute_lambda
from .dos import DoSSchedule, DoSParams, is_active, verify_constraints
from .errors import BlowUpError, SaturationError
from .numerics import inf_norm, integrate_ode
from .plant import PlantModel
from .quantizer import SATURATION_SLACK, QuantizerState, decode, encode, zoom_update

__all__ = [
    "SimConfig",
    "SimTrace",
    "run_closed_loop",
    "check_no_saturation",
    "converged",
    "write_trace_csv",
    "write_dense_csv",
]

COMPLETED = "completed"
SATURATED = "saturated"
BLOW_UP = "blow_up"


@dataclass(frozen=True)
class SimConfig:
    """Everything a closed-loop run depends on.

    `params` is optional metadata; when present the schedule is checked
    against it and a mismatch is reported as a warning, since exploring
    out-of-budget attacks is allowed. The seed does not drive any
    randomness inside the loop; it records the provenance of generated
    inputs so artifacts stay reproducible.
    """

    plant: PlantModel
    K: np.ndarray
    T: float
    M: int
    E0: float
    x0: np.ndarray
    schedule: DoSSchedule
    steps: int
    params: DoSParams | None = None
    ode_step: float | None = None
    blowup_threshold: float = 1e6
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "K", np.atleast_2d(np.asarray(self.K, dtype=float)))
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).ravel())
        if self.K.shape != (self.plant.m, self.plant.n):
            raise ValueError(
                f"gain must be {self.plant.m}x{self.plant.n}, got {self.K.shape}"
            )
        if self.x0.shape != (self.plant.n,):
            raise ValueError(f"x0 must have dimension {self.plant.n}")
        if self.T <= 0 or self.steps < 1 or self.E0 < 0 or self.M < 2:
            raise ValueError("need T > 0, steps >= 1, E0 >= 0, M >= 2")

    @property
    def step_length(self) -> float:
        return self.ode_step if self.ode_step is not None else self.T / 100.0

    def validate(self) -> list[str]:
        """Out-of-assumption conditions, reported as warnings, never errors."""
        warnings = []
        if inf_norm(self.x0) > self.E0:
            warnings.append(
                f"initial state norm {inf_norm(self.x0):.6g} exceeds E0={self.E0:.6g}; "
                "the first delivered sample may saturate the encoder"
            )
        growth = compute_lambda(self.plant.L, self.T)
        if self.M <= growth:
            warnings.append(
                f"levels M={self.M} do not exceed the growth factor {growth:.6g}; "
                "the radius cannot contract on delivered samples"
            )
        if self.params is not None:
            verdict = verify_constraints(self.schedule, self.params, (self.steps + 1) * self.T)
            if not verdict.passed:
                warnings.append(f"schedule violates its declared budget: {verdict.detail}")
        return warnings


@dataclass
class SimTrace:
    """Per-sample record of one run plus the dense inter-sample states."""

    t: np.ndarray
    x: np.ndarray
    theta: np.ndarray
    symbols: list
    q: np.ndarray
    xi: np.ndarray
    E: np.ndarray
    u: np.ndarray
    dense_t: np.ndarray
    dense_x: np.ndarray
    status: str
    status_detail: str = ""
    warnings: list = dc_field(default_factory=list)
    growth: float = 1.0
    M: int = 2
    E0: float = 0.0

    def __len__(self) -> int:
        return len(self.t)

    def loss_counts(self) -> np.ndarray:
        """chi_k = number of lost samples among steps 0..k-1."""
        chi = np.zeros(len(self.t), dtype=int)
        chi[1:] = np.cumsum(self.theta[:-1])
        return chi

    def radius_law_max_relerr(self) -> float:
        """Worst relative deviation from E_k = growth^chi (growth/M)^(k-chi) E0."""
        if self.E0 == 0.0:
            return float(np.max(np.abs(self.E)))
        chi = self.loss_counts()
        k = np.arange(len(self.t))
        expected = self.growth**chi * (self.growth / self.M) ** (k - chi) * self.E0
        return float(np.max(np.abs(self.E - expected) / expected))

    def summary(self) -> dict:
        norms = np.max(np.abs(self.x), axis=1) if len(self.x) else np.zeros(0)
        return {
            "status": self.status,
            "status_detail": self.status_detail,
            "samples_recorded": int(len(self.t)),
            "loss_count": int(np.sum(self.theta)),
            "final_state": [float(v) for v in self.x[-1]] if len(self.x) else [],
            "final_norm": float(norms[-1]) if norms.size else 0.0,
            "max_norm": float(np.max(norms)) if norms.size else 0.0,
            "E_final": float(self.E[-1]) if len(self.E) else 0.0,
            "E_max": float(np.max(self.E)) if len(self.E) else 0.0,
            "no_saturation": check_no_saturation(self),
            "radius_law_max_relerr": self.radius_law_max_relerr(),
            "warnings": list(self.warnings),
        }


def run_closed_loop(cfg: SimConfig) -> SimTrace:
    """Run the loop for cfg.steps periods, recording steps+1 samples.

    Loss at instant k zeroes the input over [t_k, t_{k+1}) and zooms the
    replicas out; a delivery encodes, decodes, applies the gain, and zooms
    in. Terminates early with status `saturated` when the encoder finds
    the state outside its region, or `blow_up` when a trajectory leaves
    the finite range or crosses the blow-up threshold.
    """
    plant, K, T, M = cfg.plant, cfg.K, cfg.T, cfg.M
    n, m = plant.n, plant.m
    growth = compute_lambda(plant.L, T)
    h = cfg.step_length
    warnings = cfg.validate()
    f = plant.f

    # endpoint memo: encoder and decoder replicas request the same flow
    memo_key: tuple | None = None
    memo_val: tuple | None = None

    def flow(xseq, useq):
        nonlocal memo_key, memo_val
        key = (tuple(float(v) for v in xseq), tuple(float(v) for v in useq))
        if key == memo_key:
            return memo_val
        _, grid = integrate_ode(lambda y: f(y, key[1]), key[0], (0.0, T), h)
        memo_key, memo_val = key, tuple(float(v) for v in grid[-1])
        return memo_val

    enc = QuantizerState(xi=(0.0,) * n, E=float(cfg.E0), M=M)
    dec = QuantizerState(xi=(0.0,) * n, E=float(cfg.E0), M=M)

    rows_t, rows_x, rows_theta, rows_sym = [], [], [], []
    rows_q, rows_xi, rows_E, rows_u = [], [], [], []
    dense_t_parts: list[np.ndarray] = []
    dense_x_parts: list[np.ndarray] = []
    status, detail = COMPLETED, ""

    x = tuple(float(v) for v in cfg.x0)
    for k in range(cfg.steps + 1):
        tk = k * T
        theta = 1 if is_active(cfg.schedule, tk) else 0
        assert enc == dec, "encoder/decoder replicas diverged"

        symbol = None
        qk = None
        u = (0.0,) * m
        if theta == 0:
            try:
                symbol = encode(enc, x)
            except SaturationError as err:
                status, detail = SATURATED, str(err)
                rows_t.append(tk)
                rows_x.append(x)
                rows_theta.append(theta)
                rows_sym.append(None)
                rows_q.append((np.nan,) * n)
                rows_xi.append(enc.xi)
                rows_E.append(enc.E)
                rows_u.append((0.0,) * m)
                break
            qk = decode(dec, symbol)
            u = tuple(float(v) for v in K @ np.asarray(qk))

        rows_t.append(tk)
        rows_x.append(x)
        rows_theta.append(theta)
        rows_sym.append(symbol)
        rows_q.append(qk if qk is not None else (np.nan,) * n)
        rows_xi.append(enc.xi)
        rows_E.append(enc.E)
        rows_u.append(u)

        if k == cfg.steps:
            break

        # plant over [t_k, t_{k+1}] under the held input
        try:
            seg_t, seg_x = integrate_ode(lambda y: f(y, u), x, (tk, tk + T), h)
        except BlowUpError as err:
            status, detail = BLOW_UP, f"plant trajectory diverged at t={err.t_bad:.6g}"
            break
        seg_norms = np.max(np.abs(seg_x), axis=1)
        over = np.nonzero(seg_norms > cfg.blowup_threshold)[0]
        if over.size:
            cut = over[0]
            dense_t_parts.append(seg_t[: cut + 1] if k == 0 else seg_t[1 : cut + 1])
            dense_x_parts.append(seg_x[: cut + 1] if k == 0 else seg_x[1 : cut + 1])
            status = BLOW_UP
            detail = f"state norm crossed {cfg.blowup_threshold:.3g} at t={seg_t[cut]:.6g}"
            break
        dense_t_parts.append(seg_t if k == 0 else seg_t[1:])
        dense_x_parts.append(seg_x if k == 0 else seg_x[1:])

        # replicas advance with the shared loss flag
        try:
            enc = zoom_update(enc, theta, qk, flow, K, growth)
            dec = zoom_update(dec, theta, qk, flow, K, growth)
        except BlowUpError as err:
            status, detail = BLOW_UP, f"quantizer center flow diverged at t={tk + err.t_bad:.6g}"
            break
        x = tuple(float(v) for v in seg_x[-1])

    return SimTrace(
        t=np.array(rows_t),
        x=np.array(rows_x, dtype=float).reshape(len(rows_t), n),
        theta=np.array(rows_theta, dtype=int),
        symbols=rows_sym,
        q=np.array(rows_q, dtype=float).reshape(len(rows_t), n),
        xi=np.array(rows_xi, dtype=float).reshape(len(rows_t), n),
        E=np.array(rows_E, dtype=float),
        u=np.array(rows_u, dtype=float).reshape(len(rows_t), m),
        dense_t=np.concatenate(dense_t_parts) if dense_t_parts else np.zeros(0),
        dense_x=np.concatenate(dense_x_parts) if dense_x_parts else np.zeros((0, n)),
        status=status,
        status_detail=detail,
        warnings=warnings,
        growth=growth,
        M=M,
        E0=float(cfg.E0),
    )


def check_no_saturation(trace: SimTrace) -> bool:
    """Whether every recorded sample stayed inside its quantization region.

    Allows the same absolute-plus-relative slack as the encoder,
    SATURATION_SLACK*(1+E) beyond the radius, which covers integrator
    rounding once the radius shrinks toward the float noise floor of the
    tracked state.
    """
    if len(trace) == 0:
        return True
    dev = np.max(np.abs(trace.x - trace.xi), axis=1)
    return bool(np.all(dev <= trace.E + SATURATION_SLACK * (1.0 + trace.E)))


def converged(trace: SimTrace, tol: float, tail: int) -> bool:
    """Whether the last `tail` recorded samples all have norm at most tol."""
    if tol <= 0 or tail < 1:
        raise ValueError("need tol > 0 and tail >= 1")
    if len(trace) < tail:
        raise ValueError(f"trace has {len(trace)} samples, needs at least {tail}")
    norms = np.max(np.abs(trace.x[-tail:]), axis=1)
    return bool(np.all(norms <= tol))


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _open_out(path_or_file):
    if hasattr(path_or_file, "write"):
        from contextlib import nullcontext

        return nullcontext(path_or_file)
    return open(path_or_file, "w", newline="")


def write_trace_csv(trace: SimTrace, out) -> None:
    """Per-sample CSV: t,x1..xn,theta,symbol,q1..qn,xi1..xin,E,u1..um.

    Lost samples leave the symbol and q columns empty. `out` is a path or
    a writable text file.
    """
    n = trace.x.shape[1]
    m = trace.u.shape[1]
    header = (
        ["t"]
        + [f"x{i+1}" for i in range(n)]
        + ["theta", "symbol"]
        + [f"q{i+1}" for i in range(n)]
        + [f"xi{i+1}" for i in range(n)]
        + ["E"]
        + [f"u{i+1}" for i in range(m)]
    )
    with _open_out(out) as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(trace)):
            lost = trace.symbols[i] is None
            row = [_fmt(trace.t[i])]
            row += [_fmt(v) for v in trace.x[i]]
            row.append(str(int(trace.theta[i])))
            row.append("" if lost else str(int(trace.symbols[i])))
            row += ["" if lost else _fmt(v) for v in trace.q[i]]
            row += [_fmt(v) for v in trace.xi[i]]
            row.append(_fmt(trace.E[i]))
            row += [_fmt(v) for v in trace.u[i]]
            w.writerow(row)


def write_dense_csv(trace: SimTrace, out) -> None:
    """Inter-sample states at integrator resolution: t,x1..xn."""
    n = trace.dense_x.shape[1] if trace.dense_x.size else trace.x.shape[1]
    with _open_out(out) as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i+1}" for i in range(n)])
        for i in range(len(trace.dense_t)):
            w.writerow([_fmt(trace.dense_t[i])] + [_fmt(v) for v in trace.dense_x[i]])
