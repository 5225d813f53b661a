"""Finite-alphabet encoder/decoder pair with resilient zooming.

Encoder and decoder each hold a copy of the same state: a hypercube
region of radius E centered at xi, split into M bins per axis. Symbols
index the bin containing the measured state; decoding returns the bin
center, so the quantization error never exceeds E/M. After every sample
both replicas apply the same update: on a delivered packet the region
recenters on the predicted flow of the decoded point and contracts by
growth/M (zoom in); on a lost packet it recenters on the flow of its own
center with zero input and expands by the growth factor (zoom out), which
is what keeps the state inside the region through packet loss.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, SaturationError

__all__ = ["QuantizerState", "encode", "decode", "contains", "zoom_update", "SATURATION_SLACK"]

#: absolute-plus-relative slack used by the encode-time saturation check;
#: covers integrator rounding noise once the radius shrinks toward the
#: floating-point floor of the tracked state
SATURATION_SLACK = 1e-12


@dataclass(frozen=True)
class QuantizerState:
    """Shared encoder/decoder state: center xi, radius E, levels per axis M."""

    xi: tuple[float, ...]
    E: float
    M: int

    def __post_init__(self):
        object.__setattr__(self, "xi", tuple(float(v) for v in self.xi))
        object.__setattr__(self, "E", float(self.E))
        if self.E < 0:
            raise ValueError(f"radius must be nonnegative, got {self.E}")
        if self.M < 2:
            raise ValueError(f"need at least two levels per axis, got M={self.M}")
        if not all(np.isfinite(v) for v in self.xi) or not np.isfinite(self.E):
            raise ValueError("quantizer state must be finite")

    @property
    def n(self) -> int:
        return len(self.xi)

    @property
    def symbol_count(self) -> int:
        return self.M**self.n


def contains(state: QuantizerState, x: Sequence[float]) -> bool:
    """Closed-region membership: |x - xi|_inf <= E, no slack."""
    return max(abs(float(v) - c) for v, c in zip(x, state.xi)) <= state.E


def _bin_indices(state: QuantizerState, x: Sequence[float]) -> list[int]:
    # interior boundaries round up; the outer boundary folds into the last bin
    E, M = state.E, state.M
    idx = []
    for v, c in zip(x, state.xi):
        ratio = (float(v) - c + E) * M / (2.0 * E)
        if not np.isfinite(ratio):
            # subnormal E with in-slack deviation: clamp to the nearest edge
            i = M - 1 if ratio > 0 else 0
        else:
            i = int(np.floor(ratio))
        idx.append(min(max(i, 0), M - 1))
    return idx


def encode(state: QuantizerState, x: Sequence[float]) -> int:
    """Symbol of the bin containing x; axis 0 is the least significant digit.

    Raises SaturationError when x lies outside the region by more than
    SATURATION_SLACK * (1 + E); this is the failure the zooming update is
    designed to prevent.
    """
    if len(x) != state.n:
        raise DimensionError(f"state has dimension {state.n}, got {len(x)}")
    deviation = max(abs(float(v) - c) for v, c in zip(x, state.xi))
    if deviation - state.E > SATURATION_SLACK * (1.0 + state.E):
        raise SaturationError(deviation, state.E)
    if state.E == 0.0:
        return 0
    symbol = 0
    weight = 1
    for i in _bin_indices(state, x):
        symbol += i * weight
        weight *= state.M
    return symbol


def decode(state: QuantizerState, symbol: int) -> tuple[float, ...]:
    """Center of the bin addressed by the symbol; with E = 0 returns xi."""
    if not 0 <= symbol < state.symbol_count:
        raise ValueError(f"symbol {symbol} out of range [0, {state.symbol_count})")
    if state.E == 0.0:
        return state.xi
    E, M = state.E, state.M
    width = 2.0 * E / M
    digits = []
    s = int(symbol)
    for _ in range(state.n):
        digits.append(s % M)
        s //= M
    return tuple(c - E + width * (i + 0.5) for c, i in zip(state.xi, digits))


def zoom_update(
    state: QuantizerState,
    theta: int,
    q: Sequence[float] | None,
    flow: Callable[[Sequence[float], Sequence[float]], Sequence[float]],
    K: np.ndarray,
    growth: float,
) -> QuantizerState:
    """Advance the region one sampling period.

    theta = 0 (packet delivered): recenter on flow(q, K q) and contract the
    radius by growth/M. theta = 1 (packet lost): recenter on flow(xi, 0)
    and expand the radius by growth. The same call runs in the encoder and
    the decoder, which is what keeps the two replicas identical.
    """
    Km = np.atleast_2d(np.asarray(K, dtype=float))
    if theta == 0:
        if q is None:
            raise ValueError("a delivered packet requires the decoded point q")
        u = tuple(float(v) for v in Km @ np.asarray(q, dtype=float))
        xi_next = tuple(float(v) for v in flow(tuple(float(v) for v in q), u))
        E_next = growth / state.M * state.E
    elif theta == 1:
        u = (0.0,) * Km.shape[0]
        xi_next = tuple(float(v) for v in flow(state.xi, u))
        E_next = growth * state.E
    else:
        raise ValueError(f"theta must be 0 or 1, got {theta}")
    return QuantizerState(xi=xi_next, E=E_next, M=state.M)
