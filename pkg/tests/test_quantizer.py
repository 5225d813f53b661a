import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantdos.errors import SaturationError
from quantdos.plant import lienard_plant, linear_plant
from quantdos.quantizer import QuantizerState, contains, decode, encode, zoom_update


def brute_force_symbol(state, x):
    """Independent oracle: scan every cell and return the one containing x.

    Ties on interior boundaries go to the higher-index cell, mirroring the
    documented tie-break, so the oracle enumerates cells as half-open
    [lo, hi) except the last per axis.
    """
    E, M, n = state.E, state.M, state.n
    width = 2 * E / M
    idx = []
    for v, c in zip(x, state.xi):
        found = None
        for i in range(M):
            lo = c - E + i * width
            hi = c - E + (i + 1) * width
            if (v >= lo and v < hi) or (i == M - 1 and v >= lo and v <= hi + 1e-15):
                found = i
                break
        assert found is not None
        idx.append(found)
    return sum(i * M**j for j, i in enumerate(idx))


class TestEncode:
    def test_scalar_two_levels(self):
        s = QuantizerState(xi=(0.0,), E=1.0, M=2)
        assert encode(s, [0.3]) == brute_force_symbol(s, [0.3]) == 1
        assert encode(s, [-0.3]) == 0

    def test_center_cell_error_bound(self):
        s = QuantizerState(xi=(0.4, -0.7), E=0.9, M=5)
        sym = encode(s, s.xi)
        q = decode(s, sym)
        assert max(abs(a - b) for a, b in zip(q, s.xi)) <= s.E / s.M

    def test_two_dim_enumerated(self):
        s = QuantizerState(xi=(0.0, 0.0), E=1.0, M=2)
        # cells: (i1, i2) -> symbol i1 + 2*i2
        assert encode(s, [-0.5, 0.5]) == 2
        assert encode(s, [0.5, 0.5]) == 3
        assert encode(s, [-0.5, -0.5]) == 0
        assert encode(s, [0.5, -0.5]) == 1

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(12)
        s = QuantizerState(xi=(0.1, -0.2, 0.05), E=0.7, M=3)
        for _ in range(300):
            x = np.array(s.xi) + rng.uniform(-s.E, s.E, size=3)
            assert encode(s, x) == brute_force_symbol(s, x)

    def test_saturation_raises(self):
        s = QuantizerState(xi=(0.0,), E=1.0, M=4)
        with pytest.raises(SaturationError):
            encode(s, [1.1])

    def test_boundary_within_slack_clamps(self):
        s = QuantizerState(xi=(0.0,), E=1.0, M=4)
        # just outside, but inside the documented slack: folds into last bin
        assert encode(s, [1.0 + 1e-13]) == 3

    def test_zero_radius_symbol_zero(self):
        s = QuantizerState(xi=(0.2, 0.3), E=0.0, M=6)
        assert encode(s, [0.2, 0.3]) == 0


class TestDecode:
    def test_scalar_cell_center(self):
        s = QuantizerState(xi=(0.0,), E=1.0, M=2)
        assert decode(s, 1) == (0.5,)
        assert decode(s, 0) == (-0.5,)

    def test_zero_radius_returns_center(self):
        s = QuantizerState(xi=(0.7, -0.1), E=0.0, M=6)
        assert decode(s, 0) == (0.7, -0.1)

    def test_out_of_range_symbol(self):
        s = QuantizerState(xi=(0.0, 0.0), E=1.0, M=3)
        with pytest.raises(ValueError):
            decode(s, 9)

    def test_round_trip_error_bound_bulk(self):
        rng = np.random.default_rng(77)
        s = QuantizerState(xi=(0.3, -0.6), E=1.3, M=6)
        for _ in range(10_000):
            x = np.array(s.xi) + rng.uniform(-s.E, s.E, size=2)
            q = decode(s, encode(s, x))
            assert max(abs(a - b) for a, b in zip(x, q)) <= s.E / s.M

    def test_encode_decode_idempotent_on_centers(self):
        s = QuantizerState(xi=(0.2, -0.4), E=0.9, M=4)
        for sym in range(s.symbol_count):
            assert encode(s, decode(s, sym)) == sym

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(-5, 5),
        st.floats(1e-6, 10),
        st.integers(2, 9),
        st.floats(-1, 1),
    )
    def test_round_trip_property(self, center, E, M, frac):
        s = QuantizerState(xi=(center,), E=E, M=M)
        x = (center + frac * E,)
        q = decode(s, encode(s, x))
        # E/M plus a few ulps of the center magnitude: the bin arithmetic
        # rounds at eps(|xi| + E), which dominates when E << |xi|
        slack = 8 * np.finfo(float).eps * (1.0 + abs(center) + E)
        assert abs(q[0] - x[0]) <= E / M + slack


class TestContains:
    def test_center(self):
        s = QuantizerState(xi=(0.0,), E=1.0, M=2)
        assert contains(s, [0.0])

    def test_closed_boundary(self):
        s = QuantizerState(xi=(0.0,), E=1.0, M=2)
        assert contains(s, [1.0])

    def test_just_outside(self):
        s = QuantizerState(xi=(0.0,), E=1.0, M=2)
        assert not contains(s, [1.0 + 1e-6])


class TestZoomUpdate:
    def test_loss_expands_radius(self):
        s = QuantizerState(xi=(0.0, 0.0), E=1.0, M=6)

        def flow(x, u):
            return x  # identity flow isolates the radius arithmetic

        out = zoom_update(s, 1, None, flow, np.array([[-1.81, -1.90]]), math.e)
        assert abs(out.E - math.e) < 1e-15

    def test_delivery_contracts_radius(self):
        s = QuantizerState(xi=(0.0, 0.0), E=1.0, M=6)

        def flow(x, u):
            return x

        out = zoom_update(s, 0, (0.1, 0.1), flow, np.array([[-1.81, -1.90]]), math.e)
        assert abs(out.E - math.e / 6.0) < 1e-15
        assert out.E < 1.0

    def test_origin_fixed_point(self):
        from quantdos.numerics import rk4_endpoint

        p = linear_plant([[0.5, 0.0], [0.0, 0.5]], [[1.0], [1.0]])

        def flow(x, u):
            return rk4_endpoint(lambda y: p.f(y, u), x, 0.1, 1e-2)

        s = QuantizerState(xi=(0.0, 0.0), E=0.0, M=6)
        out = zoom_update(s, 0, (0.0, 0.0), flow, np.array([[0.0, 0.0]]), 1.5)
        assert out.xi == (0.0, 0.0)
        assert out.E == 0.0

    def test_delivery_requires_decoded_point(self):
        s = QuantizerState(xi=(0.0,), E=1.0, M=2)
        with pytest.raises(ValueError):
            zoom_update(s, 0, None, lambda x, u: x, np.array([[1.0]]), 1.5)

    def test_replica_synchrony_bitwise(self):
        # two replicas driven by the same symbol/theta stream stay identical
        rng = np.random.default_rng(5)
        p = lienard_plant()
        K = np.array([[-1.81, -1.90]])
        growth = math.exp(p.L * 0.1)

        def flow(x, u):
            from quantdos.numerics import rk4_endpoint

            f = p.f
            return rk4_endpoint(lambda y: f(y, u), x, 0.1, 1e-3)

        enc = QuantizerState(xi=(0.0, 0.0), E=0.15, M=6)
        dec = QuantizerState(xi=(0.0, 0.0), E=0.15, M=6)
        x = np.array([0.1, 0.1])
        for _ in range(20):
            theta = int(rng.uniform() < 0.3)
            if theta == 0:
                sym = encode(enc, x)
                q_enc = decode(enc, sym)
                q_dec = decode(dec, sym)
                assert q_enc == q_dec
                enc = zoom_update(enc, 0, q_enc, flow, K, growth)
                dec = zoom_update(dec, 0, q_dec, flow, K, growth)
                u = tuple(K @ np.array(q_dec))
            else:
                enc = zoom_update(enc, 1, None, flow, K, growth)
                dec = zoom_update(dec, 1, None, flow, K, growth)
                u = (0.0,)
            assert enc == dec
            x = np.array(flow(tuple(x), u))

    def test_radius_recursion_multiplicative(self):
        rng = np.random.default_rng(8)
        M, growth, E0 = 6, math.e, 0.15
        s = QuantizerState(xi=(0.0,), E=E0, M=M)

        def flow(x, u):
            return x

        losses = 0
        for k in range(1, 60):
            theta = int(rng.uniform() < 0.4)
            losses += theta
            s = zoom_update(s, theta, (0.0,) if theta == 0 else None, flow, np.array([[0.0]]), growth)
            expected = growth**losses * (growth / M) ** (k - losses) * E0
            assert abs(s.E - expected) <= 1e-12 * expected


class TestSubnormalRadius:
    def test_encode_survives_subnormal_radius(self):
        # a radius at the bottom of the float range with an in-slack
        # deviation must clamp, not overflow
        s = QuantizerState(xi=(1.0,), E=1e-322, M=6)
        sym = encode(s, [1.0 + 1e-13])
        assert sym == 5
        q = decode(s, sym)
        assert np.isfinite(q[0])
