import math

import numpy as np
import pytest

from quantdos.dos import DoSParams
from quantdos.errors import InfeasibleError, TuningError
from quantdos.analysis import (
    TuningOptions,
    build_certificate,
    check_stability_condition,
    choose_tuning,
    compute_alpha_beta,
    compute_c_constants,
    compute_gamma_constants,
    compute_lambda,
    compute_mu,
    compute_nu,
    compute_omega,
    data_rate,
    estimate_d,
    estimate_delta,
    max_E0,
    solve_mode_lyapunov,
)
from quantdos.numerics import discretize
from quantdos.plant import PlantModel, lienard_plant, linear_plant, linearize

BENCH_K = np.array([[-1.81, -1.90]])
BENCH_PARAMS = DoSParams(kappa_f=2.0, rho_f=0.02, kappa_d=0.3, rho_d=0.01)


class TestLambda:
    def test_zero_lipschitz(self):
        assert compute_lambda(0.0, 0.3) == 1.0

    def test_benchmark_value(self):
        g = compute_lambda(10.0, 0.1)
        assert abs(g - math.e) < 1e-12
        assert g / 6 < 1.0  # six levels beat the growth factor

    def test_rate(self):
        assert abs(data_rate(2, 6, 0.1) - 2 * math.log2(6) / 0.1) < 1e-12


class TestCConstants:
    def test_zero_gain_collapses_bracket(self):
        A = np.array([[0.5, 0.1], [0.0, -0.2]])
        c0, c1 = compute_c_constants(A, np.array([[1.0], [0.0]]), np.zeros((1, 2)), 0.2)
        expected = math.exp(0.2 * (0.6 + 1.0))
        assert abs(c0 - expected) < 1e-12
        assert abs(c1 - expected) < 1e-12

    def test_scalar_hand_value(self):
        c0, c1 = compute_c_constants([[0.0]], [[1.0]], [[1.0]], 1.0)
        assert abs(c0 - 3.0 * math.e) < 1e-12
        assert abs(c1 - math.e) < 1e-12

    def test_c0_dominates_c1(self):
        A, B = linearize(lienard_plant())
        c0, c1 = compute_c_constants(A, B, BENCH_K, 0.1)
        assert c0 >= c1


class TestGammaConstants:
    def test_linear_in_gamma(self):
        A, B = linearize(lienard_plant())
        c0, c1 = compute_c_constants(A, B, BENCH_K, 0.1)
        g0a, g1a = compute_gamma_constants(1e-3, c0, BENCH_K, A, 0.1, c1)
        g0b, g1b = compute_gamma_constants(2e-3, c0, BENCH_K, A, 0.1, c1)
        assert abs(g0b / g0a - 2.0) < 1e-12
        assert abs(g1b / g1a - 2.0) < 1e-12

    def test_hand_value(self):
        # gamma=1, c0=3e, |K|=1, T=1, |A|=0 -> gamma0 = 3e + 1
        g0, g1 = compute_gamma_constants(1.0, 3.0 * math.e, [[1.0]], [[0.0]], 1.0, math.e)
        assert abs(g0 - (3.0 * math.e + 1.0)) < 1e-12
        assert abs(g1 - math.e) < 1e-12


class TestModeLyapunov:
    def test_scalar_hand_solution(self):
        # closed loop 0.5 at phi0=0.5: P0 = 1/(1-0.5) = 2
        P0, P1 = solve_mode_lyapunov([[0.0]], [[1.0]], [[0.5]], 0.5, 1.21)
        assert abs(P0[0, 0] - 2.0) < 1e-9
        # check the strict mode inequality by hand: 0.25*2 - 0.5*2 = -0.5
        assert 0.25 * P0[0, 0] - 0.5 * P0[0, 0] < 0

    def test_marginally_unstable_open_loop(self):
        # A = 1 with phi1 = 1.21: P1 = 1/(1 - 1/1.21)
        P0, P1 = solve_mode_lyapunov([[1.0]], [[1.0]], [[-0.5]], 0.5, 1.21)
        assert abs(P1[0, 0] - 1.0 / (1.0 - 1.0 / 1.21)) < 1e-9

    def test_infeasible_phi0_names_mode(self):
        with pytest.raises(InfeasibleError, match="feedback mode"):
            solve_mode_lyapunov([[0.0]], [[1.0]], [[0.9]], 0.5, 1.21)

    def test_residuals_strictly_negative(self):
        A, B = linearize(lienard_plant())
        Ad, Bd = discretize(A, B, 0.1)
        P0, P1 = solve_mode_lyapunov(Ad, Bd, BENCH_K, 0.925, 1.3)
        closed = Ad + Bd @ BENCH_K
        r0 = closed.T @ P0 @ closed - 0.925 * P0
        r1 = Ad.T @ P1 @ Ad - 1.3 * P1
        assert np.max(np.linalg.eigvalsh(r0)) <= -1e-9
        assert np.max(np.linalg.eigvalsh(r1)) <= -1e-9


class TestAlphaBetaMu:
    def test_identity_case(self):
        alpha, beta = compute_alpha_beta(np.eye(2), np.eye(2), 1.0, 1.0, 2)
        assert alpha == 0.5
        assert beta == 2.0

    def test_eta_dominates_min(self):
        alpha, _ = compute_alpha_beta(2 * np.eye(2), 3 * np.eye(2), 10.0, 10.0, 2)
        assert alpha == 1.0  # half of min eigenvalue 2

    def test_alpha_not_above_beta_random(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            Q = rng.uniform(-1, 1, size=(3, 3))
            P0 = Q @ Q.T + 0.1 * np.eye(3)
            P1 = P0 + rng.uniform(0, 1) * np.eye(3)
            e0, e1 = rng.uniform(0.1, 10, size=2)
            alpha, beta = compute_alpha_beta(P0, P1, e0, e1, 3)
            assert alpha <= beta

    def test_mu_identity(self):
        mu0, mu1 = compute_mu(np.eye(3), np.eye(3), 2.0, 2.0)
        assert mu0 == 1.0 and mu1 == 1.0

    def test_mu_condition_number(self):
        P = np.diag([1.0, 4.0])
        mu0, mu1 = compute_mu(P, P, 1.0, 1.0)
        assert mu0 == 4.0 and mu1 == 4.0

    def test_mu_product_at_least_one(self):
        rng = np.random.default_rng(13)
        for _ in range(30):
            Q = rng.uniform(-1, 1, size=(2, 2))
            P0 = Q @ Q.T + 0.2 * np.eye(2)
            Q = rng.uniform(-1, 1, size=(2, 2))
            P1 = Q @ Q.T + 0.2 * np.eye(2)
            e0, e1 = rng.uniform(0.1, 10, size=2)
            mu0, mu1 = compute_mu(P0, P1, e0, e1)
            assert mu0 * mu1 >= 1.0 - 1e-12


class TestNu:
    def test_benchmark_values(self):
        nu0, nu1 = compute_nu(0.5, 1.2, math.e, 6)
        assert abs(nu0 - 0.5) < 1e-12  # e^2/36 = 0.205 below phi0
        assert abs(nu1 - math.e**2) < 1e-12

    def test_large_rate_recovers_phi(self):
        nu0, _ = compute_nu(0.5, 1.2, math.e, 10_000)
        assert nu0 == 0.5


class TestOmega:
    def test_scalar_worked_case(self):
        # P0=2, closed loop 0.5, phi0=0.5, gamma0=0.01, eps=10:
        # phi0_hat = 0.5 + (2*0.01*1 + 0.0001*2)/2 = 0.5101
        # phi0_tilde = phi0_hat + 2/(10*2) = 0.6101, vartheta = 11*2 = 22
        om = compute_omega(
            0.5, 1.2, 0.01, 0.02, np.array([[2.0]]), np.array([[1.0]]),
            np.zeros((1, 1)), np.array([[0.5]]), np.array([[0.0]]),
            1.0, 1.0, 10.0, math.e, 6,
        )
        assert abs(om.phi0_hat - 0.5101) < 1e-12
        assert abs(om.phi0_tilde - 0.6101) < 1e-12
        assert abs(om.vartheta - 22.0) < 1e-12
        # phi1_hat = 1.2 + (2*0.02*0.5 + 0.0004)/1
        assert abs(om.phi1_hat - 1.2204) < 1e-12
        assert om.omega1 >= math.e**2

    def test_vanishing_gamma_large_eps_recover_nu(self):
        A, B = linearize(lienard_plant())
        Ad, Bd = discretize(A, B, 0.1)
        growth = math.e
        P0, P1 = solve_mode_lyapunov(Ad, Bd, BENCH_K, 0.925, 1.3)
        # the limit needs eps -> inf and eta0 growing faster than eps*|P0|
        om = compute_omega(
            0.925, 1.3, 0.0, 0.0, P0, P1, BENCH_K, Ad, Bd,
            1e20, 1.0, 1e8, growth, 6,
        )
        nu0, nu1 = compute_nu(0.925, 1.3, growth, 6)
        assert abs(om.omega0 - nu0) < 1e-6
        assert abs(om.omega1 - nu1) < 1e-9

    def test_omega1_floor(self):
        om = compute_omega(
            0.5, 1.2, 0.01, 0.02, np.array([[2.0]]), np.array([[1.0]]),
            np.zeros((1, 1)), np.array([[0.5]]), np.array([[0.0]]),
            1.0, 1.0, 10.0, math.e, 6,
        )
        assert om.omega1 >= math.e**2 > 1.0

    def test_large_remainder_gain_rejected(self):
        with pytest.raises(InfeasibleError, match="gamma"):
            compute_omega(
                0.9, 1.2, 10.0, 0.02, np.array([[2.0]]), np.array([[1.0]]),
                np.zeros((1, 1)), np.array([[0.5]]), np.array([[0.0]]),
                1.0, 1.0, 10.0, math.e, 6,
            )


class TestStabilityCondition:
    def test_no_attacks_passes(self):
        v = check_stability_condition(DoSParams(), 0.1, 1.0, 1.0, 0.5, 8.0)
        assert v.passed
        assert abs(v.margin - math.log(0.5)) < 1e-12

    def test_hand_boundary_quarter(self):
        # mu0 mu1 = 1, nu0 = 0.5, nu1 = 8, rho_f = 0: boundary at rho_d = 1/4
        for rho_d, expect in ((0.2499, True), (0.2501, False)):
            v = check_stability_condition(
                DoSParams(rho_d=rho_d), 1.0, 1.0, 1.0, 0.5, 8.0
            )
            assert v.passed is expect

    def test_bisection_boundary_precise(self):
        def margin(rd):
            return check_stability_condition(
                DoSParams(rho_d=rd), 1.0, 1.0, 1.0, 0.5, 8.0
            ).margin

        lo, hi = 0.0, 0.9
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if margin(mid) < 0:
                lo = mid
            else:
                hi = mid
        assert abs(0.5 * (lo + hi) - 0.25) < 1e-12

    def test_monotone_in_rates(self):
        base = check_stability_condition(
            DoSParams(rho_f=0.1, rho_d=0.1), 0.1, 2.0, 3.0, 0.5, 8.0
        ).margin
        up_f = check_stability_condition(
            DoSParams(rho_f=0.2, rho_d=0.1), 0.1, 2.0, 3.0, 0.5, 8.0
        ).margin
        up_d = check_stability_condition(
            DoSParams(rho_f=0.1, rho_d=0.2), 0.1, 2.0, 3.0, 0.5, 8.0
        ).margin
        assert up_f > base and up_d > base

    def test_degenerate_loss_rate_flagged(self):
        v = check_stability_condition(
            DoSParams(rho_f=9.99, rho_d=0.5), 0.1, 1.0, 1.0, 0.5, 8.0
        )
        assert not v.passed
        assert "rho_d_star" in v.reason


class TestMaxE0:
    def test_zero_kappas_give_delta_star(self):
        p = DoSParams(rho_f=0.1, rho_d=0.05)
        bound = max_E0(0.01, 0.5, 2.0, 3.0, 4.0, 0.9, 8.0, p, 0.1)
        assert abs(bound - 0.01 * math.sqrt(0.25)) < 1e-15

    def test_decreasing_in_kappas(self):
        base = max_E0(0.01, 0.5, 2.0, 3.0, 4.0, 0.9, 8.0, DoSParams(), 0.1)
        more_f = max_E0(
            0.01, 0.5, 2.0, 3.0, 4.0, 0.9, 8.0, DoSParams(kappa_f=1.0), 0.1
        )
        more_d = max_E0(
            0.01, 0.5, 2.0, 3.0, 4.0, 0.9, 8.0, DoSParams(kappa_d=0.5), 0.1
        )
        assert more_f < base and more_d < base

    def test_never_above_delta_star(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            delta = rng.uniform(1e-6, 1e-2)
            alpha = rng.uniform(0.01, 1.0)
            beta = alpha * rng.uniform(1.0, 100.0)
            p = DoSParams(
                kappa_f=rng.uniform(0, 3),
                rho_f=rng.uniform(0, 1),
                kappa_d=rng.uniform(0, 2),
                rho_d=rng.uniform(0, 0.9),
            )
            bound = max_E0(delta, alpha, beta, 2.0, 3.0, 0.9, 8.0, p, 0.1)
            assert 0 < bound <= delta * math.sqrt(alpha / beta) + 1e-18


class TestRadiusEstimates:
    def test_linear_plant_bound_vacuous(self):
        p = linear_plant([[0.2, 0.1], [0.0, -0.1]], [[1.0], [0.0]], rho=2.0)
        A, B = linearize(p)
        c0, _ = compute_c_constants(A, B, np.zeros((1, 2)), 0.1)
        est = estimate_d(p, np.zeros((1, 2)), 0.1, c0, samples=200, seed=0)
        # every grid radius passes, so the raw radius is the region radius
        assert est.grid_radius_passed == 2.0
        assert abs(est.d - 0.5 * 2.0 / est.scale) < 1e-15

    def test_scalar_cubic_hand_radius(self):
        # dx = x + x^3: |g| <= |x| holds exactly for |x| <= 1
        p = PlantModel(n=1, m=1, f=lambda x, u: (x[0] + x[0] ** 3,), L=4.0, rho=2.0)
        c0, _ = compute_c_constants([[1.0]], [[0.0]], [[0.0]], 0.1)
        est = estimate_d(p, [[0.0]], 0.1, c0, samples=400, seed=1)
        assert 0.5 <= est.grid_radius_passed <= 1.0  # within one grid factor of 1
        assert abs(est.d - 0.5 * est.grid_radius_passed / est.scale) < 1e-15

    def test_denser_sampling_never_grows_estimate(self):
        p = lienard_plant()
        A, B = linearize(p)
        c0, _ = compute_c_constants(A, B, BENCH_K, 0.1)
        sparse = estimate_d(p, BENCH_K, 0.1, c0, samples=100, seed=5, A=A, B=B)
        dense = estimate_d(p, BENCH_K, 0.1, c0, samples=800, seed=5, A=A, B=B)
        assert dense.d <= sparse.d

    def test_delta_linear_plant_equals_d(self):
        p = linear_plant([[0.2]], [[1.0]], rho=3.0)
        c0, _ = compute_c_constants([[0.2]], [[1.0]], [[0.0]], 0.1)
        d = estimate_d(p, [[0.0]], 0.1, c0, samples=200, seed=0).d
        est = estimate_delta(p, [[0.0]], 1e-3, d, c0, samples=200, seed=0)
        assert est.delta == d

    def test_delta_scalar_cubic_matches_sqrt_gamma(self):
        # |x^3| <= gamma |x| holds for |x| <= sqrt(gamma) = 0.1
        p = PlantModel(n=1, m=1, f=lambda x, u: (x[0] + x[0] ** 3,), L=4.0, rho=2.0)
        c0, _ = compute_c_constants([[1.0]], [[0.0]], [[0.0]], 0.1)
        est = estimate_delta(p, [[0.0]], 0.01, 10.0, c0, samples=500, seed=2)
        assert 0.05 <= est.grid_radius_passed <= 0.1

    def test_delta_never_exceeds_d(self):
        p = lienard_plant()
        A, B = linearize(p)
        c0, _ = compute_c_constants(A, B, BENCH_K, 0.1)
        d = estimate_d(p, BENCH_K, 0.1, c0, samples=200, seed=0, A=A, B=B).d
        for gamma in (1e-4, 1e-3, 1e-2, 1e-1):
            est = estimate_delta(p, BENCH_K, gamma, d, c0, samples=200, seed=0, A=A, B=B)
            assert est.delta <= d


class TestTuningAndCertificate:
    def test_infeasible_range_raises(self):
        A, B = linearize(lienard_plant())
        Ad, Bd = discretize(A, B, 0.1)
        opts = TuningOptions(phi0_grid=(0.3, 0.5), phi1_grid=(1.2,))
        with pytest.raises(TuningError):
            # closed-loop spectral radius squared is ~0.905, above the grid
            choose_tuning(A, B, Ad, Bd, BENCH_K, 0.1, math.e, 6, BENCH_PARAMS, opts)

    def test_benchmark_certificate_consistent(self):
        cert = build_certificate(
            lienard_plant(), BENCH_K, 0.1, 6, BENCH_PARAMS, samples=200, seed=0
        )
        assert cert.validate() == []
        assert cert.stability_passed
        assert cert.nu0 <= cert.omega0 < 1.0
        assert cert.nu1 <= cert.omega1
        assert 0 < cert.delta <= cert.d < lienard_plant().rho
        assert cert.max_initial_radius is not None
        assert 0 < cert.max_initial_radius <= cert.delta_star

    def test_heavy_attacks_fail_verdict(self):
        cert = build_certificate(
            lienard_plant(),
            BENCH_K,
            0.1,
            6,
            DoSParams(kappa_f=1.0, rho_f=0.3, kappa_d=0.5, rho_d=0.3),
            samples=200,
            seed=0,
        )
        assert not cert.stability_passed
        assert cert.max_initial_radius is None

    def test_json_round_trip(self):
        from quantdos.analysis import StabilityCertificate
        import json

        cert = build_certificate(
            lienard_plant(), BENCH_K, 0.1, 6, BENCH_PARAMS, samples=200, seed=0
        )
        data = json.loads(cert.to_json())
        back = StabilityCertificate.from_dict(data)
        assert back.validate() == []
        assert back.stability_margin == cert.stability_margin
        assert np.array_equal(back.P0, cert.P0)
