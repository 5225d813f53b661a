import numpy as np
import pytest

from quantdos.dos import DoSParams, DoSSchedule, generate_constrained
from quantdos.analysis import (
    build_certificate,
    check_trace_decay,
    estimate_roa,
    spot_check_decay,
    sweep_stability_region,
)
from quantdos.plant import lienard_plant
from quantdos.simloop import SimConfig, run_closed_loop

BENCH_K = np.array([[-1.81, -1.90]])
BENCH_PARAMS = DoSParams(kappa_f=2.0, rho_f=0.02, kappa_d=0.3, rho_d=0.01)


@pytest.fixture(scope="module")
def bench_cert():
    return build_certificate(lienard_plant(), BENCH_K, 0.1, 6, BENCH_PARAMS, samples=200, seed=0)


class TestSweep:
    def test_origin_cell_always_passes(self):
        rows = sweep_stability_region(0.1, 2.0, 3.0, 0.5, 8.0, [0.0], [0.0])
        assert rows[0]["passed"]

    def test_downward_closed(self):
        rf = np.linspace(0, 2.0, 12)
        rd = np.linspace(0, 0.95, 12)
        rows = sweep_stability_region(0.1, 2.0, 3.0, 0.5, 8.0, rf, rd)
        grid = {(round(r["rho_f"], 9), round(r["rho_d"], 9)): r["passed"] for r in rows}
        for (f, d), ok in grid.items():
            if ok:
                for (f2, d2), ok2 in grid.items():
                    if f2 <= f and d2 <= d:
                        assert ok2, f"pass at ({f},{d}) but fail at ({f2},{d2})"

    def test_margin_monotone_along_axes(self):
        rd = np.linspace(0, 0.9, 10)
        rows = sweep_stability_region(0.1, 1.0, 1.0, 0.5, 8.0, [0.0], rd)
        margins = [r["margin"] for r in rows]
        assert all(b > a for a, b in zip(margins, margins[1:]))


class TestRoa:
    def test_origin_converges_nominal(self):
        rows = estimate_roa(
            lienard_plant(), BENCH_K, 0.1, [[0.0, 0.0], [0.1, 0.1]],
            steps=120, tol=1e-2, tail=20, ode_step=2e-3,
        )
        assert rows[0]["converged"]
        assert rows[1]["converged"]

    def test_far_point_escapes_to_cycle(self):
        rows = estimate_roa(
            lienard_plant(), BENCH_K, 0.1, [[2.5, 0.0]],
            steps=150, tol=1e-2, tail=20, ode_step=2e-3,
        )
        assert not rows[0]["converged"]

    def test_attacked_region_inside_nominal(self):
        plant = lienard_plant()
        pts = [[a, b] for a in (-0.3, 0.0, 0.3) for b in (-0.3, 0.3)]
        sched = DoSSchedule(attacks=((0.0, 1.0),))
        nominal = estimate_roa(
            plant, BENCH_K, 0.1, pts, steps=150, tol=1e-2, tail=20, ode_step=2e-3,
        )
        attacked = estimate_roa(
            plant, BENCH_K, 0.1, pts, steps=150, tol=1e-2, tail=20,
            schedule=sched, ode_step=2e-3,
        )
        for nom, att in zip(nominal, attacked):
            if att["converged"]:
                assert nom["converged"]

    def test_blow_up_counts_as_non_converged(self):
        from quantdos.plant import linear_plant

        p = linear_plant([[2.0]], [[1.0]], rho=1e9)
        rows = estimate_roa(
            p, [[0.0]], 0.1, [[5.0]], steps=200, tol=1e-2, tail=10,
            ode_step=2e-3, blowup_threshold=1e3,
        )
        assert not rows[0]["converged"]

    def test_quantized_template_runs(self):
        rows = estimate_roa(
            lienard_plant(), BENCH_K, 0.1, [[0.1, 0.1]],
            steps=120, tol=1e-2, tail=20, M=6, quantized=True, ode_step=2e-3,
        )
        assert rows[0]["converged"]

    def test_parallel_matches_serial(self):
        pts = [[0.0, 0.0], [0.1, 0.1], [0.4, -0.2], [2.5, 0.0]]
        serial = estimate_roa(
            lienard_plant(), BENCH_K, 0.1, pts, steps=100, tol=1e-2, tail=10,
            ode_step=2e-3, workers=1,
        )
        parallel = estimate_roa(
            lienard_plant(), BENCH_K, 0.1, pts, steps=100, tol=1e-2, tail=10,
            ode_step=2e-3, workers=2,
        )
        assert serial == parallel


class TestDecayChecks:
    def test_zero_trace_passes(self, bench_cert):
        cfg = SimConfig(
            plant=lienard_plant(), K=BENCH_K, T=0.1, M=6, E0=0.0,
            x0=np.zeros(2), schedule=DoSSchedule.empty(), steps=30,
        )
        verdict = check_trace_decay(run_closed_loop(cfg), bench_cert)
        assert verdict.passed
        assert verdict.steps_excluded == 0

    def test_all_loss_trace_within_expansion_rate(self, bench_cert):
        E0 = 0.5 * bench_cert.max_initial_radius
        cfg = SimConfig(
            plant=lienard_plant(), K=BENCH_K, T=0.1, M=6, E0=E0,
            x0=np.array([E0 / 2, -E0 / 3]),
            schedule=DoSSchedule(attacks=((0.0, 10.0),)), steps=12,
        )
        trace = run_closed_loop(cfg)
        assert np.all(trace.theta == 1)
        verdict = check_trace_decay(trace, bench_cert)
        assert verdict.passed, verdict.detail

    def test_run_within_bound_satisfies_envelope(self, bench_cert):
        rng = np.random.default_rng(17)
        for seed in range(5):
            E0 = bench_cert.max_initial_radius * rng.uniform(0.2, 0.95)
            sched = generate_constrained(BENCH_PARAMS, 0.1, 16.0, "random", seed=seed)
            cfg = SimConfig(
                plant=lienard_plant(), K=BENCH_K, T=0.1, M=6, E0=E0,
                x0=rng.uniform(-E0, E0, size=2), schedule=sched,
                steps=120, params=BENCH_PARAMS, ode_step=4e-3,
            )
            trace = run_closed_loop(cfg)
            assert trace.status == "completed"
            verdict = check_trace_decay(trace, bench_cert)
            assert verdict.passed, verdict.detail
            assert verdict.steps_excluded == 0

    def test_outside_delta_steps_excluded(self, bench_cert):
        cfg = SimConfig(
            plant=lienard_plant(), K=BENCH_K, T=0.1, M=6, E0=0.15,
            x0=np.array([0.1, 0.1]), schedule=DoSSchedule.empty(), steps=20,
        )
        verdict = check_trace_decay(run_closed_loop(cfg), bench_cert)
        # E0 = 0.15 starts far above the certificate delta
        assert verdict.steps_excluded > 0

    def test_spot_check_passes_on_benchmark(self, bench_cert):
        verdict = spot_check_decay(
            bench_cert, lienard_plant(), BENCH_K, n_samples=30, seed=2, ode_step=2e-3
        )
        assert verdict.passed, verdict.detail
        assert verdict.steps_checked == 30 * 4
