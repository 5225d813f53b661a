"""Batch command-line front door.

Five subcommands (simulate, analyze, sweep, roa, dos) load one shared
JSON config, run the corresponding pipeline, and write artifacts into
the output directory next to a manifest naming them. `serve` starts the
HTTP service; passing --server to any other subcommand turns it into a
thin client that posts the same config to a running service and writes
the returned artifacts locally, byte-identical to a local run.

Exit codes are frozen: 0 success, 2 config error, 3 saturation,
4 blow-up, 5 infeasible certificate.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    build_certificate,
    estimate_roa,
    roa_rows_csv,
    sweep_rows_csv,
    sweep_stability_region,
)
from .config import (
    RootConfig,
    build_plant,
    build_schedule,
    build_sim_config,
    load_config,
    parse_grid,
    resolve_gain,
    tuning_options,
)
from .dos import generate_constrained, save_schedule_csv, verify_constraints
from .errors import ConfigError, GenerationError, InfeasibleError, TuningError
from .simloop import (
    BLOW_UP,
    COMPLETED,
    SATURATED,
    converged,
    run_closed_loop,
    write_dense_csv,
    write_trace_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SATURATED = 3
EXIT_BLOW_UP = 4
EXIT_INFEASIBLE = 5

_STATUS_EXIT = {COMPLETED: EXIT_OK, SATURATED: EXIT_SATURATED, BLOW_UP: EXIT_BLOW_UP}


def _write_manifest(out: Path, command: str, args, resolved: dict, artifacts: list[str]) -> None:
    manifest = {
        "tool": "quantdos",
        "version": __version__,
        "command": command,
        "config_path": str(args.config),
        "out_dir": str(out),
        "seed": args.seed,
        "resolved": resolved,
        "artifacts": artifacts,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _post(server: str, route: str, payload: dict) -> dict:
    import httpx

    with httpx.Client(base_url=server, timeout=600.0) as client:
        resp = client.post(route, json=payload)
        if resp.status_code != 200:
            raise ConfigError(f"service error {resp.status_code}: {resp.text}")
        return resp.json()


def _config_payload(cfg: RootConfig) -> dict:
    return cfg.model_dump(mode="json")


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(args)
    if args.server:
        payload = _config_payload(cfg)
        payload["include_trace"] = True
        payload["include_dense"] = True
        if args.seed is not None:
            payload["seed"] = args.seed
        data = _post(args.server, "/simulate", payload)
        (out / "trace.csv").write_text(data["trace_csv"])
        (out / "dense.csv").write_text(data["dense_csv"])
        summary = data["summary"]
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        _write_manifest(out, "simulate", args, {"server": args.server},
                        ["trace.csv", "dense.csv", "summary.json"])
        print(f"simulate [{summary['status']}] final_norm={summary['final_norm']:.6g}")
        return _STATUS_EXIT[summary["status"]]

    sim_cfg, _ = build_sim_config(cfg, seed=args.seed, base_dir=Path(args.config).parent)
    trace = run_closed_loop(sim_cfg)
    write_trace_csv(trace, out / "trace.csv")
    write_dense_csv(trace, out / "dense.csv")
    summary = trace.summary()
    if cfg.simulate is not None and len(trace) >= cfg.simulate.converged_tail:
        summary["converged"] = converged(
            trace, cfg.simulate.converged_tol, cfg.simulate.converged_tail
        )
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    _write_manifest(
        out, "simulate", args,
        {"T": sim_cfg.T, "M": sim_cfg.M, "E0": sim_cfg.E0, "steps": sim_cfg.steps,
         "schedule_attacks": len(sim_cfg.schedule)},
        ["trace.csv", "dense.csv", "summary.json"],
    )
    print(f"simulate [{trace.status}] final_norm={summary['final_norm']:.6g} "
          f"losses={summary['loss_count']}")
    return _STATUS_EXIT[trace.status]


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(args)
    if args.server:
        payload = _config_payload(cfg)
        if args.seed is not None:
            if payload.get("analyze") is None:
                payload["analyze"] = {}
            payload["analyze"]["seed"] = args.seed
        data = _post(args.server, "/analyze", payload)
        cert_dict = data["certificate"]
        (out / "certificate.json").write_text(json.dumps(cert_dict, indent=2) + "\n")
        _write_manifest(out, "analyze", args, {"server": args.server}, ["certificate.json"])
        print(f"analyze margin={cert_dict['stability_margin']:.6g} "
              f"passed={cert_dict['stability_passed']}")
        return EXIT_OK

    plant = build_plant(cfg.plant)
    K = resolve_gain(cfg.controller, plant, cfg.sampling.T)
    analyze = cfg.analyze
    cert = build_certificate(
        plant, K, cfg.sampling.T, cfg.sampling.M, cfg.dos.params(),
        options=tuning_options(analyze),
        samples=analyze.samples if analyze else 400,
        seed=args.seed if args.seed is not None else (analyze.seed if analyze else 0),
    )
    (out / "certificate.json").write_text(cert.to_json() + "\n")
    _write_manifest(out, "analyze", args, {"T": cfg.sampling.T, "M": cfg.sampling.M},
                    ["certificate.json"])
    bound = cert.max_initial_radius
    print(f"analyze margin={cert.stability_margin:.6g} passed={cert.stability_passed} "
          f"delta={cert.delta:.6g} max_E0={bound if bound is None else format(bound, '.6g')}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(args)
    if args.server:
        payload = _config_payload(cfg)
        if payload.get("sweep") is None:
            payload["sweep"] = {}
        if args.grid:
            payload["sweep"]["rho_f_grid"] = args.grid
            payload["sweep"]["rho_d_grid"] = args.grid
        data = _post(args.server, "/sweep", payload)
        (out / "sweep.csv").write_text(data["csv"])
        _write_manifest(out, "sweep", args, {"server": args.server}, ["sweep.csv"])
        print(f"sweep {len(data['rows'])} cells")
        return EXIT_OK

    plant = build_plant(cfg.plant)
    K = resolve_gain(cfg.controller, plant, cfg.sampling.T)
    cert = build_certificate(
        plant, K, cfg.sampling.T, cfg.sampling.M, cfg.dos.params(),
        options=tuning_options(cfg.analyze),
        samples=cfg.analyze.samples if cfg.analyze else 400,
        seed=args.seed if args.seed is not None else 0,
    )
    sweep = cfg.sweep
    rf_spec = args.grid or (sweep.rho_f_grid if sweep else "0:1:0.05")
    rd_spec = args.grid or (sweep.rho_d_grid if sweep else "0:0.95:0.05")
    rows = sweep_stability_region(
        cfg.sampling.T, cert.mu0, cert.mu1, cert.nu0, cert.nu1,
        parse_grid(rf_spec), parse_grid(rd_spec),
    )
    (out / "sweep.csv").write_text(sweep_rows_csv(rows))
    _write_manifest(out, "sweep", args, {"rho_f_grid": rf_spec, "rho_d_grid": rd_spec},
                    ["sweep.csv"])
    n_pass = sum(1 for r in rows if r["passed"])
    print(f"sweep {len(rows)} cells, {n_pass} pass")
    return EXIT_OK


def cmd_roa(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(args)
    if args.server:
        payload = _config_payload(cfg)
        if payload.get("roa") is None:
            payload["roa"] = {}
        if args.grid:
            payload["roa"]["grid"] = args.grid
        if args.seed is not None:
            payload["seed"] = args.seed
        data = _post(args.server, "/roa", payload)
        (out / "roa.csv").write_text(data["csv"])
        _write_manifest(out, "roa", args, {"server": args.server}, ["roa.csv"])
        print(f"roa {len(data['rows'])} points")
        return EXIT_OK

    plant = build_plant(cfg.plant)
    K = resolve_gain(cfg.controller, plant, cfg.sampling.T)
    roa = cfg.roa
    if roa is None:
        raise ConfigError("roa: section missing")
    grid_spec = args.grid or roa.grid
    axis = parse_grid(grid_spec)
    mesh = np.meshgrid(*([axis] * plant.n), indexing="ij")
    points = [list(p) for p in np.stack(mesh, axis=-1).reshape(-1, plant.n)]
    schedule = None
    if roa.use_dos:
        horizon = (roa.steps + 1) * cfg.sampling.T
        schedule = build_schedule(
            cfg.dos, cfg.sampling.T, horizon, seed=args.seed,
            base_dir=Path(args.config).parent,
        )
    rows = estimate_roa(
        plant, K, cfg.sampling.T, points, steps=roa.steps, tol=roa.tol, tail=roa.tail,
        M=cfg.sampling.M, quantized=roa.quantized, schedule=schedule,
        ode_step=cfg.sampling.ode_step, workers=roa.workers,
    )
    (out / "roa.csv").write_text(roa_rows_csv(rows))
    _write_manifest(out, "roa", args, {"grid": grid_spec, "points": len(points),
                    "quantized": roa.quantized, "use_dos": roa.use_dos}, ["roa.csv"])
    n_conv = sum(1 for r in rows if r["converged"])
    print(f"roa {len(rows)} points, {n_conv} converged")
    return EXIT_OK


def cmd_dos(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(args)
    horizon = args.horizon
    if args.server:
        payload = {
            "dos": cfg.dos.model_dump(mode="json"),
            "sampling": cfg.sampling.model_dump(mode="json"),
            "horizon": horizon,
        }
        if args.dos_command == "verify":
            data = _post(args.server, "/dos/verify", payload)
            (out / "verdict.json").write_text(json.dumps(data, indent=2) + "\n")
            _write_manifest(out, "dos verify", args, {"server": args.server}, ["verdict.json"])
            print(f"dos verify {'PASS' if data['passed'] else 'FAIL: ' + data['detail']}")
            return EXIT_OK
        payload["strategy"] = args.strategy
        payload["seed"] = args.seed
        data = _post(args.server, "/dos/generate", payload)
        (out / "schedule.csv").write_text(data["csv"])
        _write_manifest(out, "dos generate", args, {"server": args.server}, ["schedule.csv"])
        print(f"dos generate {len(data['attacks'])} attacks -> schedule.csv")
        return EXIT_OK
    if args.dos_command == "verify":
        schedule = build_schedule(
            cfg.dos, cfg.sampling.T, horizon, seed=args.seed,
            base_dir=Path(args.config).parent,
        )
        verdict = verify_constraints(schedule, cfg.dos.params(), horizon)
        payload = {
            "passed": verdict.passed,
            "horizon": verdict.horizon,
            "violation_time": verdict.violation_time,
            "assumption": verdict.assumption,
            "detail": verdict.detail,
        }
        (out / "verdict.json").write_text(json.dumps(payload, indent=2) + "\n")
        _write_manifest(out, "dos verify", args, {"horizon": horizon}, ["verdict.json"])
        print(f"dos verify {'PASS' if verdict.passed else 'FAIL: ' + verdict.detail}")
        return EXIT_OK
    # generate
    strategy = args.strategy or cfg.dos.schedule.strategy
    seed = args.seed if args.seed is not None else cfg.dos.schedule.seed
    schedule = generate_constrained(cfg.dos.params(), cfg.sampling.T, horizon, strategy, seed)
    save_schedule_csv(schedule, out / "schedule.csv")
    _write_manifest(out, "dos generate", args,
                    {"strategy": strategy, "seed": seed, "horizon": horizon},
                    ["schedule.csv"])
    print(f"dos generate {len(schedule)} attacks -> schedule.csv")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quantdos",
        description="Simulate and certify quantized networked control under packet-loss attacks",
    )
    parser.add_argument("--version", action="version", version=f"quantdos {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, grid=False, strategy=False):
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, default=None, help="override config seeds")
        p.add_argument("--server", default=None,
                       help="base URL of a running service; run there instead of locally")
        if grid:
            p.add_argument(
                "--grid", default=None,
                help='axis grid as "a:b:step"; use --grid=-1:1:0.5 for negative starts',
            )
        if strategy:
            p.add_argument("--strategy", default=None,
                           choices=["periodic", "front_loaded", "random"])

    common(sub.add_parser("simulate", help="run one closed loop, write trace/summary"))
    common(sub.add_parser("analyze", help="compute the stability certificate"))
    common(sub.add_parser("sweep", help="margin verdicts over an attack-rate grid"), grid=True)
    common(sub.add_parser("roa", help="convergence verdicts over an initial-state grid"), grid=True)

    dos = sub.add_parser("dos", help="verify or generate attack schedules")
    dos_sub = dos.add_subparsers(dest="dos_command", required=True)
    for name in ("verify", "generate"):
        p = dos_sub.add_parser(name)
        common(p, strategy=(name == "generate"))
        p.add_argument("--horizon", type=float, default=30.0, help="budget horizon in time units")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "roa": cmd_roa,
    "dos": cmd_dos,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (TuningError, InfeasibleError) as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except GenerationError as err:
        print(f"generation error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
