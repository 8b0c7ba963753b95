"""Command line: basis, simulate, solve, verify, crosscheck, suite.

Every subcommand reads an experiment config (see :mod:`levylab.config`);
``--seed``, ``--paths``, ``--steps``, ``--penalization`` and ``--out``
override the corresponding config values.  Outputs are CSV files with
documented header rows; exit code 0 means every gated check passed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config, with_overrides
from .errors import LevyLabError
from .paths import simulate_ensemble
from .solver import SolverConfig
from .suites import (
    SuiteReport,
    crosscheck_run,
    run_suite,
    solve_outer_samples,
    _SUITES,
)
from .teugels import basis_for


def _out_dir(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.out_dir or "out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


def _cmd_basis(cfg: ExperimentConfig) -> int:
    spec = cfg.build_levy()
    basis = basis_for(spec)
    lines = [f"# rank={basis.rank} requested_m={basis.requested_m} "
             f"degenerate_from={basis.degenerate_from}"]
    lines.append("i,k,c_ik")
    for i in range(basis.requested_m):
        for k in range(i + 1):
            lines.append(f"{i + 1},{k + 1},{basis.coeffs[i, k]:.17g}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if cfg.out_dir is not None:
        _write(_out_dir(cfg) / "basis.csv", text)
    return 0


def _cmd_simulate(cfg: ExperimentConfig) -> int:
    spec = cfg.build_levy()
    basis = basis_for(spec)
    n_paths = min(cfg.n_paths, 64)
    ens = simulate_ensemble(
        spec, cfg.grid, basis, n_paths, cfg.seed,
        theta=cfg.theta, x0=cfg.x0, sigma_x=cfg.build_sigma_x(), a_mode=cfg.a_mode,
    )
    out = _out_dir(cfg)
    t = cfg.grid.nodes
    lines = ["path,node,t,B,L,X,eta_abs,A"]
    for p in range(n_paths):
        for k in range(cfg.grid.n_steps + 1):
            lines.append(
                f"{p},{k},{t[k]:.12g},{ens.B[k]:.12g},{ens.L[p, k]:.12g},"
                f"{ens.X[p, k]:.12g},{ens.eta_abs[p, k]:.12g},{ens.A[p, k]:.12g}"
            )
    _write(out / "paths.csv", "\n".join(lines) + "\n")
    lines = ["path,step,jump_size"]
    for p in range(n_paths):
        for step, size in ens.bundle(p).jump_record:
            lines.append(f"{p},{step},{size:.12g}")
    _write(out / "jumps.csv", "\n".join(lines) + "\n")
    lines = ["path,step,component,dH"]
    for p in range(n_paths):
        for k in range(cfg.grid.n_steps):
            for i in range(ens.dH.shape[2]):
                lines.append(f"{p},{k},{i + 1},{ens.dH[p, k, i]:.12g}")
    _write(out / "teugels.csv", "\n".join(lines) + "\n")
    return 0


def _solve_rows(cfg: ExperimentConfig, penalization):
    problem = cfg.build_problem()
    spec = cfg.build_levy()
    config = SolverConfig(
        n_paths=cfg.n_paths,
        penalization=penalization,
        degree=cfg.degree,
        boundary_layer=cfg.boundary_layer,
        outer_b_samples=cfg.outer_b_samples,
        master_seed=cfg.seed,
    )
    sols, y0, se = solve_outer_samples(
        problem, spec, cfg.grid, config, x0=cfg.x0, sigma_x=cfg.build_sigma_x(),
        a_mode=cfg.a_mode,
    )
    k_t = float(np.mean([np.mean(s.K[:, -1]) for s in sols]))
    resid = float(np.mean([s.skorokhod_residual for s in sols]))
    pen_norm = float(np.mean([s.penetration_norm for s in sols]))
    label = "projection" if penalization is None else f"{penalization:g}"
    row = f"{label},{y0:.12g},{se:.12g},{k_t:.12g},{resid:.12g},{pen_norm:.12g}"
    return row, sols[0]


def _trajectory_csv(cfg: ExperimentConfig, sol, max_paths: int = 64) -> str:
    t = cfg.grid.nodes
    m = sol.Z.shape[2]
    header = "path,node,t,Y,K" + "".join(f",Z{i + 1}" for i in range(m))
    lines = [header]
    for p in range(min(sol.Y.shape[0], max_paths)):
        for k in range(sol.Y.shape[1]):
            z = "".join(f",{sol.Z[p, k, i]:.12g}" for i in range(m))
            lines.append(f"{p},{k},{t[k]:.12g},{sol.Y[p, k]:.12g},{sol.K[p, k]:.12g}{z}")
    return "\n".join(lines) + "\n"


def _cmd_solve(cfg: ExperimentConfig, schedule: bool, trajectories: bool) -> int:
    lines = ["penalization,y0_mean,y0_se,k_t_mean,skorokhod_residual,penetration_norm"]
    last_sol = None
    if schedule:
        for n in cfg.n_schedule:
            row, last_sol = _solve_rows(cfg, n)
            lines.append(row)
    else:
        row, last_sol = _solve_rows(cfg, cfg.penalization)
        lines.append(row)
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if cfg.out_dir is not None:
        _write(_out_dir(cfg) / "solve_summary.csv", text)
        if trajectories and last_sol is not None:
            _write(_out_dir(cfg) / "trajectories.csv", _trajectory_csv(cfg, last_sol))
    return 0


def _emit_report(cfg: ExperimentConfig, report: SuiteReport) -> int:
    out = _out_dir(cfg)
    _write(out / "summary.csv", report.to_summary_csv())
    _write(out / "report.txt", report.to_text())
    sys.stdout.write(report.to_text())
    return 0 if report.passed else 1


def _cmd_verify(cfg: ExperimentConfig) -> int:
    report = SuiteReport(rows=_SUITES["orthonormality"](cfg))
    return _emit_report(cfg, report)


def _cmd_crosscheck(cfg: ExperimentConfig) -> int:
    sol, pgrid, report = crosscheck_run(cfg)
    out = _out_dir(cfg)
    lines = ["t,x,u"]
    for k in range(len(pgrid.t)):
        for j in range(len(pgrid.x)):
            lines.append(f"{pgrid.t[k]:.12g},{pgrid.x[j]:.12g},{pgrid.u[k, j]:.12g}")
    _write(out / "u_grid.csv", "\n".join(lines) + "\n")
    fk_lines = ["key,value"] + [f"{k},{v}" for k, v in report.rows()]
    _write(out / "fk_report.csv", "\n".join(fk_lines) + "\n")
    u00 = float(pgrid.u[0, int(np.argmin(np.abs(pgrid.x - cfg.x0)))])
    print(f"y0 (monte carlo) = {sol.y0_value:.6g}")
    print(f"u(0, x0) (grid)  = {u00:.6g}")
    print(f"|gap| = {report.y0_gap:.6g}")
    return 0


def _cmd_suite(cfg: ExperimentConfig) -> int:
    report = run_suite(cfg)
    return _emit_report(cfg, report)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="levylab",
        description="Numerical laboratory for reflected backward doubly stochastic equations "
        "driven by finite-activity jump processes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "basis": "print the orthonormal basis coefficients as CSV",
        "simulate": "write sample path bundles as CSV",
        "solve": "run the backward solver and write a summary CSV",
        "verify": "run the orthonormality suite",
        "crosscheck": "solve by Monte Carlo and finite differences and compare",
        "suite": "run the configured verification suites",
    }
    for name, help_text in descriptions.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="experiment config file")
        sp.add_argument("--seed", type=int, help="override the master seed")
        sp.add_argument("--out", help="override the output directory")
        sp.add_argument("--paths", type=int, help="override the path count")
        sp.add_argument("--steps", type=int, help="override the time step count")
        sp.add_argument("--penalization", help="override: a positive number or 'projection'")
        if name == "solve":
            sp.add_argument(
                "--schedule", action="store_true",
                help="solve once per entry of the config's n_schedule",
            )
            sp.add_argument(
                "--trajectories", action="store_true",
                help="also write pathwise Y, K, Z trajectories (first 64 paths)",
            )
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = with_overrides(
            cfg,
            seed=args.seed,
            out_dir=args.out,
            n_paths=args.paths,
            n_steps=args.steps,
            penalization=args.penalization,
        )
        if args.command == "basis":
            return _cmd_basis(cfg)
        if args.command == "simulate":
            return _cmd_simulate(cfg)
        if args.command == "solve":
            return _cmd_solve(
                cfg,
                schedule=getattr(args, "schedule", False),
                trajectories=getattr(args, "trajectories", False),
            )
        if args.command == "verify":
            return _cmd_verify(cfg)
        if args.command == "crosscheck":
            return _cmd_crosscheck(cfg)
        if args.command == "suite":
            return _cmd_suite(cfg)
    except (LevyLabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
