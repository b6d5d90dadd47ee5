"""Command-line verification surface.

Subcommands: sample, solve, picard, moments, verify <check>.  Exit codes:
0 = success / check passed, 2 = check ran and failed, 1 = usage or
configuration error.  All outputs are CSV files under the output directory
(flag --outdir, else env LEVYFIELD_OUTDIR, else config file, else cwd).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from functools import partial
from pathlib import Path

import numpy as np

from .gronwall import (ConvolutionKernel, equality_sequence,
                       renewal_probabilities, summability_check, verify_bound)
from .harness import (ConfigError, RunConfig, build_config, build_measure,
                      build_problem, build_window, parse_config_file,
                      run_ensemble, solution_square_task, summarize)
from .integrals import Integrand, box_indicator, isometry_test
from .kernels import check_h2, heat_kernel, wave_kernel
from .malliavin import (DerivativePoint, MalliavinError, chain_rule_residual,
                        derivative_equation_residual, duality_test,
                        exp_derivative_residual, integral_functional,
                        picard_derivative_report)
from .noise import NoiseError, derive_rng, sample_prm, save_configuration
from .reporting import write_check_rows, write_csv, write_summaries
from .solver import SolverError, picard_solve, solve_forward

CHECKS = ("isometry", "chain-rule", "exp-derivative", "duality",
          "derivative-eq", "picard-derivative", "gronwall", "h2",
          "cross-solver")

OUTDIR_ENV = "LEVYFIELD_OUTDIR"


def _h_smooth(t, x):
    return np.cos(x) * np.exp(-t)


def _g_smooth(t, x):
    return np.sin(x + t)


def _h_positive(t, x):
    # bounded away from 0 so exp(h z) - 1 never cancels catastrophically
    return 0.5 + 0.3 * np.cos(x) * np.exp(-t)


H_SMOOTH = Integrand(_h_smooth, "cos(x)exp(-t)")
G_SMOOTH = Integrand(_g_smooth, "sin(x+t)")
H_POSITIVE = Integrand(_h_positive, "0.5+0.3cos(x)exp(-t)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levyfield",
        description="simulate and verify jump-noise heat/wave equations")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    flag = common.add_argument
    flag("--kernel", choices=("wave", "heat"), dest="kernel")
    flag("--sigma", dest="sigma",
         choices=("affine", "constant", "abs", "sin"))
    flag("--sigma-a", type=float, dest="sigma_a")
    flag("--sigma-b", type=float, dest="sigma_b")
    flag("--ic", choices=("constant", "cosine", "wave-pair"), dest="ic")
    flag("--ic-value", type=float, dest="ic_value")
    flag("--T", type=float, dest="T")
    flag("--R", type=float, dest="R")
    flag("--noise", choices=("rademacher", "two_point", "gaussian"),
         dest="noise")
    flag("--jump", type=float, dest="jump")
    flag("--mass", type=float, dest="mass")
    flag("--noise-mean", type=float, dest="noise_mean")
    flag("--noise-std", type=float, dest="noise_std")
    flag("--grid-t", type=int, dest="n_t")
    flag("--grid-x", type=int, dest="n_x")
    flag("--n", type=int, dest="n_samples")
    flag("--n-diagnostic", type=int, dest="n_diagnostic")
    flag("--n-iter", type=int, dest="n_iter")
    flag("--seed", type=int, dest="seed")
    flag("--workers", type=int, dest="workers")
    flag("--outdir", dest="outdir")
    flag("--slack-sigmas", type=float, dest="slack_sigmas")
    flag("--tol-identity", type=float, dest="tol_identity")
    flag("--tol-exact", type=float, dest="tol_exact")
    flag("--tol-cross", type=float, dest="tol_cross")
    flag("--tol-gronwall", type=float, dest="tol_gronwall")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common],
                   help="draw one noise configuration and write it as CSV")
    sub.add_parser("solve", parents=[common],
                   help="exact forward solve of one realization")
    sub.add_parser("picard", parents=[common],
                   help="Picard iteration solve with sup-difference log")
    sub.add_parser("moments", parents=[common],
                   help="ensemble second moments of the solution")
    ver = sub.add_parser("verify", parents=[common],
                         help="run one verification check")
    ver.add_argument("check", choices=CHECKS)
    return parser


def _load_config(args) -> RunConfig:
    file_values = parse_config_file(args.config) if args.config else None
    overrides = {}
    if os.environ.get(OUTDIR_ENV):
        overrides["outdir"] = os.environ[OUTDIR_ENV]
    for name in _CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return build_config(file_values, overrides)


_CONFIG_FLAGS = ("kernel", "sigma", "sigma_a", "sigma_b", "ic", "ic_value",
                 "T", "R", "noise", "jump", "mass", "noise_mean", "noise_std",
                 "n_t", "n_x", "n_samples", "n_diagnostic", "n_iter", "seed",
                 "workers", "outdir", "slack_sigmas", "tol_identity",
                 "tol_exact", "tol_cross", "tol_gronwall")


def _outpath(config: RunConfig, name: str) -> Path:
    out = Path(config.outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _report(check: str, ok: bool, detail: str, path) -> int:
    print(f"{check}: {'PASS' if ok else 'FAIL'} ({detail}) -> {path}")
    return 0 if ok else 2


def _cmd_sample(config: RunConfig) -> int:
    cfg = sample_prm(build_measure(config), build_window(config), config.seed)
    out = _outpath(config, "configuration.csv")
    sidecar = save_configuration(cfg, out)
    print(f"wrote {cfg.n_atoms} atoms -> {out} (+ {sidecar.name})")
    return 0


def _cmd_solve(config: RunConfig) -> int:
    measure = build_measure(config)
    cfg = sample_prm(measure, build_window(config), config.seed)
    path = solve_forward(cfg, build_problem(config))
    atoms = _outpath(config, "solution_atoms.csv")
    grid = _outpath(config, "solution_grid.csv")
    path.atoms_csv(atoms)
    path.grid_csv(grid)
    print(f"forward solve ({cfg.n_atoms} atoms) -> {atoms}, {grid}")
    return 0


def _cmd_picard(config: RunConfig) -> int:
    measure = build_measure(config)
    cfg = sample_prm(measure, build_window(config), config.seed)
    path, diag = picard_solve(cfg, build_problem(config), config.n_iter)
    atoms = _outpath(config, "picard_atoms.csv")
    grid = _outpath(config, "picard_grid.csv")
    diag_path = _outpath(config, "picard_diagnostics.csv")
    path.atoms_csv(atoms)
    path.grid_csv(grid)
    diag.to_csv(diag_path)
    print(f"picard({config.n_iter}) -> {atoms}, {grid}, {diag_path}")
    return 0


def _cmd_moments(config: RunConfig) -> int:
    problem = build_problem(config)
    measure = build_measure(config)
    T, R = config.T, config.R
    points = [(T, 0.0), (T / 2, 0.0), (T, R / 2), (T / 2, -R / 2),
              (3 * T / 4, R / 4)]
    values = run_ensemble(
        config, partial(solution_square_task, problem, measure, points))
    summaries = [summarize(f"E|u({t:g},{x:g})|^2", values[:, j])
                 for j, (t, x) in enumerate(points)]
    out = _outpath(config, "second_moments.csv")
    write_summaries(out, summaries)
    print(f"second moments over {config.n_samples} solves -> {out}")
    return 0


def _draw_point(config: RunConfig, index: int,
                jump: float | None = None) -> DerivativePoint:
    rng = derive_rng(config.seed, 100_000 + index)
    r = float(rng.uniform(0.0, config.T))
    xi = float(rng.uniform(-config.R, config.R))
    if jump is None:
        jump = 1.0 if index % 2 == 0 else -1.0
    return DerivativePoint(r, xi, jump)


def _check_isometry(config: RunConfig) -> int:
    h = box_indicator(-1.0, 1.0)
    summary = isometry_test(build_measure(config), h, build_window(config),
                            config.n_samples, config.seed)
    ok = abs(summary.studentized) <= config.slack_sigmas
    summary.passed = ok
    out = _outpath(config, "isometry.csv")
    write_summaries(out, [summary])
    return _report("isometry", ok,
                   f"estimate {summary.estimate:.6g} vs {summary.target:.6g},"
                   f" z={summary.studentized:.3f}", out)


def _check_chain_rule(config: RunConfig) -> int:
    measure = build_measure(config)
    window = build_window(config)
    F = integral_functional(H_SMOOTH, measure)
    maps = (("square", lambda v: v * v), ("exp", np.exp), ("sin", np.sin))
    rows = []
    ok = True
    for i in range(config.n_diagnostic):
        cfg = sample_prm(measure, window, (config.seed, i))
        point = _draw_point(config, i)
        for gname, g in maps:
            row = chain_rule_residual(g, F, cfg, point, gname)
            scale = 1.0 + abs(row.lhs) + abs(row.rhs)
            row.passed = bool(row.residual_or_z <= config.tol_exact * scale)
            ok = ok and row.passed
            rows.append(row)
    out = _outpath(config, "chain_rule.csv")
    write_check_rows(out, rows)
    worst = max(r.residual_or_z for r in rows)
    return _report("chain-rule", ok, f"{len(rows)} draws, worst residual "
                   f"{worst:.3g}", out)


def _check_exp_derivative(config: RunConfig) -> int:
    measure = build_measure(config)
    window = build_window(config)
    rows = []
    ok = True
    for i in range(config.n_diagnostic):
        cfg = sample_prm(measure, window, (config.seed, i))
        point = _draw_point(config, i)
        row = exp_derivative_residual(H_POSITIVE, cfg, point, measure)
        row.passed = bool(row.residual_or_z <= config.tol_exact)
        ok = ok and row.passed
        rows.append(row)
    out = _outpath(config, "exp_derivative.csv")
    write_check_rows(out, rows)
    worst = max(r.residual_or_z for r in rows)
    return _report("exp-derivative", ok,
                   f"{len(rows)} draws, worst rel residual {worst:.3g}", out)


def _check_duality(config: RunConfig) -> int:
    summary = duality_test(H_SMOOTH, G_SMOOTH, build_measure(config),
                           build_window(config), config.n_samples,
                           config.seed)
    ok = abs(summary.studentized) <= config.slack_sigmas
    summary.passed = ok
    out = _outpath(config, "duality.csv")
    write_summaries(out, [summary])
    return _report("duality", ok,
                   f"estimate {summary.estimate:.6g} vs {summary.target:.6g},"
                   f" z={summary.studentized:.3f}", out)


def _check_derivative_eq(config: RunConfig) -> int:
    problem = build_problem(config)
    if problem.sigma.affine is None:
        print("derivative-eq requires affine sigma; for general Lipschitz "
              "maps run the nonlinear probe (levyfield.malliavin."
              "nonlinear_probe), which reports residuals without pass/fail",
              file=sys.stderr)
        return 1
    measure = build_measure(config)
    window = build_window(config)
    rows = []
    ok = True
    for i in range(config.n_diagnostic):
        cfg = sample_prm(measure, window, (config.seed, i))
        point = _draw_point(config, i)
        rng = derive_rng(config.seed, 200_000 + i)
        t = float(rng.uniform(0.0, config.T))
        x = float(rng.uniform(-config.R, config.R))
        res = derivative_equation_residual(problem, cfg, point, t, x)
        passed = bool(res.residual <= config.tol_identity
                      * (1.0 + abs(res.lhs)))
        ok = ok and passed
        rows.append(res.row("derivative-eq",
                            f"{point.label()};t={t:.6g};x={x:.6g}", passed))
    out = _outpath(config, "derivative_eq.csv")
    write_check_rows(out, rows)
    worst = max(r.residual_or_z for r in rows)
    return _report("derivative-eq", ok,
                   f"{len(rows)} draws, worst residual {worst:.3g}", out)


def _check_picard_derivative(config: RunConfig) -> int:
    problem = build_problem(config)
    if problem.sigma.affine is None:
        print("picard-derivative requires affine sigma", file=sys.stderr)
        return 1
    measure = build_measure(config)
    window = build_window(config)
    rows = []
    ok = True
    n_cfg = min(config.n_diagnostic, 25)
    for i in range(n_cfg):
        cfg = sample_prm(measure, window, (config.seed, i))
        point = _draw_point(config, i)
        report = picard_derivative_report(problem, cfg, point,
                                          n_iter=config.n_iter,
                                          residual_tol=config.tol_exact)
        ok = ok and report.passed
        rows.extend(report.rows())
    out = _outpath(config, "picard_derivative.csv")
    write_check_rows(out, rows)
    return _report("picard-derivative", ok, f"{n_cfg} configurations", out)


def _check_gronwall(config: RunConfig) -> int:
    kernel = ConvolutionKernel(lambda t: 1.0, horizon=1.0, resolution=4096)
    n_max = 10
    a = renewal_probabilities(kernel, n_max)
    rel = max(abs(a[n] * math.factorial(n) - 1.0) for n in range(n_max + 1))
    factorial_ok = rel <= config.tol_gronwall
    C = 0.5 ** np.arange(n_max + 1)
    f = equality_sequence(kernel, C, n_max)
    bound = verify_bound(f, C, kernel, M=float(np.max(f[0])))
    summ = summability_check(a, p=2.0)
    out_a = _outpath(config, "gronwall_renewal.csv")
    summ.to_csv(out_a)
    out_b = _outpath(config, "gronwall_bound.csv")
    bound.to_csv(out_b)
    ok = factorial_ok and bound.passed and summ.passed
    return _report(
        "gronwall", ok,
        f"max |a_n n! - 1| = {rel:.3g}, bound margin {bound.worst_margin:.3g},"
        f" summability {'ok' if summ.passed else 'fail'}", out_b)


def _check_h2(config: RunConfig) -> int:
    ok = True
    paths = []
    for kernel in (wave_kernel(), heat_kernel()):
        report = check_h2(kernel, horizon=config.T, eps=0.1)
        out = _outpath(config, f"h2_{kernel.kind}.csv")
        report.to_csv(out)
        paths.append(str(out))
        ok = ok and report.passed
    return _report("h2", ok, "wave and heat kernels", ", ".join(paths))


def _check_cross_solver(config: RunConfig) -> int:
    problem = build_problem(config)
    measure = build_measure(config)
    if measure.first_moment != 0.0:
        print("cross-solver check needs a centered measure (m1 = 0)",
              file=sys.stderr)
        return 1
    window = build_window(config)
    n_iter = max(config.n_iter, 10)
    rows = []
    ok = True
    for i in range(config.n_diagnostic):
        cfg = sample_prm(measure, window, (config.seed, i))
        exact = solve_forward(cfg, problem)
        approx, _ = picard_solve(cfg, problem, n_iter)
        atom_gap = float(np.max(np.abs(approx.atom_values
                                       - exact.atom_values), initial=0.0))
        grid_gap = float(np.max(np.abs(approx.grid_values
                                       - exact.grid_values)))
        gap = max(atom_gap, grid_gap)
        passed = bool(gap <= config.tol_cross)
        ok = ok and passed
        rows.append([i, cfg.n_atoms, atom_gap, grid_gap, passed])
    out = _outpath(config, "cross_solver.csv")
    write_csv(out, ["realization", "atoms", "atom_gap", "grid_gap", "pass"],
              rows)
    worst = max(max(r[2], r[3]) for r in rows)
    return _report("cross-solver", ok,
                   f"{len(rows)} realizations x picard({n_iter}), "
                   f"worst gap {worst:.3g}", out)


_CHECK_DISPATCH = {
    "isometry": _check_isometry,
    "chain-rule": _check_chain_rule,
    "exp-derivative": _check_exp_derivative,
    "duality": _check_duality,
    "derivative-eq": _check_derivative_eq,
    "picard-derivative": _check_picard_derivative,
    "gronwall": _check_gronwall,
    "h2": _check_h2,
    "cross-solver": _check_cross_solver,
}

_COMMAND_DISPATCH = {
    "sample": _cmd_sample,
    "solve": _cmd_solve,
    "picard": _cmd_picard,
    "moments": _cmd_moments,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; this tool reserves 2 for a
        # failed check, so usage problems map to 1
        return 0 if exc.code == 0 else 1
    try:
        config = _load_config(args)
        if args.command == "verify":
            return _CHECK_DISPATCH[args.check](config)
        return _COMMAND_DISPATCH[args.command](config)
    except (ConfigError, NoiseError, SolverError, MalliavinError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
