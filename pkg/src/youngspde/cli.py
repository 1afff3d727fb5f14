"""Command line entry point: ``youngspde <subcommand> [--config FILE] ...``.

Exit codes: 0 ok, 1 a check or experiment threshold failed, 2 configuration
or precondition error, 3 numerical divergence, 4 IO error. Errors are
printed to stderr as ``error[<category>]: <message>``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .config import RunConfig, emit_config, parse_config
from .drivers import (ALGORITHM_ID, RngStream, deterministic_driver, metadata_text, sample_bm,
                      sample_bm_ensemble, sample_fbm)
from .errors import ConfigError, GridMismatchError, LabError, LabIOError
from .paths import Grid, path_from_csv, path_to_csv
from .sewing import young_convolution
from .spectral import HeatSemigroup, identity_semigroup, single_mode

SUBCOMMANDS = ("gen-driver", "integrate", "solve", "experiment", "check")
EXPERIMENTS = ("continuity", "regularity", "kolmogorov", "rates", "remainder", "contraction")


def _fmt(x):
    return format(float(x), ".17g")


def _write(out_dir, name, text):
    try:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise LabIOError(f"cannot write {name} in {out_dir}: {exc}") from None
    return path


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise LabIOError(f"cannot read {path}: {exc}") from None


def _csv(header, rows):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in r))
    return "\n".join(lines) + "\n"


def _grid(cfg: RunConfig):
    return Grid(cfg.problem.T, cfg.grid.level)


def make_eta(cfg: RunConfig, grid: Grid):
    dr = cfg.driver
    if dr.kind == "fbm":
        return sample_fbm(dr.H, grid, RngStream(cfg.seed, 0), cfg.problem.e, dr.method, alpha=cfg.problem.alpha)
    if dr.kind == "deterministic":
        return deterministic_driver(dr.formula, {"c": dr.c, "omega": dr.omega, "a": dr.a}, grid, cfg.problem.e)
    return sample_bm(grid, RngStream(cfg.seed, 0), cfg.problem.e)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_driver(cfg, out, args):
    g = _grid(cfg)
    path = make_eta(cfg, g)
    _write(out, "driver.csv", path_to_csv(g, path.values))
    _write(out, "driver.meta.json", metadata_text(path))
    print(f"wrote driver.csv ({cfg.driver.kind}, N={g.N}) to {out}")
    return 0


def cmd_integrate(cfg, out, args):
    """Young integral of a scalar-field integrand Y (CSV, e columns) against eta (CSV or config)."""
    if args.eta:
        g, eta = path_from_csv(_read(args.eta))
    else:
        g = _grid(cfg)
        eta = make_eta(cfg, g).values
    if args.y:
        gy, Y = path_from_csv(_read(args.y))
        if gy.N != g.N or abs(gy.T - g.T) > 1e-12:
            raise GridMismatchError(f"Y lives on N={gy.N}, T={gy.T:g} but eta on N={g.N}, T={g.T:g}")
    else:
        Y = eta
    if Y.shape[1] != eta.shape[1]:
        raise GridMismatchError(f"Y has {Y.shape[1]} columns, eta has {eta.shape[1]}")
    sg = single_mode(cfg.problem.kappa) if cfg.problem.space == "mode" else identity_semigroup()
    Yf = Y[:, :, None] if sg.q.ndim == 0 else Y[:, :, None, None]
    res = young_convolution(Yf, eta, sg, g, scheme=cfg.grid.scheme, refine_levels=0)
    Z = np.real(res.Z).reshape(g.N + 1)
    _write(out, "integral.csv", _csv(["t", "z"], zip(g.times, Z)))
    if cfg.grid.refine_levels > 0 and g.level >= cfg.grid.refine_levels:
        coarse = Grid(g.T, g.level - cfg.grid.refine_levels, g.base)
        sew = young_convolution(Yf, eta, sg, coarse, scheme=cfg.grid.scheme, refine_levels=cfg.grid.refine_levels)
        _write(out, "sewing_report.csv", _csv(["level", "max_defect", "ratio_to_prev"], sew.report_rows()))
    print(f"Z_T = {_fmt(Z[-1])}")
    return 0


def trajectory_csv(cfg, grid, u, sg):
    """t, selected mode amplitudes (member 0, component 0), |u_t|_gamma per configured gamma."""
    header = ["t"]
    cols = []
    if isinstance(sg, HeatSemigroup):
        for k in cfg.output.modes:
            if abs(k) > sg.K:
                raise ConfigError(f"output mode {k} exceeds the cutoff K = {sg.K}")
            idx = (0, sg.K + int(k)) + (sg.K,) * (sg.n - 1)
            header += [f"re_k{k}", f"im_k{k}"]
            cols += [u[(slice(None),) + idx].real, u[(slice(None),) + idx].imag]
    else:
        header += ["re_mode", "im_mode"]
        cols += [u[:, 0, 0].real, u[:, 0, 0].imag]
    for gm in cfg.output.gammas:
        header.append(f"norm_gamma{gm:g}")
        cols.append(sg.norm(u, gm))
    rows = zip(grid.times, *cols)
    return _csv(header, rows)


def cmd_solve(cfg, out, args):
    from .solver import solve_mild

    g = _grid(cfg)
    if cfg.driver.kind == "bm":
        raise ConfigError("the Young driver eta must be α-Hölder with α > 1/2; use kind = fbm or deterministic")
    eta = make_eta(cfg, g)
    M = cfg.driver.M
    W = sample_bm_ensemble(g, cfg.seed, M, cfg.problem.d, first_index=1)
    wl = cfg.grid.window_len or None
    tr = solve_mild(cfg.problem, eta.values, W, g, wl, cfg.grid.picard_tol, cfg.grid.max_iter,
                    seed=cfg.seed, scheme=cfg.grid.scheme, rho_max=cfg.experiment.rho_max)
    sg = cfg.problem.semigroup()
    _write(out, "trajectory.csv", trajectory_csv(cfg, g, tr.u[0], sg))
    if M > 1:
        from .paths import lm_mean

        cols = [lm_mean(sg.norm(tr.u, gm), cfg.problem.m, axis=0) for gm in cfg.output.gammas]
        _write(out, "ensemble_norms.csv",
               _csv(["t"] + [f"lm_norm_gamma{gm:g}" for gm in cfg.output.gammas], zip(g.times, *cols)))
    rows = [(str(i), a, b, str(len(r)), rho) for i, ((a, b), r, rho) in
            enumerate(zip(tr.window_bounds, tr.picard_residuals, tr.rho_hat))]
    _write(out, "picard.csv", _csv(["window", "start_index", "end_index", "iterations", "rho_hat"],
                                   [(w, str(a), str(b), it, rho) for w, a, b, it, rho in rows]))
    meta = {"version": __version__, "algorithm_id": ALGORITHM_ID, "seed": cfg.seed, "members": M,
            "N": g.N, "window_len": tr.window_len, "halvings": tr.halvings, "scheme": tr.scheme,
            "max_rho_hat": tr.converged_rho, "driver": eta.meta, "config": emit_config(cfg)}
    _write(out, "run.meta.json", json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    print(f"solved N={g.N}, M={M}, windows={len(tr.window_bounds)}, max rho_hat={tr.converged_rho:.3g}")
    return 0


def _thresholds(cfg):
    from .experiments import Thresholds

    ex = cfg.experiment
    return Thresholds(continuity_band=(ex.continuity_lo, ex.continuity_hi), growth_max=ex.growth_max,
                      slope_min=ex.slope_min, rho_max=ex.rho_max)


def cmd_experiment(cfg, out, args):
    from . import experiments as X

    ex, th, p = cfg.experiment, _thresholds(cfg), cfg.problem
    eid = args.id
    if eid == "continuity":
        rep = X.continuity_experiment(p, ex.rhos, ex.trials, cfg.grid.level, cfg.seed, cfg.driver.H, th,
                                      cfg.threads)
    elif eid == "regularity":
        rep = X.regularity_probe(p, ex.thetas, ex.t_list, ex.levels, ex.trials, cfg.seed, cfg.driver.H, th,
                                 cfg.threads)
    elif eid == "kolmogorov":
        rep = X.kolmogorov_experiment(ex.levels, max(ex.trials, 2), cfg.seed, ex.kolmogorov_beta,
                                      ex.kolmogorov_theta, ex.kolmogorov_m, th)
    elif eid == "rates":
        rep = X.convergence_study(ex.target, ex.rate_levels, ex.oracle, cfg.seed, H=0.75, scheme=cfg.grid.scheme,
                                  problem=p, thresholds=th)
    elif eid == "remainder":
        rep = X.sewing_remainder_experiment(p, ex.levels, (0.0, 0.2), 4, cfg.seed, th)
    else:
        rep = X.contraction_study(p, cfg.grid.level, None, ex.trials, cfg.seed, cfg.driver.H, th)
    _write(out, f"{eid}_metrics.csv", rep.metrics_csv())
    for name, rows in rep.tables.items():
        safe = "".join(c if c.isalnum() else "_" for c in name).strip("_")
        _write(out, f"{eid}_{safe}.csv", _csv([f"c{i}" for i in range(len(rows[0]))] if rows else ["empty"], rows))
    lines = rep.summary_lines() + [f"NOTE {n}" for n in rep.notes]
    _write(out, f"{eid}_summary.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0 if rep.passed else 1


def cmd_check(cfg, out, args):
    from .checks import run_check_suite

    results, elapsed = run_check_suite(cfg, cfg.seed)
    lines = [r.line() for r in results]
    ok = all(r.passed for r in results)
    lines.append(f"{'PASS' if ok else 'FAIL'} check suite: {sum(r.passed for r in results)}/{len(results)} "
                 f"in {elapsed:.1f} s")
    _write(out, "check.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0 if ok else 1


COMMANDS = {"gen-driver": cmd_gen_driver, "integrate": cmd_integrate, "solve": cmd_solve,
            "experiment": cmd_experiment, "check": cmd_check}


def build_parser():
    ap = argparse.ArgumentParser(prog="youngspde", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file (INI grammar)")
    common.add_argument("--seed", type=int, help="global seed, overrides [run] seed")
    common.add_argument("--out", help="output directory, overrides [output] dir")
    common.add_argument("--threads", type=int, help="worker threads (0 = auto)")
    common.add_argument("--grid-level", type=int, help="override [grid] level")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-driver", parents=[common], help="sample the driver eta and write it as CSV")
    pi = sub.add_parser("integrate", parents=[common], help="Young integral of Y against eta")
    pi.add_argument("--y", help="integrand CSV (t, v_1..v_e)")
    pi.add_argument("--eta", help="driver CSV (t, v_1..v_e); default: sampled from config")
    sub.add_parser("solve", parents=[common], help="solve the configured problem")
    pe = sub.add_parser("experiment", parents=[common], help="run one experiment")
    pe.add_argument("id", choices=EXPERIMENTS)
    sub.add_parser("check", parents=[common], help="run the invariant suite")
    return ap


def resolve_config(args) -> RunConfig:
    text = _read(args.config) if args.config else ""
    cfg = parse_config(text)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = (os.cpu_count() or 1) if args.threads == 0 else args.threads
    if args.grid_level is not None:
        cfg.grid.level = args.grid_level
    if args.out:
        cfg.output.dir = args.out
    return cfg.validate()


def dispatch(command, cfg: RunConfig, args=None) -> int:
    if command not in COMMANDS:
        raise ConfigError(f"unknown subcommand {command!r}; choose from {SUBCOMMANDS}")
    args = args or argparse.Namespace(y=None, eta=None, id="continuity")
    return COMMANDS[command](cfg, cfg.output.dir, args)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return dispatch(args.command, cfg, args)
    except LabError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
