"""Command line interface: ``parakernel <command> --config problem.json``.

Exit codes: 0 success, 2 configuration or input error, 3 horizon violation,
4 validation failure.
"""
import argparse
import datetime
import io
import json
import logging
import sys

import numpy as np

from . import __version__
from ._jit import backend
from .config import load_config, make_payoff
from .errors import ConfigError, HorizonExceededError, InputError, ParakernelError
from .fields import FourierField, fourier_bounds, is_zero
from .horizon import HorizonParams, beta_lower_bound, empirical_ratio_diagnostic
from .kernel import (
    RNG_ALGORITHM,
    KernelApprox,
    cauchy_solve,
    cauchy_solve_composed,
    composed_expectation,
    semigroup_compose,
    weak_expectation,
)
from .splitting import BlockProblem, SplitConfig, split_solve
from .validation import run_validation
from .wkb import expand

EXIT_OK, EXIT_CONFIG, EXIT_HORIZON, EXIT_VALIDATION = 0, 2, 3, 4
DIAGNOSTIC_POINTS = 5


def _metadata(cfg, command, seed=None):
    meta = {
        "command": command,
        "version": __version__,
        "config_hash": cfg.config_hash,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        "backend": backend(),
    }
    if seed is not None:
        meta["seed"] = seed
        meta["rng"] = RNG_ALGORITHM
    return meta


def _parse_point(text, n, what="--y"):
    try:
        v = [float(s) for s in text.split(",")]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if len(v) != n:
        raise ConfigError(f"{what}: expected {n} components, got {len(v)}")
    return np.array(v)


def _emit(args, text):
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(args, obj):
    _emit(args, json.dumps(obj, indent=2) + "\n")


def _kernel(cfg, horizon=None):
    e = cfg.expansion
    return KernelApprox(
        cfg.drift, order=e.K, degree_cap=e.D, form=e.form, diffusion=cfg.diffusion,
        horizon=horizon if horizon is not None else cfg.horizon, mask=cfg.degeneracy_mask(),
        t0=e.t0, time_inhomogeneous=e.time_inhomogeneous, R=cfg.R,
        variable_diffusion=cfg.variable_diffusion,
    )


def cmd_expand(cfg, args):
    y = _parse_point(args.y, cfg.dim) if args.y else np.zeros(cfg.dim)
    t0 = args.t if args.t is not None else cfg.expansion.t0
    e = cfg.expansion
    exp = expand(cfg.drift, y, t0, e.K, e.D, e.time_inhomogeneous)
    _emit_json(args, {"metadata": _metadata(cfg, "expand"), "expansion": exp.to_json()})
    return EXIT_OK


def _sample_ball(n, R):
    axis = np.linspace(-R, R, DIAGNOSTIC_POINTS)
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    return pts[np.linalg.norm(pts, axis=1) <= R * (1 + 1e-12)]


def cmd_horizon(cfg, args):
    out = io.StringIO()
    drift = cfg.drift
    if all(is_zero(f) for f in drift):
        out.write("beta: unbounded (drift-free)\n")
    elif all(isinstance(f, FourierField) for f in drift):
        b = fourier_bounds(drift)
        p = HorizonParams(cfg.dim, b["abs_m0"], b["ebar"], cfg.R, cfg.variable_diffusion)
        bound = beta_lower_bound(p)
        out.write(f"beta: {bound.beta:.6f}\n")
        out.write(f"m0: {[float(v) for v in b['m0']]}\n|m0|: {b['abs_m0']:.6g}\n")
        out.write(f"ebar: {b['ebar']:.6g}\nR: {cfg.R:.6g}\nfactor: {bound.factor}\n")
    else:
        out.write("no certified bound; use --diagnose\n")
    if args.diagnose:
        if args.t is None:
            raise ConfigError("--diagnose needs --t")
        y = _parse_point(args.y, cfg.dim) if args.y else np.zeros(cfg.dim)
        K = max(cfg.expansion.K, 2)
        exp = expand(cfg.drift, y, cfg.expansion.t0, K, cfg.expansion.D)
        diag = empirical_ratio_diagnostic(exp, args.t, y + _sample_ball(cfg.dim, cfg.R))
        verdict = "converging" if diag["converging"] else "not converging"
        out.write(f"diagnostic: K={K} t={args.t:g} max_ratio={diag['max_ratio']:.6g} ({verdict})\n")
    _emit(args, out.getvalue())
    return EXIT_OK


def cmd_solve(cfg, args):
    s = cfg.solve
    if s.payoff is None:
        raise ConfigError("config.solve.payoff: required for solve")
    t = args.t if args.t is not None else s.t
    if t is None:
        raise ConfigError("solve needs --t or config.solve.t")
    x = _parse_point(args.y, cfg.dim) if args.y else (
        np.array(s.x) if s.x is not None else np.zeros(cfg.dim))
    steps = args.compose if args.compose is not None else s.compose
    g = make_payoff(s.payoff, cfg.dim)
    k = _kernel(cfg)
    record = {"t": t, "x": x.tolist()}
    seed = None
    if s.method == "quadrature":
        if steps > 1:
            record["value"] = cauchy_solve_composed(k, t, x, g, steps, cfg.quadrature)
        else:
            record["value"] = cauchy_solve(k, t, x, g, cfg.quadrature)
    else:
        mc = cfg.monte_carlo
        if args.seed is not None:
            mc = type(mc)(mc.paths, args.seed, mc.chunk)
        seed = mc.seed
        res = (composed_expectation(k, t, x, g, steps, mc) if steps > 1
               else weak_expectation(k, t, x, g, mc))
        record.update(value=res["estimate"], std_error=res["std_error"], paths=res["paths"])
    record["steps"] = steps
    _emit_json(args, {"metadata": _metadata(cfg, "solve", seed), "result": record})
    return EXIT_OK


def cmd_compose(cfg, args):
    if args.t is None:
        raise ConfigError("compose needs --t")
    s = cfg.solve
    x = np.array(s.x) if s.x is not None else np.zeros(cfg.dim)
    y = _parse_point(args.y, cfg.dim) if args.y else np.zeros(cfg.dim)
    k = _kernel(cfg)
    value = semigroup_compose(k, args.t / 2, args.t / 2, x, y, cfg.quadrature)
    _emit_json(args, {"metadata": _metadata(cfg, "compose"),
                      "result": {"t": args.t, "x": x.tolist(), "y": y.tolist(), "value": value}})
    return EXIT_OK


def cmd_split_solve(cfg, args):
    sp = cfg.split
    if sp is None:
        raise ConfigError("config.split: required for split-solve")
    n, d = cfg.dim, sp.d
    if not 1 <= d <= n:
        raise ConfigError(f"config.split.d: need 1 <= d <= {n}")
    diffusion = None if cfg.diffusion is None else cfg.diffusion[:d, :d]
    T = args.t if args.t is not None else sp.T
    problem = BlockProblem(n, d, cfg.drift[:d], cfg.drift[d:], make_payoff(sp.initial, n), T,
                           diffusion=diffusion, kernel_horizon=sp.kernel_horizon)
    split_cfg = SplitConfig(sp.rho, sp.tau_step, sp.iterations, sp.tol, sp.rk_substeps,
                            cfg.expansion.K, cfg.quadrature)
    res = split_solve(problem, split_cfg, sp.grid)
    meta = _metadata(cfg, "split-solve")
    meta.update(time=T, steps=res.report["steps"], rho=res.report["rho"], dt=res.report["dt"],
                boundary_hits=res.report["boundary_hits"])
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}: {value}\n")
    buf.write(",".join([f"x{i + 1}" for i in range(n)] + ["value"]) + "\n")
    rows = np.column_stack([res.state.points(), res.state.values.ravel()])
    np.savetxt(buf, rows, delimiter=",", fmt="%.17g")
    _emit(args, buf.getvalue())
    return EXIT_OK


def cmd_validate(cfg, args):
    try:
        rows = run_validation(cfg.validate if cfg is not None else None)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    width = max(len(r["check"]) for r in rows)
    buf = io.StringIO()
    buf.write(f"{'suite':<15} {'check':<{width}} {'error':>12} {'tolerance':>10}  result\n")
    for r in rows:
        mark = "PASS" if r["passed"] else "FAIL"
        buf.write(f"{r['suite']:<15} {r['check']:<{width}} {r['error']:>12.3e} "
                  f"{r['tolerance']:>10.1e}  {mark}\n")
    failed = sum(not r["passed"] for r in rows)
    buf.write(f"{len(rows) - failed}/{len(rows)} checks passed\n")
    _emit(args, buf.getvalue())
    return EXIT_VALIDATION if failed else EXIT_OK


COMMANDS = {
    "expand": cmd_expand,
    "horizon": cmd_horizon,
    "solve": cmd_solve,
    "compose": cmd_compose,
    "split-solve": cmd_split_solve,
    "validate": cmd_validate,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="parakernel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "validate", help="JSON problem file")
        p.add_argument("--y", help="point as comma-separated values")
        p.add_argument("--t", type=float, help="time (t0 for expand)")
        p.add_argument("--seed", type=int, help="master seed for Monte Carlo")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--diagnose", action="store_true", help="run the empirical ratio check")
        p.add_argument("--compose", type=int, help="split t into N kernel steps")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else None
        return COMMANDS[args.command](cfg, args)
    except HorizonExceededError as exc:
        print(f"error: {exc}; rerun with --compose N so that t/N <= {exc.horizon:.6g}",
              file=sys.stderr)
        return EXIT_HORIZON
    except (ConfigError, InputError, ParakernelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
