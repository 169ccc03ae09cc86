"""Oracle comparison suite behind the ``validate`` command.

Each suite returns rows ``{suite, check, error, tolerance, passed}``.
"""
import math

import numpy as np

from .fields import FourierField, PolyField
from .grid import GridSpec
from .kernel import KernelApprox, MonteCarloSpec, cauchy_solve, semigroup_compose, weak_expectation
from .oracle import (
    ExactKernelKind,
    euler_maruyama_expectation,
    exact_kernel,
    reduced_example_solution,
)
from .splitting import BlockProblem, SplitConfig, split_solve
from .wkb import expand

SUITES = ("free_heat", "constant_drift", "ou", "monte_carlo", "splitting")


def _row(suite, check, error, tol):
    return {"suite": suite, "check": check, "error": float(error), "tolerance": tol,
            "passed": bool(error <= tol)}


def _points(n, center=0.0, spread=0.4):
    axis = center + spread * np.linspace(-1, 1, 3)
    if n == 1:
        return axis[:, None]
    g = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([a.ravel() for a in g], axis=-1)


def _kernel_rows(suite, drift, kind, times, K=2):
    rows = []
    n = len(drift)
    k = KernelApprox(drift, order=K, form="wkb_exponent")
    X = _points(n, 0.1)
    Y = _points(n, -0.1)
    for t in times:
        got = np.array([[k.density(t, x, y) for y in Y] for x in X])
        want = np.array([[exact_kernel(kind, t, x, y) for y in Y] for x in X])
        err = float(np.max(np.abs(got - want) / want))
        rows.append(_row(suite, f"n={n} t={t:g} relative density error", err, 1e-10))
    return rows


def suite_free_heat():
    rows = []
    for n in (1, 2):
        rows += _kernel_rows("free_heat", [FourierField.zero(n)] * n, ExactKernelKind.free_heat(),
                             (0.01, 0.1, 1.0))
        k = KernelApprox([FourierField.zero(n)] * n)
        err = abs(cauchy_solve(k, 0.1, np.zeros(n), lambda Y: np.ones(len(Y))) - 1)
        rows.append(_row("free_heat", f"n={n} normalization", err, 1e-10))
    return rows


def suite_constant_drift():
    rows = []
    for mu in ((0.7,), (-1.2, 0.5)):
        n = len(mu)
        drift = [FourierField.constant(m, n) for m in mu]
        rows += _kernel_rows("constant_drift", drift, ExactKernelKind.constant_drift(mu),
                             (0.01, 0.1, 0.5))
        k = KernelApprox(drift, form="wkb_exponent")
        x = np.full(n, 0.2)
        want = float(exact_kernel(ExactKernelKind.constant_drift(mu), 0.3, x, -x))
        err = abs(semigroup_compose(k, 0.15, 0.15, x, -x) - want) / want
        rows.append(_row("constant_drift", f"n={n} semigroup composition", err, 1e-10))
    return rows


def suite_ou():
    ou = [PolyField(1, {(1,): -1.0})]
    rows = []
    y = 0.3
    e = expand(ou, [y], K=1)
    c0 = {g: v for g, v in e.c_tables[0].terms().items()}
    c1 = {g: v for g, v in e.c_tables[1].terms().items()}
    want0 = {(1,): y / 2, (2,): 0.25}
    want1 = {(0,): 0.5 - y * y / 4, (1,): -y / 4, (2,): -1 / 12}
    err = max(abs(c0.get(g, 0.0) - want0.get(g, 0.0)) for g in set(c0) | set(want0))
    err = max(err, max(abs(c1.get(g, 0.0) - want1.get(g, 0.0)) for g in set(c1) | set(want1)))
    rows.append(_row("ou", "c0, c1 coefficients", err, 1e-12))
    k = KernelApprox(ou, order=6, horizon=1.0)
    kind = ExactKernelKind.ou()
    for t in (0.01, 0.05):
        err = max(abs(k.density(t, x, yy) - exact_kernel(kind, t, x, yy)) / exact_kernel(kind, t, x, yy)
                  for x in (-0.3, 0.0, 0.4) for yy in (-0.2, 0.1, 0.3))
        rows.append(_row("ou", f"K=6 t={t:g} relative density error", err, 1e-6))
    err = abs(cauchy_solve(k, 0.05, [0.2], lambda Y: np.ones(len(Y))) - 1)
    rows.append(_row("ou", "normalization at t=0.05", err, 1e-6))
    err = abs(semigroup_compose(k, 0.1, 0.1, [0.2], [-0.1]) - exact_kernel(kind, 0.2, 0.2, -0.1))
    rows.append(_row("ou", "semigroup composition at t=0.2", err, 1e-4))
    return rows


def suite_monte_carlo(paths=20_000):
    ou = [PolyField(1, {(1,): -1.0})]
    k = KernelApprox(ou, order=4, horizon=1.0)
    rows = []
    g = lambda Y: Y[:, 0] ** 2
    a = weak_expectation(k, 0.1, [0.5], g, MonteCarloSpec(paths, seed=11))
    b = euler_maruyama_expectation(ou, None, [0.5], 0.1, g, 50, paths, seed=12)
    se = math.hypot(a["std_error"], b["std_error"])
    rows.append(_row("monte_carlo", "E[y^2] weighted vs Euler-Maruyama (in std errors)",
                     abs(a["estimate"] - b["estimate"]) / se, 3.0))
    return rows


def suite_splitting():
    sigma, mu = 0.4, 1.0
    f = lambda y: np.exp(-y ** 2 / 0.5)
    g = lambda z: 0.5 * np.exp(-(z - 0.3) ** 2 / 0.32)
    problem = BlockProblem(
        2, 1, [FourierField.zero(2)], [FourierField.constant(mu, 2)],
        lambda X: f(X[:, 0]) + g(X[:, 1]), 0.5, diffusion=[[sigma ** 2 / 2]],
    )
    res = split_solve(problem, SplitConfig(), GridSpec((-2.5, -2.5), (2.5, 2.5), (51, 51)))
    exact = reduced_example_solution(0.5, res.state.points(), sigma, mu, f, g)
    err = np.max(np.abs(res.state.values.ravel() - exact))
    return [_row("splitting", "reduced example on a 51x51 grid, T=0.5", err, 1e-3)]


RUNNERS = {
    "free_heat": suite_free_heat,
    "constant_drift": suite_constant_drift,
    "ou": suite_ou,
    "monte_carlo": suite_monte_carlo,
    "splitting": suite_splitting,
}


def run_validation(suites=None):
    """Run the named suites (all by default) and return their rows."""
    suites = SUITES if not suites else tuple(suites)
    unknown = [s for s in suites if s not in RUNNERS]
    if unknown:
        raise KeyError(f"unknown validation suite(s) {unknown}; available: {list(SUITES)}")
    rows = []
    for s in suites:
        rows += RUNNERS[s]()
    return rows


__all__ = ["SUITES", "run_validation"]
