"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]`` or ``[FAIL]`` line with the observed
numbers; ``conftest.py`` repeats the lines in the terminal summary.  Run
``python3 tests/test_acceptance.py`` to print them without pytest.
"""
import math
import time

import numpy as np
import pytest

from parakernel.fields import FourierField, PolyField
from parakernel.grid import GridSpec
from parakernel.horizon import (
    HorizonParams,
    beta_lower_bound,
    certified_horizon,
    empirical_ratio_diagnostic,
)
from parakernel.kernel import (
    DegeneracyMask,
    KernelApprox,
    MonteCarloSpec,
    cauchy_solve,
    semigroup_compose,
    weak_expectation,
)
from parakernel.oracle import (
    ExactKernelKind,
    euler_maruyama_expectation,
    exact_kernel,
    kolmogorov_gaussian_solution,
    reduced_example_solution,
)
from parakernel.splitting import BlockProblem, SplitConfig, split_solve
from parakernel.wkb import expand

RESULTS = []
OU = [PolyField(1, {(1,): -1.0})]


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {number} {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def loglog_slope(ts, errs):
    return float(np.polyfit(np.log(ts), np.log(errs), 1)[0])


def ou_relative_error(k, t, x=0.6, y=0.5):
    # a moderate |x - y| keeps exp(-|x - y|^2 / 4t) well conditioned at t = 1e-3;
    # at |x - y| ~ 1 its rounding error alone exceeds the t^4 truncation error
    want = exact_kernel(ExactKernelKind.ou(), t, x, y)
    return abs(k.density(t, x, y) - want) / want


def test_constant_drift_exactness():
    start = time.perf_counter()
    worst = 0.0
    for mu in ((1.7,), (1.2, -1.5)):
        n = len(mu)
        drift = [FourierField.constant(m, n) for m in mu]
        k = KernelApprox(drift, order=2, form="wkb_exponent")
        axis = np.linspace(-0.8, 0.8, 9 if n == 1 else 3)
        X = axis[:, None] if n == 1 else np.stack(np.meshgrid(axis, axis), -1).reshape(-1, 2)
        y = np.full(n, 0.1)
        kind = ExactKernelKind.constant_drift(mu)
        for t in (0.01, 0.1, min(0.5, k.horizon)):
            got = k.density(t, X, y)
            want = exact_kernel(kind, t, X, y)
            worst = max(worst, float(np.max(np.abs(got - want) / want)))
    elapsed = time.perf_counter() - start
    report(1, "constant-drift exactness", worst <= 1e-10 and elapsed < 1.0,
           f"max relative error {worst:.2e} (tol 1e-10), {elapsed:.2f} s (limit 1 s)")


def test_ou_coefficients_and_order():
    start = time.perf_counter()
    coeff_err = 0.0
    for y in (-0.7, 0.0, 0.4):
        e = expand(OU, [y], K=1)
        want = [{(1,): y / 2, (2,): 0.25}, {(0,): 0.5 - y * y / 4, (1,): -y / 4, (2,): -1 / 12}]
        for table, ref in zip(e.c_tables, want):
            got = table.terms()
            for g in set(got) | set(ref):
                coeff_err = max(coeff_err, abs(got.get(g, 0.0) - ref.get(g, 0.0)))
    ts = np.geomspace(1e-3, 1e-1, 6)
    slopes = {}
    for K in (1, 2, 3):
        k = KernelApprox(OU, order=K, horizon=1.0)
        slopes[K] = loglog_slope(ts, [ou_relative_error(k, t) for t in ts])
    elapsed = time.perf_counter() - start
    ok = coeff_err <= 1e-12 and all(s >= K + 0.8 for K, s in slopes.items()) and elapsed < 5
    shown = ", ".join(f"K={K}: {s:.2f}" for K, s in slopes.items())
    report(2, "OU coefficient identities", ok,
           f"coefficient error {coeff_err:.1e} (tol 1e-12); slopes {shown} (need K+0.8); {elapsed:.2f} s")


def test_horizon_values():
    b9 = beta_lower_bound(HorizonParams(1, 1, 1.0, 1.0)).beta
    b18 = beta_lower_bound(HorizonParams(1, 1, 1.0, 1.0, variable_diffusion=True)).beta
    scale = max(abs(beta_lower_bound(HorizonParams(1, 1, 1.0, R)).beta * R * R - 1 / 9) * 9
                for R in (0.25, 0.5, 2.0, 3.0, 10.0))
    ok = b9 == 1 / 9 and b18 == 1 / 18 and scale <= 4 * np.finfo(float).eps
    report(3, "horizon bound values", ok,
           f"beta {b9!r} and {b18!r}; worst relative R^-2 scaling error {scale:.1e}")


def random_fourier_drift(rng):
    terms = rng.integers(1, 4)
    freqs = np.zeros((terms, 2))
    freqs[:, 1] = rng.integers(-2, 3, terms)
    coef = rng.normal(size=(terms, 2))
    # scale so that the largest term modulus ebar = sqrt(a^2 + b^2) / 2 is at most 1
    coef *= rng.uniform(0.3, 1.0) * 2 / np.max(np.hypot(coef[:, 0], coef[:, 1]))
    freqs[0, 1] = rng.choice([-2, -1, 1, 2])
    return FourierField(1, freqs, coef[:, 0], coef[:, 1])


def test_horizon_soundness():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    pts = np.linspace(-1, 1, 5)[:, None]
    rows = []
    for _ in range(5):
        f = random_fourier_drift(rng)
        beta = certified_horizon([f], 1.0)
        diag = empirical_ratio_diagnostic(expand([f], [0.0], K=10), 0.9 * beta, pts)
        rows.append((beta, diag["max_ratio"], diag["converging"]))
    elapsed = time.perf_counter() - start
    ok = all(r[2] for r in rows) and elapsed < 30
    ratios = ", ".join(f"{r[1]:.3f}" for r in rows)
    report(4, "horizon soundness", ok, f"max ratios {ratios} at t=0.9 beta, K=10; {elapsed:.2f} s")


def test_form_agreement():
    K = 2
    a = KernelApprox(OU, order=K, horizon=1.0, form="wkb_exponent")
    b = KernelApprox(OU, order=K, horizon=1.0, form="d_series")
    ts = np.geomspace(1e-3, 1e-1, 6)
    diffs = [abs(a.density(t, 0.5, -0.3) - b.density(t, 0.5, -0.3)) / a.density(t, 0.5, -0.3)
             for t in ts]
    s = loglog_slope(ts, diffs)
    report(5, "d/c form agreement", s >= K + 0.8, f"slope {s:.2f} (need {K + 0.8})")


def test_normalization_and_semigroup():
    k = KernelApprox(OU, order=6, horizon=1.0)
    norm = abs(cauchy_solve(k, 0.05, [0.3], lambda Y: np.ones(len(Y))) - 1)
    x, y = 0.3, -0.1
    composed = semigroup_compose(k, 0.1, 0.1, [x], [y])
    direct = abs(composed - k.density(0.2, x, y))
    exact = abs(composed - exact_kernel(ExactKernelKind.ou(), 0.2, x, y))
    ok = norm <= 1e-6 and direct <= 1e-4
    report(6, "normalization and semigroup", ok,
           f"|int p - 1| = {norm:.1e} (tol 1e-6); compose vs direct {direct:.1e} (tol 1e-4), "
           f"vs exact {exact:.1e}")


def test_monte_carlo_weak_consistency():
    start = time.perf_counter()
    k = KernelApprox(OU, order=4, horizon=1.0)
    payoffs = {
        "y": lambda Y: Y[:, 0],
        "y^2": lambda Y: Y[:, 0] ** 2,
        "1{y>0}": lambda Y: (Y[:, 0] > 0).astype(float),
    }
    scores = {}
    for i, (name, g) in enumerate(payoffs.items()):
        a = weak_expectation(k, 0.1, [0.5], g, MonteCarloSpec(100_000, seed=100 + i))
        b = euler_maruyama_expectation(OU, None, [0.5], 0.1, g, 100, 100_000, seed=200 + i)
        scores[name] = abs(a["estimate"] - b["estimate"]) / math.hypot(a["std_error"], b["std_error"])
    elapsed = time.perf_counter() - start
    ok = all(s <= 3 for s in scores.values()) and elapsed < 60
    shown = ", ".join(f"{n}: {s:.2f}" for n, s in scores.items())
    report(7, "Monte Carlo weak consistency", ok, f"differences in combined SE {shown} (tol 3); {elapsed:.1f} s")


def test_splitting_scheme():
    start = time.perf_counter()
    sigma, mu = 0.4, 1.0
    f = lambda y: np.exp(-y ** 2 / 0.5)
    g = lambda z: 0.5 * np.exp(-(z - 0.3) ** 2 / 0.32)
    reduced = BlockProblem(2, 1, [FourierField.zero(2)], [FourierField.constant(mu, 2)],
                           lambda X: f(X[:, 0]) + g(X[:, 1]), 0.5, diffusion=[[sigma ** 2 / 2]])
    res = split_solve(reduced, SplitConfig(), GridSpec((-2.5, -2.5), (2.5, 2.5), (101, 101)))
    exact = reduced_example_solution(0.5, res.state.points(), sigma, mu, f, g)
    err = float(np.max(np.abs(res.state.values.ravel() - exact)))

    # non-commuting perturbation: transport speed proportional to the diffusive coordinate
    a, kappa, P = 0.08, 1.0, np.diag([4.0, 4.0])
    kolmogorov = BlockProblem(
        2, 1, [FourierField.zero(2)], [PolyField(2, {(1, 0): kappa})],
        lambda X: np.exp(-0.5 * np.einsum("mi,ij,mj->m", X, P, X)), 0.5, diffusion=[[a]],
    )
    grid = GridSpec((-2.5, -2.5), (2.5, 2.5), (101, 101))
    errs = []
    for rho in (0.5, 0.25):
        out = split_solve(kolmogorov, SplitConfig(rho=rho, iterations=0), grid)
        want = kolmogorov_gaussian_solution(0.5, out.state.points(), a, kappa, P)
        errs.append(float(np.max(np.abs(out.state.values.ravel() - want))))
    ratio = errs[0] / errs[1]
    elapsed = time.perf_counter() - start
    ok = err <= 1e-4 and ratio >= 1.7 and elapsed < 120
    report(8, "splitting scheme", ok,
           f"reduced example max error {err:.1e} (tol 1e-4); rho 0.5 -> 0.25 errors "
           f"{errs[0]:.2e} -> {errs[1]:.2e}, ratio {ratio:.2f} (need 1.7); {elapsed:.1f} s")


def test_degeneracy_cutoff():
    drift = [PolyField(2, {(1, 0): -1.0}), PolyField(2, {(0, 1): -1.0})]
    g = lambda Y: 1.0 / (1.0 + np.sum(Y * Y, axis=1))
    x, t = [0.3, 0.2], 0.1
    sampler = MonteCarloSpec(100_000, seed=77)
    base = weak_expectation(KernelApprox(drift, order=2, horizon=1.0), t, x, g, sampler)["estimate"]
    eps = (1e-2, 1e-3, 1e-4)
    diffs = []
    for e in eps:
        mask = DegeneracyMask(e, lambda X: np.abs(X[:, 0]))
        k = KernelApprox(drift, order=2, horizon=1.0, mask=mask)
        diffs.append(abs(weak_expectation(k, t, x, g, sampler)["estimate"] - base))
    monotone = all(a > b for a, b in zip(diffs, diffs[1:]))
    scaled = [d / math.sqrt(e) for d, e in zip(diffs, eps)]
    bounded = max(scaled[1:]) <= scaled[0]
    shown = ", ".join(f"{d:.2e}" for d in diffs)
    report(9, "degeneracy cutoff", monotone and bounded,
           f"|E_eps - E| = {shown} for eps 1e-2, 1e-3, 1e-4; "
           f"diff/sqrt(eps) = {', '.join(f'{s:.2e}' for s in scaled)}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
