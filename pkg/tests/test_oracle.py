import math

import numpy as np
import pytest

from parakernel.errors import InputError, StateError
from parakernel.fields import FourierField, PolyField
from parakernel.kernel import KernelApprox, QuadratureSpec, cauchy_solve
from parakernel.oracle import (
    ExactKernelKind,
    crank_nicolson_solve,
    euler_maruyama_expectation,
    exact_kernel,
    kolmogorov_gaussian_solution,
    reduced_example_solution,
)

from conftest import constant_drift, ones

OU = [PolyField(1, {(1,): -1.0})]


def test_exact_kernel_examples():
    assert math.isclose(exact_kernel(ExactKernelKind.free_heat(), 1.0, 0.2, 0.2), (4 * math.pi) ** -0.5)
    mu, t = (0.5, -1.0), 0.2
    y = np.array([0.1, 0.3])
    peak = exact_kernel(ExactKernelKind.constant_drift(mu), t, y - np.array(mu) * t, y)
    assert math.isclose(peak, 1 / (4 * math.pi * t))
    far = exact_kernel(ExactKernelKind.ou(), 40.0, 0.7, 0.4)
    assert math.isclose(far, math.exp(-0.08) / math.sqrt(2 * math.pi), rel_tol=1e-12)


def test_exact_kernel_rejects_bad_input():
    with pytest.raises(InputError):
        exact_kernel(ExactKernelKind.free_heat(), 0.0, 0.0, 0.0)
    with pytest.raises(InputError):
        exact_kernel(ExactKernelKind.ou(), 0.1, [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(InputError):
        ExactKernelKind("brownian_bridge")


@pytest.mark.parametrize("t", [0.01, 0.1, 1.0])
def test_free_heat_integrates_to_one(t):
    k = KernelApprox([FourierField.zero(1)])
    x = 0.3
    nodes, weights = QuadratureSpec().rule(1)
    half = QuadratureSpec().window_sigmas * math.sqrt(2 * t)
    y = x + half * nodes[:, 0]
    total = half * np.sum(weights * exact_kernel(ExactKernelKind.free_heat(), t, x, y[:, None]))
    assert abs(total - 1) <= 1e-10
    assert abs(cauchy_solve(k, t, [x], ones) - 1) <= 1e-10


def test_euler_maruyama_examples():
    r = euler_maruyama_expectation([FourierField.zero(1)], None, [0.4], 0.5, lambda X: X[:, 0], 4, 20000, seed=1)
    assert abs(r["estimate"] - 0.4) <= 3 * r["std_error"]
    r = euler_maruyama_expectation(constant_drift((0.8,)), None, [0.4], 0.5, lambda X: X[:, 0], 4, 20000, seed=2)
    assert abs(r["estimate"] - 0.8) <= 3 * r["std_error"]
    r = euler_maruyama_expectation(OU, None, [0.0], 1.0, lambda X: X[:, 0] ** 2, 200, 40000, seed=3)
    assert abs(r["estimate"] - (1 - math.exp(-2))) <= 3 * r["std_error"]


def test_euler_maruyama_is_deterministic_and_weakly_first_order():
    g = lambda X: X[:, 0]
    a = euler_maruyama_expectation(OU, None, [1.0], 1.0, g, 5, 1000, seed=7)
    assert a == euler_maruyama_expectation(OU, None, [1.0], 1.0, g, 5, 1000, seed=7)
    bias = [euler_maruyama_expectation(OU, None, [1.0], 1.0, g, s, 1_000_000, seed=s)["estimate"]
            - math.exp(-1) for s in (5, 10)]
    assert 1.5 <= bias[0] / bias[1] <= 2.5


def test_euler_maruyama_errors():
    boom = type("Boom", (), {"dim": 1, "time_dependent": False,
                             "evaluate": lambda self, t, X: np.where(X[:, 0] > 3, np.inf, 0.0)})()
    with pytest.raises(StateError, match="path"):
        euler_maruyama_expectation([boom], None, [3.5], 0.1, lambda X: X[:, 0], 2, 10)
    with pytest.raises(InputError):
        euler_maruyama_expectation(OU, None, [0.0], 0.1, lambda X: X[:, 0], 0, 10)


def heat_error(m, T=0.1, v=0.05, dt=None):
    axis = np.linspace(-3, 3, m)
    dt = dt or T / 400
    f = lambda X: np.exp(-X[:, 0] ** 2 / (2 * v))
    u = crank_nicolson_solve([FourierField.zero(1)], (axis,), f, dt, T)
    exact = math.sqrt(v / (v + 2 * T)) * np.exp(-axis ** 2 / (2 * (v + 2 * T)))
    return np.max(np.abs(u.values - exact))


def test_crank_nicolson_heat_gaussian_and_refinement():
    assert heat_error(400) <= 1e-4
    assert heat_error(101) / heat_error(201) >= 3.5


def test_crank_nicolson_translation_and_constants():
    axis = np.linspace(-4, 4, 401)
    mu, T, v = 1.0, 0.2, 0.1
    f = lambda X: np.exp(-X[:, 0] ** 2 / (2 * v))
    u = crank_nicolson_solve(constant_drift((mu,)), (axis,), f, T / 200, T)
    exact = math.sqrt(v / (v + 2 * T)) * np.exp(-(axis + mu * T) ** 2 / (2 * (v + 2 * T)))
    assert np.max(np.abs(u.values - exact)) <= 1e-4
    axes = (np.linspace(-1, 1, 21), np.linspace(-1, 1, 21))
    drift = [FourierField(2, [[0, 1.0, 0.0]], [0.3], [0.0]), FourierField.constant(-0.5, 2)]
    u = crank_nicolson_solve(drift, axes, lambda X: np.ones(len(X)), 0.01, 0.1)
    assert np.max(np.abs(u.values - 1)) <= 1e-8
    with pytest.raises(InputError):
        crank_nicolson_solve([FourierField.zero(3)] * 3, axes + axes[:1], ones, 0.1, 0.1)


def test_reduced_example_examples():
    f = lambda y: np.exp(-y ** 2)
    g = lambda z: np.sin(z)
    x = np.array([0.3, -0.2])
    assert reduced_example_solution(0.0, x, 0.4, 1.0, f, g) == pytest.approx(f(0.3) + g(-0.2))
    zero = lambda y: 0.0 * y
    assert reduced_example_solution(0.5, x, 0.4, 1.0, zero, lambda z: z) == pytest.approx(-0.2 + 0.5)
    assert reduced_example_solution(0.5, x, 0.4, 1.0, lambda y: y, zero) == pytest.approx(0.3)
    with pytest.raises(InputError):
        reduced_example_solution(-1.0, x, 0.4, 1.0, f, g)


def test_kolmogorov_solution_matches_monte_carlo():
    a, kappa, t = 0.3, 1.0, 0.5
    P = np.diag([2.0, 3.0])
    x = np.array([0.4, -0.3])
    rng = np.random.default_rng(5)
    steps, paths = 100, 200_000
    h = t / steps
    X = np.tile(x, (paths, 1))
    for _ in range(steps):
        X1 = X[:, 0].copy()
        X[:, 0] += math.sqrt(2 * a * h) * rng.standard_normal(paths)
        X[:, 1] += kappa * 0.5 * (X1 + X[:, 0]) * h
    vals = np.exp(-0.5 * np.einsum("mi,ij,mj->m", X, P, X))
    est, se = vals.mean(), vals.std() / math.sqrt(len(vals))
    assert abs(kolmogorov_gaussian_solution(t, x, a, kappa, P) - est) <= 4 * se
    assert kolmogorov_gaussian_solution(0.0, x, a, kappa, P) == pytest.approx(
        math.exp(-0.5 * x @ P @ x))
