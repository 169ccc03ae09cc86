"""Independent reference solutions: closed-form kernels, Euler-Maruyama and a
Crank-Nicolson finite-difference solver.

Every oracle uses the operator du/dt = sum a_ij d_ij u + b . grad u, whose
diffusion is the Laplacian rather than half of it; the matching SDE is
dX = b(X) dt + sqrt(2) L dW with L L^T = A.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import InputError, StateError
from .grid import GridState, mesh_points
from .kernel import ConstantDiffusion, MonteCarloSpec

KINDS = ("free_heat", "constant_drift", "ou")


@dataclass(frozen=True)
class ExactKernelKind:
    """Which closed-form kernel to evaluate; ``mu`` is used by constant_drift."""

    kind: str
    mu: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "mu", tuple(float(m) for m in np.atleast_1d(self.mu)))

    @classmethod
    def free_heat(cls):
        return cls("free_heat")

    @classmethod
    def constant_drift(cls, mu):
        return cls("constant_drift", mu)

    @classmethod
    def ou(cls):
        return cls("ou")


def exact_kernel(kind, t, x, y):
    """Closed-form p(t, x, y); rows of ``x`` and ``y`` broadcast against each other."""
    if not t > 0:
        raise InputError(f"time must be positive, got {t}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scalar = x.ndim <= 1 and y.ndim <= 1
    x2, y2 = np.atleast_2d(x), np.atleast_2d(y)
    if x.ndim == 0 or (x.ndim == 1 and y.ndim == 1 and x.size != y.size):
        x2, y2 = x2.reshape(-1, 1), y2.reshape(-1, 1)
    n = max(x2.shape[-1], y2.shape[-1])
    if kind.kind == "ou":
        if n != 1:
            raise InputError("the OU kernel is one-dimensional")
        var = -math.expm1(-2 * t)
        dz = y2[..., 0] - x2[..., 0] * math.exp(-t)
        val = np.exp(-dz ** 2 / (2 * var)) / math.sqrt(2 * math.pi * var)
    else:
        dx = x2 - y2
        if kind.kind == "constant_drift":
            mu = np.asarray(kind.mu)
            if mu.size != n:
                raise InputError(f"drift has {mu.size} components, points have {n}")
            dx = dx + mu * t
        q = np.sum(dx * dx, axis=-1)
        val = (4 * math.pi * t) ** (-n / 2) * np.exp(-q / (4 * t))
    return float(val.reshape(-1)[0]) if scalar and np.size(val) == 1 else val


def euler_maruyama_expectation(drift, diffusion, x0, t, g, steps, paths, seed=0, chunk=65_536):
    """E[g(X_t)] for dX = b(t, X) dt + sqrt(2) L dW by Euler-Maruyama.

    ``diffusion`` is a :class:`ConstantDiffusion` (or None for the identity).
    Chunks draw from independent streams spawned from ``seed``, so the result
    is deterministic for a given seed and chunk size.
    """
    if steps < 1 or paths < 1:
        raise InputError(f"steps and paths must be >= 1, got {steps}, {paths}")
    drift = list(drift)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    n = x0.size
    if len(drift) != n:
        raise InputError(f"expected {n} drift fields, got {len(drift)}")
    L = np.eye(n) if diffusion is None else ConstantDiffusion.from_matrix(
        getattr(diffusion, "matrix", diffusion)).transform
    h = t / steps
    scale = math.sqrt(2 * h)
    sampler = MonteCarloSpec(paths, seed, chunk)
    values = []
    start = 0
    for m, rng in sampler.streams():
        X = np.broadcast_to(x0, (m, n)).copy()
        for j in range(steps):
            b = np.stack([np.broadcast_to(f.evaluate(j * h, X), (m,)) for f in drift], axis=-1)
            bad = ~np.all(np.isfinite(b), axis=-1)
            if bad.any():
                raise StateError(f"non-finite drift on path {start + int(np.argmax(bad))} at step {j}")
            X += b * h + scale * rng.standard_normal((m, n)) @ L.T
        values.append(np.broadcast_to(np.asarray(g(X), dtype=float), (m,)))
        start += m
    v = np.concatenate(values)
    std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return {"estimate": float(np.mean(v)), "std_error": std / math.sqrt(v.size), "paths": int(v.size)}


def _clamped_first(m, h):
    """Central first difference with constant extension past both ends."""
    D = sparse.diags([-np.ones(m - 1), np.ones(m - 1)], [-1, 1], format="lil")
    D[0, 0] = -1
    D[m - 1, m - 1] = 1
    return D.tocsr() / (2 * h)


def _clamped_second(m, h):
    D = sparse.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1], format="lil")
    D[0, 0] = -1
    D[m - 1, m - 1] = -1
    return D.tocsr() / h ** 2


def _fd_operator(drift, A, axes, t):
    n = len(axes)
    sizes = [len(a) for a in axes]
    first, second = [], []
    for i, a in enumerate(axes):
        h = a[1] - a[0]
        mats = [sparse.identity(s, format="csr") for s in sizes]
        mats[i] = _clamped_first(sizes[i], h)
        first.append(_kron_all(mats))
        mats[i] = _clamped_second(sizes[i], h)
        second.append(_kron_all(mats))
    op = sum(A[i, i] * second[i] for i in range(n))
    for i in range(n):
        for j in range(i + 1, n):
            if A[i, j] != 0:
                op = op + 2 * A[i, j] * (first[i] @ first[j])
    pts = mesh_points(axes)
    for i, f in enumerate(drift):
        b = np.broadcast_to(np.asarray(f.evaluate(t, pts), dtype=float), pts.shape[:1])
        if np.any(b):
            op = op + sparse.diags(b) @ first[i]
    return sparse.csc_matrix(op)


def _kron_all(mats):
    out = mats[0]
    for m in mats[1:]:
        out = sparse.kron(out, m, format="csr")
    return out


def crank_nicolson_solve(drift, axes, f, dt, T, diffusion=None):
    """Crank-Nicolson solution of du/dt = sum a_ij d_ij u + b . grad u on a grid.

    Second-order central differences in space with constant extension past
    the boundary; ``f`` is vectorized over points (M, n).  Time-dependent
    drifts are frozen at each step's midpoint.  Returns a :class:`GridState`
    at time T (the final step is shortened to land on T).
    """
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    n = len(axes)
    if n > 2:
        raise InputError(f"the finite-difference oracle supports n <= 2, got {n}")
    if not dt > 0 or not T > 0:
        raise InputError("dt and T must be positive")
    drift = list(drift)
    if len(drift) != n:
        raise InputError(f"expected {n} drift fields, got {len(drift)}")
    A = np.eye(n) if diffusion is None else np.atleast_2d(getattr(diffusion, "matrix", diffusion))
    state = GridState.from_function(axes, f)
    u = state.values.ravel()
    varying = any(fld.time_dependent for fld in drift)
    eye = sparse.identity(u.size, format="csc")
    t, cache = 0.0, {}
    while t < T - 1e-14 * T:
        h = min(dt, T - t)
        key = (h, t + h / 2 if varying else 0.0)
        if key not in cache:
            op = _fd_operator(drift, A, axes, key[1])
            try:
                lu = splu(sparse.csc_matrix(eye - 0.5 * h * op))
            except RuntimeError as exc:
                raise StateError(f"singular Crank-Nicolson system: {exc}") from exc
            cache = {key: (op, lu)}
        op, lu = cache[key]
        u = lu.solve(u + 0.5 * h * (op @ u))
        t += h
    return GridState(axes, u.reshape(state.shape), T)


def reduced_example_solution(t, x, sigma, mu, f, g, nodes=80):
    """u(t, x) = (heat smoothing of f with variance sigma^2 t)(x1) + g(x2 + mu t).

    ``f`` and ``g`` are vectorized scalar functions; ``x`` is (2,) or (M, 2).
    The smoothing integral uses Gauss-Hermite quadrature with ``nodes`` nodes.
    """
    if t < 0:
        raise InputError(f"time must be >= 0, got {t}")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    x = np.atleast_2d(x)
    x1, x2 = x[:, 0], x[:, 1]
    if t == 0:
        first = np.asarray(f(x1), dtype=float)
    else:
        z, w = np.polynomial.hermite_e.hermegauss(nodes)
        vals = np.asarray(f(x1[:, None] + sigma * math.sqrt(t) * z[None, :]), dtype=float)
        first = vals @ w / math.sqrt(2 * math.pi)
    out = first + np.asarray(g(x2 + mu * t), dtype=float)
    return float(out[0]) if scalar else out


def kolmogorov_moments(t, a, kappa):
    """Covariance at time t of X for dX1 = sqrt(2a) dW, dX2 = kappa X1 dt."""
    return np.array([
        [2 * a * t, kappa * a * t ** 2],
        [kappa * a * t ** 2, 2 * a * kappa ** 2 * t ** 3 / 3],
    ])


def kolmogorov_gaussian_solution(t, x, a, kappa, P):
    """Exact u(t, x) for du/dt = a d11 u + kappa x1 d2 u with u(0, x) = exp(-x.P x / 2).

    The transport term does not commute with the diffusion, which makes
    this a test case for splitting error.  ``x`` is (2,) or (M, 2).
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    x = np.atleast_2d(x)
    P = np.asarray(P, dtype=float)
    m = np.stack([x[:, 0], x[:, 1] + kappa * t * x[:, 0]], axis=-1)
    S = kolmogorov_moments(t, a, kappa)
    M = np.linalg.inv(np.linalg.inv(P) + S)
    pref = 1.0 / math.sqrt(np.linalg.det(np.eye(2) + P @ S))
    out = pref * np.exp(-0.5 * np.einsum("mi,ij,mj->m", m, M, m))
    return float(out[0]) if scalar else out


__all__ = [
    "ExactKernelKind",
    "crank_nicolson_solve",
    "euler_maruyama_expectation",
    "exact_kernel",
    "kolmogorov_gaussian_solution",
    "kolmogorov_moments",
    "reduced_example_solution",
]
