"""Evaluating and integrating the density approximation.

The density of du/dt = sum a_ij d_ij u + b . grad u with a constant SPD
matrix A is obtained from the Laplacian case by the change of variables
z = L^{-1} x with L L^T = A:

    p(t, x, y) = det(A)^{-1/2} p_z(t, L^{-1} x, L^{-1} y)

and p_z uses the expansion of :mod:`parakernel.wkb` in either exponent form
exp(sum c_k t^k) or series form sum d_k t^k.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import HorizonExceededError, InputError, UnsupportedRepresentationError
from .fields import FourierField, is_zero
from .horizon import certified_horizon
from .wkb import default_degree_cap, expand_batch

FORMS = ("d_series", "wkb_exponent")
MAX_QUAD_DIM = 3


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor Gauss-Legendre rule: ``nodes`` per axis over +-``window_sigmas`` std devs."""

    nodes: int = 32
    window_sigmas: float = 8.0

    def __post_init__(self):
        if self.nodes < 1 or not self.window_sigmas > 0:
            raise InputError(f"invalid quadrature spec {self}")

    def rule(self, d):
        """Tensor nodes on [-1, 1]^d and their weights."""
        x, w = np.polynomial.legendre.leggauss(self.nodes)
        grids = np.meshgrid(*([x] * d), indexing="ij")
        wgrids = np.meshgrid(*([w] * d), indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=-1)
        weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
        return nodes, weights


@dataclass(frozen=True)
class MonteCarloSpec:
    """Sample count, master seed and chunk size for importance sampling."""

    paths: int = 100_000
    seed: int = 0
    chunk: int = 16_384

    def __post_init__(self):
        if self.paths <= 0:
            raise InputError(f"number of paths must be positive, got {self.paths}")
        if self.chunk <= 0:
            raise InputError(f"chunk size must be positive, got {self.chunk}")

    def streams(self):
        """(size, Generator) per chunk, derived from the master seed."""
        sizes = [self.chunk] * (self.paths // self.chunk)
        if self.paths % self.chunk:
            sizes.append(self.paths % self.chunk)
        seeds = np.random.SeedSequence(self.seed).spawn(len(sizes))
        return [(m, np.random.Generator(np.random.PCG64(s))) for m, s in zip(sizes, seeds)]


RNG_ALGORITHM = "numpy PCG64, SeedSequence.spawn per chunk"


@dataclass(frozen=True, eq=False)
class ConstantDiffusion:
    """Constant SPD diffusion matrix with its Cholesky change of variables."""

    matrix: np.ndarray
    transform: np.ndarray
    inv_transform: np.ndarray
    inv_matrix: np.ndarray
    det: float

    @classmethod
    def from_matrix(cls, A):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise InputError(f"diffusion matrix must be square, got shape {A.shape}")
        if not np.allclose(A, A.T, rtol=1e-12, atol=1e-14):
            raise InputError("diffusion matrix is not symmetric")
        eig = np.linalg.eigvalsh(A)
        if eig.min() <= 0:
            raise InputError(f"diffusion matrix is not positive definite: eigenvalue {eig.min():.6g}")
        L = np.linalg.cholesky(A)
        Linv = np.linalg.inv(L)
        return cls(A, L, Linv, Linv.T @ Linv, float(np.prod(eig)))

    @classmethod
    def identity(cls, n):
        return cls.from_matrix(np.eye(n))

    @property
    def dim(self):
        return self.matrix.shape[0]

    def quadratic_distance(self, dx):
        """dx^T A^{-1} dx, the leading-order squared distance."""
        dx = np.asarray(dx, dtype=float)
        return np.einsum("...i,ij,...j->...", dx, self.inv_matrix, dx)


def reduce_constant_diffusion(A, drift):
    """Change of variables turning sum a_ij d_ij into the Laplacian.

    Returns ``(ConstantDiffusion, drift_z)`` where drift_z_i(z) =
    sum_j (L^{-1})_ij b_j(L z) is the drift in the new coordinates.
    """
    cd = A if isinstance(A, ConstantDiffusion) else ConstantDiffusion.from_matrix(A)
    drift = list(drift)
    n = cd.dim
    if len(drift) != n:
        raise InputError(f"expected {n} drift fields, got {len(drift)}")
    if np.array_equal(cd.transform, np.eye(n)):
        return cd, drift
    composed = [b.compose_linear(cd.transform) for b in drift]
    out = []
    for i in range(n):
        acc = None
        for j in range(n):
            w = cd.inv_transform[i, j]
            if w == 0 or is_zero(composed[j]):
                continue
            term = w * composed[j]
            if acc is None:
                acc = term
            else:
                sum_ = acc + term
                if sum_ is NotImplemented:
                    raise UnsupportedRepresentationError("cannot mix Fourier and polynomial drift components")
                acc = sum_
        if acc is None:
            acc = type(drift[i]).zero(n)
        out.append(acc)
    return cd, out


@dataclass(frozen=True)
class DegeneracyMask:
    """Zero the kernel where the ellipticity function is <= epsilon.

    ``ellipticity`` maps points of shape (M, n) to values of shape (M,).
    """

    epsilon: float
    ellipticity: object

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InputError(f"epsilon must be positive, got {self.epsilon}")

    def degenerate(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        vals = np.broadcast_to(np.asarray(self.ellipticity(pts), dtype=float), pts.shape[:1])
        return vals <= self.epsilon


@dataclass(eq=False)
class KernelApprox:
    """Evaluable density approximation of order ``order``.

    ``drift`` is given in the original coordinates.  ``horizon`` defaults to
    the certified bound for Fourier drifts on the ball of radius ``R``
    (infinite for zero drift); polynomial drifts need an explicit horizon.
    """

    drift: list
    order: int = 2
    degree_cap: int = None
    form: str = "d_series"
    diffusion: ConstantDiffusion = None
    horizon: float = None
    mask: DegeneracyMask = None
    t0: float = 0.0
    time_inhomogeneous: bool = False
    R: float = 1.0
    base_point: np.ndarray = None
    variable_diffusion: bool = False
    drift_z: list = field(init=False, repr=False)

    def __post_init__(self):
        self.drift = list(self.drift)
        n = len(self.drift)
        if self.form not in FORMS:
            raise InputError(f"form must be one of {FORMS}, got {self.form!r}")
        if self.order < 0:
            raise InputError(f"order must be >= 0, got {self.order}")
        if self.diffusion is not None and not isinstance(self.diffusion, ConstantDiffusion):
            self.diffusion = ConstantDiffusion.from_matrix(self.diffusion)
        if self.diffusion is None:
            self.diffusion = ConstantDiffusion.identity(n)
        _, self.drift_z = reduce_constant_diffusion(self.diffusion, self.drift)
        if self.degree_cap is None:
            self.degree_cap = default_degree_cap(self.drift_z, self.order)
        if self.horizon is None:
            self.horizon = self._default_horizon()
        if not self.horizon > 0:
            raise InputError(f"horizon must be positive, got {self.horizon}")
        if self.base_point is not None:
            self.base_point = np.asarray(self.base_point, dtype=float).reshape(-1)

    def _default_horizon(self):
        if all(is_zero(b) for b in self.drift_z):
            return math.inf
        if all(isinstance(b, FourierField) for b in self.drift_z):
            Rz = self.R * np.linalg.norm(self.diffusion.inv_transform, 2)
            return certified_horizon(self.drift_z, Rz, self.variable_diffusion)
        raise InputError(
            "no certified horizon for polynomial drift; pass horizon= explicitly "
            "(the empirical ratio diagnostic can guide the choice)"
        )

    @property
    def dim(self):
        return len(self.drift)

    def check_time(self, t):
        if not t > 0:
            raise InputError(f"time must be positive, got {t}")
        if t > self.horizon:
            raise HorizonExceededError(t, self.horizon, "split the time with semigroup_compose")

    def to_z(self, x):
        return np.asarray(x, dtype=float) @ self.diffusion.inv_transform.T

    def expansions(self, Y):
        """Expansion batch at base points ``Y`` given in original coordinates."""
        Z = self.to_z(np.atleast_2d(Y))
        return expand_batch(self.drift_z, Z, self.t0, self.order, self.degree_cap,
                            self.time_inhomogeneous)

    def expansion_at(self, y):
        return self.expansions(np.atleast_2d(y)).expansion(0)

    def correction(self, t, X, Y, batch=None):
        """Non-Gaussian factor at pairs (X, Y): exp(sum c t^k) or sum d t^k."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if batch is None:
            batch = self.expansions(Y)
        Zx = self.to_z(X)
        if self.form == "wkb_exponent":
            return np.exp(batch.log_correction(t, Zx))
        return batch.series(t, Zx)

    def density(self, t, X, Y, batch=None):
        """Density at paired rows of ``X`` and ``Y`` (each (M, n) or (n,))."""
        self.check_time(t)
        n = self.dim
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        single = X.ndim <= 1 and Y.ndim <= 1
        X = np.atleast_2d(X).reshape(-1, n)
        Y = np.atleast_2d(Y).reshape(-1, n)
        M = max(X.shape[0], Y.shape[0])
        Xb = np.broadcast_to(X, (M, n))
        dz = self.to_z(Xb - Y)
        q = np.sum(dz * dz, axis=-1)
        gauss = (4 * math.pi * t) ** (-n / 2) * np.exp(-q / (4 * t)) / math.sqrt(self.diffusion.det)
        val = gauss * self.correction(t, Xb, Y, batch)
        if self.mask is not None:
            bad = self.mask.degenerate(Xb) | self.mask.degenerate(np.broadcast_to(Y, (M, n)))
            val = np.where(bad, 0.0, val)
        return float(val[0]) if single else val


def eval_density(k, t, x, y=None):
    """Density p(t, x, y); ``y`` defaults to the kernel's base point."""
    if y is None:
        if k.base_point is None:
            raise InputError("no base point: pass y or set KernelApprox.base_point")
        y = k.base_point
    return k.density(t, x, y)


def _check_dim(k):
    if k.dim > MAX_QUAD_DIM:
        raise InputError(
            f"tensor quadrature supports n <= {MAX_QUAD_DIM}, got n={k.dim}; use weak_expectation"
        )


def _call_payoff(f, Y):
    vals = np.asarray(f(Y), dtype=float)
    vals = np.broadcast_to(vals, Y.shape[:1])
    if not np.all(np.isfinite(vals)):
        raise InputError("payoff returned non-finite values")
    return vals


def cauchy_solve(k, t, x, f, quad=QuadratureSpec()):
    """u(t, x) = int p(t, x, y) f(y) dy by tensor Gauss-Legendre quadrature.

    The window is centred at x and spans ``quad.window_sigmas`` standard
    deviations sqrt(2t) of the leading Gaussian in the reduced coordinates.
    ``f`` is vectorized: points (M, n) -> values (M,).
    """
    k.check_time(t)
    _check_dim(k)
    x = np.asarray(x, dtype=float).reshape(-1)
    nodes, weights = quad.rule(k.dim)
    half = quad.window_sigmas * math.sqrt(2 * t)
    Z = k.to_z(x) + half * nodes
    Y = Z @ k.diffusion.transform.T
    jac = half ** k.dim * math.sqrt(k.diffusion.det)
    p = k.density(t, x, Y)
    return float(np.sum(weights * p * _call_payoff(f, Y)) * jac)


def semigroup_compose(k, t1, t2, x, y, quad=QuadratureSpec()):
    """int p(t1, x, z) p(t2, z, y) dz by tensor quadrature around the bridge mean."""
    k.check_time(t1)
    k.check_time(t2)
    _check_dim(k)
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    nodes, weights = quad.rule(k.dim)
    zx, zy = k.to_z(x), k.to_z(y)
    center = (t2 * zx + t1 * zy) / (t1 + t2)
    half = quad.window_sigmas * math.sqrt(2 * t1 * t2 / (t1 + t2))
    Zn = center + half * nodes
    Yn = Zn @ k.diffusion.transform.T
    jac = half ** k.dim * math.sqrt(k.diffusion.det)
    first = k.density(t1, x, Yn)
    second = k.density(t2, Yn, y[None, :], batch=k.expansions(y[None, :]))
    return float(np.sum(weights * first * second) * jac)


def weak_expectation(k, t, x, g, sampler=MonteCarloSpec()):
    """E[g(X_t) | X_0 = x] by importance sampling from the leading Gaussian.

    Samples y = x + L sqrt(2t) xi and weights each by the non-Gaussian
    correction (zero on the degeneracy mask).  Returns a dict with
    ``estimate``, ``std_error`` and ``paths``.
    """
    k.check_time(t)
    x = np.asarray(x, dtype=float).reshape(-1)
    n = k.dim
    values = []
    for m, rng in sampler.streams():
        xi = rng.standard_normal((m, n))
        Y = x + math.sqrt(2 * t) * xi @ k.diffusion.transform.T
        w = k.correction(t, x, Y)
        if k.mask is not None:
            bad = k.mask.degenerate(Y) | k.mask.degenerate(x[None, :])
            w = np.where(bad, 0.0, w)
        values.append(w * _call_payoff(g, Y))
    v = np.concatenate(values)
    M = v.shape[0]
    std = float(np.std(v, ddof=1)) if M > 1 else 0.0
    return {"estimate": float(np.mean(v)), "std_error": std / math.sqrt(M), "paths": M}


def composed_expectation(k, t, x, g, steps, sampler=MonteCarloSpec()):
    """E[g(X_t)] over ``steps`` chained kernel steps of length t/steps.

    Each step samples from the leading Gaussian of the current point and
    multiplies the running weight by that step's correction, so t may exceed
    the horizon as long as t/steps does not.
    """
    if steps < 1:
        raise InputError(f"steps must be >= 1, got {steps}")
    h = t / steps
    k.check_time(h)
    x = np.asarray(x, dtype=float).reshape(-1)
    n = k.dim
    values = []
    for m, rng in sampler.streams():
        cur = np.broadcast_to(x, (m, n)).copy()
        w = np.ones(m)
        for _ in range(steps):
            xi = rng.standard_normal((m, n))
            nxt = cur + math.sqrt(2 * h) * xi @ k.diffusion.transform.T
            step_w = k.correction(h, cur, nxt)
            if k.mask is not None:
                step_w = np.where(k.mask.degenerate(cur) | k.mask.degenerate(nxt), 0.0, step_w)
            w = w * step_w
            cur = nxt
        values.append(w * _call_payoff(g, cur))
    v = np.concatenate(values)
    M = v.shape[0]
    std = float(np.std(v, ddof=1)) if M > 1 else 0.0
    return {"estimate": float(np.mean(v)), "std_error": std / math.sqrt(M), "paths": M}


class GridKernel:
    """The kernel operator v -> int p(t, x, y) v(y) dy on a uniform tensor grid.

    Grid values are interpolated at the quadrature nodes with cubic splines;
    nodes outside the grid take the nearest boundary value (constant
    extension), and are counted in ``outside``.  Weights are built once per
    instance and reused for every application.
    """

    def __init__(self, k, t, axes, quad=QuadratureSpec()):
        k.check_time(t)
        _check_dim(k)
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        d = len(self.axes)
        if d != k.dim:
            raise InputError(f"grid has {d} axes, kernel has dim {k.dim}")
        self.shape = tuple(len(a) for a in self.axes)
        self.lo = np.array([a[0] for a in self.axes])
        self.h = np.array([(a[-1] - a[0]) / (len(a) - 1) if len(a) > 1 else 1.0 for a in self.axes])
        mesh = np.meshgrid(*self.axes, indexing="ij")
        X = np.stack([m.ravel() for m in mesh], axis=-1)
        nodes, weights = quad.rule(d)
        half = quad.window_sigmas * math.sqrt(2 * t)
        offsets = (half * nodes) @ k.diffusion.transform.T
        Y = (X[:, None, :] + offsets[None, :, :]).reshape(-1, d)
        Xr = np.repeat(X, len(weights), axis=0)
        p = k.density(t, Xr, Y).reshape(X.shape[0], len(weights))
        jac = half ** d * math.sqrt(k.diffusion.det)
        self.weights = p * weights[None, :] * jac
        idx = (Y - self.lo) / self.h
        hi = np.array(self.shape) - 1
        self.outside = int(np.count_nonzero(np.any((idx < 0) | (idx > hi), axis=1)))
        self.coords = np.clip(idx, 0, hi).T

    def __call__(self, V):
        V = np.asarray(V, dtype=float)
        if V.shape != self.shape:
            raise InputError(f"grid values have shape {V.shape}, expected {self.shape}")
        vals = ndimage.map_coordinates(V, self.coords, order=3, mode="nearest")
        return np.sum(self.weights * vals.reshape(self.weights.shape), axis=1).reshape(self.shape)


def cauchy_solve_composed(k, t, x, f, steps, quad=QuadratureSpec(), points=None):
    """u(t, x) through ``steps`` kernel applications of length t/steps on a grid.

    The grid is centred at x and spans the quadrature window of the full time
    t plus one step's window, so the constant extension at its edges stays
    outside the region the final integral sees.
    """
    if steps < 1:
        raise InputError(f"steps must be >= 1, got {steps}")
    h = t / steps
    k.check_time(h)
    _check_dim(k)
    if steps == 1:
        return cauchy_solve(k, t, x, f, quad)
    x = np.asarray(x, dtype=float).reshape(-1)
    n = k.dim
    if points is None:
        points = {1: 201, 2: 61, 3: 25}[n]
    radius = quad.window_sigmas * (math.sqrt(2 * t) + math.sqrt(2 * h))
    span = radius * np.abs(k.diffusion.transform).sum(axis=1)
    axes = [np.linspace(x[i] - span[i], x[i] + span[i], points) for i in range(n)]
    op = GridKernel(k, h, axes, quad)
    mesh = np.meshgrid(*axes, indexing="ij")
    G = np.stack([m.ravel() for m in mesh], axis=-1)
    V = _call_payoff(f, G).reshape(op.shape)
    for _ in range(steps - 1):
        V = op(V)
    lo = np.array([a[0] for a in axes])
    step = np.array([a[1] - a[0] for a in axes])

    def interp(Y):
        c = ((Y - lo) / step).T
        return ndimage.map_coordinates(V, c, order=3, mode="nearest")

    return cauchy_solve(k, h, x, interp, quad)


__all__ = [
    "ConstantDiffusion",
    "DegeneracyMask",
    "GridKernel",
    "KernelApprox",
    "MonteCarloSpec",
    "QuadratureSpec",
    "RNG_ALGORITHM",
    "cauchy_solve",
    "cauchy_solve_composed",
    "composed_expectation",
    "eval_density",
    "reduce_constant_diffusion",
    "semigroup_compose",
    "weak_expectation",
]
