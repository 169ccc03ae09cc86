"""Alternating-direction splitting for block semi-elliptic Cauchy problems.

The operator splits into a diffusion block acting on the first d coordinates
and a transport block acting on the rest,

    du/dt = L_D u + L_T u,
    L_D = sum_{i,j<d} a_ij d_ij + sum_{i<d} mu_i d_i,
    L_T = sum_{i>=d} mu_i d_i.

Each step runs a waveform relaxation: the Diffusion Step solves
du/dt = L_D u + L_T u_prev with the kernel of :mod:`parakernel.kernel` per
transport slice, and the Vector Field Step solves du/dt = L_T u + L_D u_prev
by characteristics.  Iterates are kept at the times 0, dt/2 and dt so the
source integrals can use Simpson's rule.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .errors import DivergenceError, HorizonExceededError, InputError
from .fields import FourierField, is_zero
from .grid import GridSpec, GridState, mesh_points
from .horizon import certified_horizon
from .kernel import ConstantDiffusion, GridKernel, KernelApprox, QuadratureSpec

log = logging.getLogger(__name__)

DENSE_LIMIT = 400


@dataclass(eq=False)
class BlockProblem:
    """du/dt = sum_{i,j<d} a_ij d_ij u + sum_i mu_i d_i u with u(0) = initial.

    ``drift_diffusive`` holds mu_1..mu_d and ``drift_transport`` holds
    mu_{d+1}..mu_n; every field is a function of all n coordinates.
    ``initial`` is vectorized over points (M, n).  ``kernel_horizon``
    overrides the certified horizon of the diffusion-block expansion, which
    is required when the diffusive drift is polynomial.
    """

    n: int
    d: int
    drift_diffusive: list
    drift_transport: list
    initial: object
    T: float
    diffusion: object = None
    kernel_horizon: float = None

    def __post_init__(self):
        if not 1 <= self.d <= self.n:
            raise InputError(f"need 1 <= d <= n, got d={self.d}, n={self.n}")
        self.drift_diffusive = list(self.drift_diffusive)
        self.drift_transport = list(self.drift_transport)
        if len(self.drift_diffusive) != self.d or len(self.drift_transport) != self.n - self.d:
            raise InputError(
                f"expected {self.d} diffusive and {self.n - self.d} transport drift fields"
            )
        for f in self.drift_diffusive + self.drift_transport:
            if f.dim != self.n:
                raise InputError(f"drift fields must live in dimension {self.n}, got {f.dim}")
            if f.time_dependent:
                raise InputError("the splitting solver needs time-independent drifts")
        if not self.T > 0:
            raise InputError(f"final time must be positive, got {self.T}")
        if self.diffusion is None:
            self.diffusion = ConstantDiffusion.identity(self.d)
        elif not isinstance(self.diffusion, ConstantDiffusion):
            self.diffusion = ConstantDiffusion.from_matrix(self.diffusion)
        if self.diffusion.dim != self.d:
            raise InputError(f"diffusion block must be {self.d}x{self.d}")

    @property
    def drift(self):
        return self.drift_diffusive + self.drift_transport

    def certified_horizon(self, R=1.0):
        """Horizon of the diffusive-block expansion (inf for zero drift)."""
        if self.kernel_horizon is not None:
            return float(self.kernel_horizon)
        if all(is_zero(f) for f in self.drift_diffusive):
            return math.inf
        if all(isinstance(f, FourierField) for f in self.drift_diffusive):
            return certified_horizon(self.drift_diffusive, R)
        raise InputError("polynomial diffusive drift needs an explicit kernel_horizon")


@dataclass(frozen=True)
class SplitConfig:
    """Time dilatation ``rho``, dilated step ``tau_step``, corrections and tolerances.

    Physical time advances by rho * tau_step per step.  ``rho=None`` picks
    min(1, 0.9 beta) / 2 from the diffusive-block horizon beta, lowered if
    needed to respect the transport CFL limit of :class:`SplitOperators`.
    ``iterations=0`` gives the plain alternating step without corrections,
    which is first order in the step length.
    """

    rho: float = None
    tau_step: float = 0.1
    iterations: int = 3
    tol: float = 1e-8
    rk_substeps: int = 8
    order: int = 2
    quad: QuadratureSpec = QuadratureSpec()

    def __post_init__(self):
        if self.rho is not None and not 0 < self.rho <= 1:
            raise InputError(f"rho must lie in (0, 1], got {self.rho}")
        if not self.tau_step > 0:
            raise InputError(f"tau_step must be positive, got {self.tau_step}")
        if self.iterations < 0:
            raise InputError(f"iterations must be >= 0, got {self.iterations}")
        if not self.tol > 0:
            raise InputError(f"tol must be positive, got {self.tol}")
        if self.rk_substeps < 1:
            raise InputError(f"rk_substeps must be >= 1, got {self.rk_substeps}")

    def resolved(self, problem, R=1.0, max_dt=math.inf):
        """Fill in the default rho, capped so that rho * tau_step <= ``max_dt``."""
        if self.rho is not None:
            return self
        beta = problem.certified_horizon(R)
        return replace(self, rho=min(min(1.0, 0.9 * beta) / 2, max_dt / self.tau_step))

    @property
    def dt(self):
        return self.rho * self.tau_step


@dataclass
class SplitResult:
    state: GridState
    report: dict = field(default_factory=dict)


def _depends_on(f, coords):
    if isinstance(f, FourierField):
        active = (f.sin != 0) | (f.cos != 0)
        return bool(np.any(f.freqs[active][:, [1 + c for c in coords]] != 0))
    return any(v != 0 and any(g[c] for c in coords) for g, v in f.terms.items())


FIRST = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])
SECOND = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])


def _stencil(V, axis, weights):
    half = len(weights) // 2
    pad = [(0, 0)] * V.ndim
    pad[axis] = (half, half)
    P = np.pad(V, pad, mode="edge")
    m = V.shape[axis]
    out = np.zeros_like(V)
    for k, w in enumerate(weights):
        if w:
            out += w * np.take(P, np.arange(k, k + m), axis=axis)
    return out


def diff1(V, axis, h):
    """Sixth-order central first derivative with constant extension."""
    return _stencil(V, axis, FIRST) / h


def diff2(V, axis, h):
    """Sixth-order central second derivative with constant extension."""
    return _stencil(V, axis, SECOND) / h ** 2


class SplitOperators:
    """Grid operators of one problem: P_s, T_s, L_D and L_T, with caches.

    ``boundary_hits`` counts quadrature nodes and characteristic feet that
    fell outside the grid and took the constant extension.
    """

    def __init__(self, problem, axes, cfg):
        self.problem = problem
        self.cfg = cfg
        self.axes = tuple(np.asarray(a, dtype=float) for a in axes)
        if len(self.axes) != problem.n:
            raise InputError(f"grid has {len(self.axes)} axes, problem has n={problem.n}")
        self.shape = tuple(len(a) for a in self.axes)
        self.h = np.array([a[1] - a[0] for a in self.axes])
        self.lo = np.array([a[0] for a in self.axes])
        self.points = mesh_points(self.axes)
        d = problem.d
        self.diff_shape = self.shape[:d]
        self.slices = mesh_points(self.axes[d:]) if d < problem.n else np.zeros((1, 0))
        self.mu = [np.asarray(f.evaluate(0.0, self.points), dtype=float).reshape(self.shape)
                   * np.ones(self.shape) for f in problem.drift]
        self.R = float(max(np.max(np.abs(a)) for a in self.axes[:d]))
        self.shared = not any(_depends_on(f, range(d, problem.n)) for f in problem.drift_diffusive)
        self.boundary_hits = 0
        self._kernels = {}
        self._feet = {}
        self._warned = False

    def max_stable_dt(self):
        """Largest dt with transport CFL number max|mu_i| dt / h_i <= 1.

        The source quadratures treat L_T explicitly, so grid modes with
        |mu| dt / h well above one are amplified from step to step.
        """
        rates = [np.max(np.abs(self.mu[i])) / self.h[i] for i in range(self.problem.d, self.problem.n)]
        rate = max(rates, default=0.0)
        return math.inf if rate == 0 else 1.0 / rate

    def cfl(self, dt):
        return dt / self.max_stable_dt()

    # diffusion block
    def _slice_kernel(self, j):
        d = self.problem.d
        fixed = {d + i: float(v) for i, v in enumerate(self.slices[j])}
        drift = [f.restrict(fixed) if fixed else f for f in self.problem.drift_diffusive]
        return KernelApprox(drift, order=self.cfg.order, form="wkb_exponent",
                            diffusion=self.problem.diffusion,
                            horizon=self.problem.certified_horizon(self.R), R=self.R)

    def _operator(self, s, j):
        key = (s, 0 if self.shared else j)
        if key not in self._kernels:
            k = self._slice_kernel(j)
            try:
                op = GridKernel(k, s, self.axes[: self.problem.d], self.cfg.quad)
            except HorizonExceededError as exc:
                raise HorizonExceededError(s, k.horizon, "reduce rho or tau_step") from exc
            self.boundary_hits += op.outside
            size = int(np.prod(self.diff_shape))
            if size <= DENSE_LIMIT:
                eye = np.eye(size).reshape((size,) + self.diff_shape)
                mat = np.stack([op(e).ravel() for e in eye], axis=1)
                op = lambda V, mat=mat: (mat @ V.reshape(mat.shape[1], -1)).reshape(V.shape)
            self._kernels[key] = op
        return self._kernels[key]

    def diffuse(self, V, s):
        """P_s V: the d-dimensional kernel applied on every transport slice."""
        if s == 0:
            return V
        flat = V.reshape(self.diff_shape + (-1,))
        if self.shared and not isinstance(self._operator(s, 0), GridKernel):
            return self._operator(s, 0)(flat).reshape(self.shape)
        out = [self._operator(s, j)(flat[..., j]) for j in range(flat.shape[-1])]
        return np.stack(out, axis=-1).reshape(self.shape)

    def L_D(self, V):
        d = self.problem.d
        A = self.problem.diffusion.matrix
        out = np.zeros_like(V)
        for i in range(d):
            out += A[i, i] * diff2(V, i, self.h[i])
            for j in range(i + 1, d):
                if A[i, j] != 0:
                    out += 2 * A[i, j] * diff1(diff1(V, i, self.h[i]), j, self.h[j])
            out += self.mu[i] * diff1(V, i, self.h[i])
        return out

    # transport block
    def L_T(self, V):
        out = np.zeros_like(V)
        for i in range(self.problem.d, self.problem.n):
            out += self.mu[i] * diff1(V, i, self.h[i])
        return out

    def _velocity(self, X):
        v = np.zeros_like(X)
        for i, f in enumerate(self.problem.drift_transport):
            v[:, self.problem.d + i] = f.evaluate(0.0, X)
        return v

    def flow(self, X, s):
        """RK4 integration of dx/dt = mu_T(x) for time s."""
        m = self.cfg.rk_substeps
        h = s / m
        X = X.copy()
        for _ in range(m):
            k1 = self._velocity(X)
            k2 = self._velocity(X + 0.5 * h * k1)
            k3 = self._velocity(X + 0.5 * h * k2)
            k4 = self._velocity(X + h * k3)
            X += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return X

    def _foot(self, s):
        if s not in self._feet:
            X = self.flow(self.points, s)
            idx = (X - self.lo) / self.h
            hi = np.array(self.shape) - 1
            outside = int(np.count_nonzero(np.any((idx < -1e-9) | (idx > hi + 1e-9), axis=1)))
            if outside and not self._warned:
                log.warning("characteristic feet left the grid; using constant extension")
                self._warned = True
            self.boundary_hits += outside
            self._feet[s] = np.clip(idx, 0, hi).T
        return self._feet[s]

    def transport(self, V, s):
        """T_s V = V(F^s x), with F the transport flow."""
        if s == 0 or not self.problem.drift_transport:
            return V
        coords = self._foot(s)
        return ndimage.map_coordinates(V, coords, order=3, mode="nearest").reshape(self.shape)

    def propagate(self, kind, V, s):
        return self.diffuse(V, s) if kind == "diffusion" else self.transport(V, s)


def _duhamel(ops, kind, base, sources, dt):
    """base(t) + int_0^t E_{t-s} S(s) ds at t = 0, dt/2, dt.

    E is the semigroup of ``kind``.  Both integrals use Simpson's rule; the
    value of S at dt/4 needed on the half step comes from the quadratic
    through the three stored levels.
    """
    h = dt / 2
    S0, Sh, Sd = sources
    E = lambda V, s: ops.propagate(kind, V, s)
    quarter = 0.375 * S0 + 0.75 * Sh - 0.125 * Sd
    return [
        base[0],
        base[1] + h / 6 * (E(S0, h) + 4 * E(quarter, h / 2) + Sh),
        base[2] + dt / 6 * (E(S0, dt) + 4 * E(Sh, h) + Sd),
    ]


def _source_values(source, s, ops):
    vals = np.asarray(source(s, ops.points), dtype=float)
    return np.broadcast_to(vals.reshape(-1) if vals.ndim else vals, ops.points.shape[:1]).reshape(ops.shape)


def vector_field_step(state, drift_transport, dt, source=None, rk_substeps=8):
    """Advance ``state`` by the transport flow over dt.

    The transport fields act on the last ``len(drift_transport)``
    coordinates.  ``source(s, X)`` adds its time integral along the
    characteristic by the trapezoid rule.
    """
    if not dt > 0:
        raise InputError(f"dt must be positive, got {dt}")
    n = len(state.axes)
    drift_transport = list(drift_transport)
    d = n - len(drift_transport)
    if d < 1:
        raise InputError("at least one coordinate must lie outside the transport block")
    problem = BlockProblem(n, d, [FourierField.zero(n)] * d, drift_transport, None, 1.0)
    ops = SplitOperators(problem, state.axes, SplitConfig(rho=1.0, rk_substeps=rk_substeps))
    out = ops.transport(state.values, dt)
    if source is not None:
        g0, g1 = (_source_values(source, s, ops) for s in (0.0, dt))
        out = out + dt / 2 * (ops.transport(g0, dt) + g1)
    return state.replace(out, state.time + dt)


def diffusion_step(state, problem, dt, source=None, cfg=SplitConfig(rho=1.0)):
    """Apply the diffusion-block kernel on every transport slice over dt.

    ``source(s, X)`` is added by the trapezoid rule, propagated by the kernel.
    """
    if not dt > 0:
        raise InputError(f"dt must be positive, got {dt}")
    ops = SplitOperators(problem, state.axes, cfg)
    out = ops.diffuse(state.values, dt)
    if source is not None:
        g0, g1 = (_source_values(source, s, ops) for s in (0.0, dt))
        out = out + dt / 2 * (ops.diffuse(g0, dt) + g1)
    return state.replace(out, state.time + dt)


def ad_step(state, problem, cfg, ops=None, dt=None):
    """One alternating-direction step of physical length rho * tau_step (or ``dt``).

    Returns ``(GridState, info)`` where ``info`` records the correction norms
    max|u^{2l+1} - u^{2l-1}| and whether ``tol`` was reached.
    """
    cfg = cfg.resolved(problem)
    if ops is None:
        ops = SplitOperators(problem, state.axes, cfg)
    dt = cfg.dt if dt is None else dt
    U0 = state.values
    h = dt / 2
    heat = [U0, ops.diffuse(U0, h), ops.diffuse(U0, dt)]
    trans = [U0, ops.transport(U0, h), ops.transport(U0, dt)]
    diff = _duhamel(ops, "diffusion", heat, [ops.L_T(v) for v in trans], dt)
    deltas = []
    for _ in range(cfg.iterations):
        # du/dt = L_T u + L_D diff, rewritten with L_D diff = d/dt diff - L_T trans so
        # that the stiff diffusion operator never enters a quadrature rule
        gap = [ops.L_T(a - b) for a, b in zip(diff, trans)]
        trans = _duhamel(ops, "transport", diff, gap, dt)
        new = _duhamel(ops, "diffusion", heat, [ops.L_T(v) for v in trans], dt)
        deltas.append(float(np.max(np.abs(new[2] - diff[2]))))
        diff = new
        if len(deltas) >= 3 and deltas[-1] > deltas[-2] > deltas[-3]:
            raise DivergenceError(
                f"splitting corrections grow ({deltas[-3]:.3g} -> {deltas[-1]:.3g}); use a smaller rho"
            )
        if deltas[-1] < cfg.tol:
            break
    info = {"deltas": deltas, "converged": bool(deltas and deltas[-1] < cfg.tol)}
    return state.replace(diff[2], state.time + dt), info


def split_solve(problem, cfg, grid):
    """Run AD steps from u(0) = problem.initial up to problem.T.

    ``grid`` is a :class:`GridSpec` or a tuple of axis arrays.  The last step
    is shortened so the run ends exactly at T.
    """
    axes = grid.axes() if isinstance(grid, GridSpec) else tuple(grid)
    state = GridState.from_function(axes, problem.initial)
    ops = SplitOperators(problem, axes, cfg)
    cfg = cfg.resolved(problem, ops.R, ops.max_stable_dt())
    ops.cfg = cfg
    cfl = ops.cfl(cfg.dt)
    if cfl > 1 + 1e-9:
        log.warning("transport CFL number %.3g exceeds 1; the step may be unstable", cfl)
    steps = max(1, math.ceil(problem.T / cfg.dt - 1e-9))
    history = []
    for j in range(steps):
        dt = problem.T - state.time if j == steps - 1 else cfg.dt
        state, info = ad_step(state, problem, cfg, ops, dt)
        history.append(info["deltas"])
    state = state.replace(state.values, problem.T)
    report = {
        "steps": steps,
        "rho": cfg.rho,
        "dt": cfg.dt,
        "cfl": cfl,
        "corrections": history,
        "boundary_hits": ops.boundary_hits,
    }
    return SplitResult(state, report)


__all__ = [
    "BlockProblem",
    "SplitConfig",
    "SplitOperators",
    "SplitResult",
    "ad_step",
    "diff1",
    "diff2",
    "diffusion_step",
    "split_solve",
    "vector_field_step",
]
