"""Expansion coefficients of the fundamental solution of du/dt = lap u + b . grad u.

The density is written as

    p(t, x, y) = (4 pi t)^(-n/2) exp(-|x - y|^2 / 4t + sum_k c_k(x, y) t^k)

where every c_k is a polynomial in dx = x - y.  The c_k follow from

    dx . grad c_0 = -1/2 b . dx
    k c_k + dx . grad c_k = R_{k-1}
    R_{k-1} = -d_t c_{k-1} + lap c_{k-1} + sum_r grad c_r . grad c_{k-1-r} + b . grad c_{k-1}

solved along rays from y by the ray integral of :mod:`parakernel.polyalg`.
With time-dependent drift each c_k is also a polynomial in elapsed time t,
stored as layers indexed by the time power l; only layers with k + l <= K are
kept, since they alone contribute to the first K powers of t.

All the work happens on arrays with a leading batch axis of base points
(:class:`ExpansionBatch`); :class:`WkbExpansion` is the single-point view.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, StateError
from .fields import PolyField
from .polyalg import LocalPolynomial, basis

FOURIER_LOCAL_DEGREE = 4


def default_degree_cap(drift, K):
    loc = 0
    for b in drift:
        if isinstance(b, PolyField):
            loc = max(loc, b.degree)
        else:
            loc = max(loc, FOURIER_LOCAL_DEGREE)
    return max(2 * K + loc, 4)


def _check_drift(drift, n=None):
    drift = list(drift)
    if not drift:
        raise InputError("drift must contain one field per coordinate")
    n = len(drift) if n is None else n
    if len(drift) != n:
        raise InputError(f"expected {n} drift fields, got {len(drift)}")
    for b in drift:
        if b.dim != n:
            raise InputError(f"drift field of dim {b.dim} in an n={n} problem")
    return drift


class _Engine:
    """Recursion state over a batch of base points."""

    def __init__(self, drift, Y, t0, K, D, inhomogeneous):
        self.n = len(drift)
        self.B = basis(self.n, D)
        self.K = K
        self.D = D
        self.layers = K + 1 if inhomogeneous else 1
        self.Y = Y
        self.bloc = [b.localize_rows(Y, t0, D, self.layers - 1) for b in drift]
        self.C = []
        self.loss = []

    def cap(self, k):
        return self.layers - 1 - k if self.layers > 1 else 0

    def tmul(self, P, Q, cap):
        """Product in (t, dx), keeping time layers <= cap."""
        out = np.zeros(P.shape[:1] + (cap + 1, self.B.size))
        lost = np.zeros(P.shape[0], dtype=np.int64)
        for a in range(min(cap, P.shape[1] - 1) + 1):
            pa = P[:, a]
            if not pa.any():
                continue
            for b in range(min(cap - a, Q.shape[1] - 1) + 1):
                qb = Q[:, b]
                if not qb.any():
                    continue
                out[:, a + b] += self.B.mul(pa, qb)
                lost += self.B.dropped(pa, qb)
        return out, lost

    def c0(self):
        top = self.B.degs == self.D
        c = np.zeros(self.bloc[0].shape)
        lost = np.zeros(c.shape[0], dtype=np.int64)
        for m, bm in enumerate(self.bloc):
            ray = self.B.ray(bm, 1)
            c -= 0.5 * self.B.times_var(ray, m)
            lost += np.count_nonzero(ray[..., top], axis=(1, 2))
        self.C = [c]
        self.loss = [lost]
        return c

    def residual(self, k):
        """R_{k-1} built from c_0 .. c_{k-1}."""
        if len(self.C) < k:
            raise StateError(f"c_{k} needs c_0..c_{k - 1}; only {len(self.C)} available")
        cap = self.cap(k)
        prev = self.C[k - 1]
        R = np.zeros(prev.shape[:1] + (cap + 1, self.B.size))
        lost = np.zeros(prev.shape[0], dtype=np.int64)
        # time derivative (moved to the right, hence the sign): layer l
        # receives -(l + 1) * layer l + 1
        if prev.shape[1] > 1:
            top = min(cap + 1, prev.shape[1] - 1)
            R[:, :top] -= prev[:, 1:top + 1] * np.arange(1, top + 1)[None, :, None]
        R += self.B.laplacian(prev[:, :cap + 1])
        grads = [[self.B.diff(c, l) for l in range(self.n)] for c in self.C[:k]]
        for r in range(k):
            s = k - 1 - r
            if s < r:
                break
            w = 1.0 if r == s else 2.0
            for l in range(self.n):
                prod, lp = self.tmul(grads[r][l], grads[s][l], cap)
                R += w * prod
                lost += lp
        for m, bm in enumerate(self.bloc):
            prod, lp = self.tmul(bm, grads[k - 1][m], cap)
            R += prod
            lost += lp
        return R, lost

    def ck(self, k):
        R, lost = self.residual(k)
        c = self.B.ray(R, k)
        if c.shape[1] < self.layers:
            c = np.concatenate([c, np.zeros((c.shape[0], self.layers - c.shape[1], c.shape[2]))], axis=1)
        self.C.append(c)
        self.loss.append(lost)
        return c


def compute_dk(c_values):
    """Coefficients of exp(sum_k c_k t^k) = sum_k d_k t^k.

    d_0 = exp(c_0) and d_k = sum_{i=1}^k (i/k) d_{k-i} c_i.  Works along the
    last axis, so ``c_values`` may carry leading batch axes.
    """
    c = np.asarray(c_values, dtype=float)
    d = np.empty_like(c)
    d[..., 0] = np.exp(c[..., 0])
    for k in range(1, c.shape[-1]):
        i = np.arange(1, k + 1)
        d[..., k] = np.sum((i / k) * d[..., k - i] * c[..., i], axis=-1)
    return d


@dataclass
class ExpansionBatch:
    """Expansion coefficients at many base points.

    ``coeffs`` has shape (K + 1, B, layers, size): order k, base point, time
    power l, monomial.
    """

    dim: int
    base_points: np.ndarray
    order: int
    degree_cap: int
    t0: float
    time_inhomogeneous: bool
    coeffs: np.ndarray
    truncation: np.ndarray

    @property
    def basis(self):
        return basis(self.dim, self.degree_cap)

    def power_values(self, x, t=None):
        """Coefficient of t^m in the exponent at x, for m = 0..K; shape (B, K+1).

        ``x`` is one point, one point per base point, or (with a single base
        point) any number of points.  Layers of c_k with time power l feed
        power k + l.
        """
        x = np.asarray(x, dtype=float)
        dx = np.atleast_2d(x - self.base_points)
        mono = self.basis.monomials(dx)
        if self.base_points.shape[0] == 1:
            vals = np.einsum("kls,ms->mkl", self.coeffs[:, 0], mono)
        else:
            vals = np.einsum("kbls,bs->bkl", self.coeffs, mono)
        K = self.order
        out = np.zeros((vals.shape[0], K + 1))
        for k in range(K + 1):
            for l in range(vals.shape[2]):
                if k + l <= K:
                    out[:, k + l] += vals[:, k, l]
        return out

    def log_correction(self, t, x):
        pv = self.power_values(x)
        return np.polynomial.polynomial.polyval(t, pv.T)

    def series(self, t, x):
        pv = self.power_values(x)
        return np.polynomial.polynomial.polyval(t, compute_dk(pv).T)

    def expansion(self, i=0):
        """Single-point :class:`WkbExpansion` for base point ``i``."""
        y = self.base_points[i]
        tables = []
        for k in range(self.order + 1):
            layers = [LocalPolynomial(self.dim, y, self.degree_cap, self.coeffs[k, i, l])
                      for l in range(self.coeffs.shape[2])]
            if self.time_inhomogeneous:
                tables.append(layers[: self.order - k + 1])
            else:
                tables.append(layers[0])
        return WkbExpansion(self.dim, y, self.order, self.degree_cap, self.time_inhomogeneous,
                            tables, [int(v) for v in self.truncation[:, i]], self.t0)


def expand_batch(drift, Y, t0=0.0, K=2, D=None, time_inhomogeneous=False):
    """Expansions of order K at every row of ``Y`` (shape (B, n))."""
    drift = _check_drift(drift)
    n = len(drift)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y.reshape(-1, n) if n > 1 else Y.reshape(-1, 1)
    if Y.shape[-1] != n:
        raise InputError(f"base points have length {Y.shape[-1]}, expected {n}")
    if K < 0:
        raise InputError(f"order must be >= 0, got {K}")
    D = default_degree_cap(drift, K) if D is None else int(D)
    if D < 0:
        raise InputError(f"degree cap must be >= 0, got {D}")
    inhom = bool(time_inhomogeneous) and any(b.time_dependent for b in drift)
    eng = _Engine(drift, Y, float(t0), K, D, inhom)
    eng.c0()
    for k in range(1, K + 1):
        eng.ck(k)
    coeffs = np.stack(eng.C)
    return ExpansionBatch(n, Y, K, D, float(t0), inhom, coeffs, np.stack(eng.loss))


@dataclass
class WkbExpansion:
    """Table of c_0..c_K about one base point.

    ``c_tables[k]`` is a :class:`LocalPolynomial`, or for time-inhomogeneous
    expansions a list whose l-th entry multiplies t^l.
    """

    dim: int
    base_point: np.ndarray
    order: int
    degree_cap: int
    time_inhomogeneous: bool
    c_tables: list
    truncation_report: list = field(default_factory=list)
    t0: float = 0.0

    def __post_init__(self):
        if len(self.c_tables) != self.order + 1:
            raise InputError(f"expected {self.order + 1} coefficient tables, got {len(self.c_tables)}")
        self.base_point = np.asarray(self.base_point, dtype=float).reshape(-1)

    def layers(self, k):
        c = self.c_tables[k]
        return list(c) if self.time_inhomogeneous else [c]

    def c_value(self, k, x, t=0.0):
        """c_k(t, x) = sum_l c_{k,l}(x) t^l."""
        return sum(p(x) * t ** l for l, p in enumerate(self.layers(k)))

    def power_values(self, x):
        """Coefficients of t^0..t^K of the exponent correction at x."""
        out = np.zeros(self.order + 1)
        for k in range(self.order + 1):
            for l, p in enumerate(self.layers(k)):
                if k + l <= self.order:
                    out[k + l] += p(x)
        return out

    def d_values(self, x):
        return compute_dk(self.power_values(x))

    def log_correction(self, t, x):
        return float(np.polynomial.polynomial.polyval(t, self.power_values(x)))

    def series(self, t, x):
        return float(np.polynomial.polynomial.polyval(t, self.d_values(x)))

    def to_json(self):
        c = []
        for k in range(self.order + 1):
            entries = []
            for l, p in enumerate(self.layers(k)):
                for gamma, value in p.terms().items():
                    entries.append({"gamma": list(gamma), "l": l, "value": value})
            c.append(entries)
        return {
            "dim": self.dim,
            "y": self.base_point.tolist(),
            "t0": self.t0,
            "K": self.order,
            "D": self.degree_cap,
            "time_inhomogeneous": self.time_inhomogeneous,
            "truncation": list(self.truncation_report),
            "c": c,
        }

    @classmethod
    def from_json(cls, obj):
        n, y, K, D = obj["dim"], obj["y"], obj["K"], obj["D"]
        inhom = obj.get("time_inhomogeneous", False)
        tables = []
        for k, entries in enumerate(obj["c"]):
            nl = K - k + 1 if inhom else 1
            terms = [dict() for _ in range(nl)]
            for e in entries:
                terms[e["l"]][tuple(e["gamma"])] = e["value"]
            layers = [LocalPolynomial.from_terms(t, n, y, D) for t in terms]
            tables.append(layers if inhom else layers[0])
        return cls(n, y, K, D, inhom, tables, list(obj.get("truncation", [])), obj.get("t0", 0.0))

    def allclose(self, other, atol=0.0):
        if (self.order, self.degree_cap, self.time_inhomogeneous) != (
            other.order, other.degree_cap, other.time_inhomogeneous
        ):
            return False
        for k in range(self.order + 1):
            for p, q in zip(self.layers(k), other.layers(k), strict=True):
                if not np.allclose(p.coeffs, q.coeffs, atol=atol, rtol=0.0):
                    return False
        return np.array_equal(self.base_point, other.base_point)


def compute_c0(drift, y, t0=0.0, D=4, time_inhomogeneous=False, K=0):
    """c_0 = -1/2 sum_m dx_m int_0^1 b_m(t0, y + s dx) ds as a polynomial in dx.

    With ``time_inhomogeneous`` the result is a list of K + 1 time layers.
    """
    drift = _check_drift(drift)
    y = np.asarray(y, dtype=float).reshape(1, -1)
    if y.shape[1] != len(drift):
        raise InputError(f"base point has length {y.shape[1]}, expected {len(drift)}")
    inhom = bool(time_inhomogeneous)
    eng = _Engine(drift, y, t0, K, D, inhom)
    c = eng.c0()[0]
    polys = [LocalPolynomial(len(drift), y[0], D, c[l], int(eng.loss[0][0])) for l in range(c.shape[0])]
    return polys if inhom else polys[0]


def compute_ck(cs, drift, k, t0=0.0):
    """c_k from the predecessors ``cs = [c_0, ..., c_{k-1}]`` (or longer).

    Entries of ``cs`` are :class:`LocalPolynomial` values, or lists of time
    layers for time-inhomogeneous expansions (layer count of c_0 is K + 1).
    """
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if len(cs) < k:
        raise StateError(f"c_{k} needs c_0..c_{k - 1}; only {len(cs)} given")
    drift = _check_drift(drift)
    inhom = isinstance(cs[0], (list, tuple))
    first = cs[0][0] if inhom else cs[0]
    K = len(cs[0]) - 1 if inhom else k
    if inhom and k > K:
        raise InputError(f"k={k} exceeds the order K={K} fixed by the c_0 time layers")
    eng = _Engine(drift, first.base_point[None, :], t0, K, first.degree_cap, inhom)
    layers = eng.layers
    for j in range(k):
        entry = cs[j]
        rows = [p.coeffs for p in (entry if inhom else [entry])]
        arr = np.zeros((1, layers, first.basis.size))
        arr[0, : len(rows)] = rows
        eng.C.append(arr)
        eng.loss.append(np.zeros(1, dtype=np.int64))
    c = eng.ck(k)[0]
    loss = int(eng.loss[-1][0])
    polys = [LocalPolynomial(first.dim, first.base_point, first.degree_cap, c[l], loss)
             for l in range(K - k + 1 if inhom else 1)]
    return polys if inhom else polys[0]


def expand(drift, y, t0=0.0, K=2, D=None, time_inhomogeneous=False):
    """Expansion of order K about the single base point ``y``."""
    drift = _check_drift(drift)
    y = np.asarray(y, dtype=float).reshape(1, -1)
    return expand_batch(drift, y, t0, K, D, time_inhomogeneous).expansion(0)


def residual_polynomial(exp, drift, k):
    """R_{k-1} recomputed from an expansion, for residual checks."""
    eng = _Engine(list(drift), exp.base_point[None, :], exp.t0, exp.order, exp.degree_cap,
                  exp.time_inhomogeneous)
    for j in range(k):
        rows = [p.coeffs for p in exp.layers(j)]
        arr = np.zeros((1, eng.layers, eng.B.size))
        arr[0, : len(rows)] = rows
        eng.C.append(arr)
    R, _ = eng.residual(k)
    return R[0]


__all__ = [
    "ExpansionBatch",
    "WkbExpansion",
    "compute_c0",
    "compute_ck",
    "compute_dk",
    "default_degree_cap",
    "expand",
    "expand_batch",
    "residual_polynomial",
]
