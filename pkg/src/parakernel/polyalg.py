"""Truncated multivariate polynomial algebra in powers of ``dx = x - y``.

Polynomials are stored densely over the graded monomial basis of total degree
``<= D`` in ``n`` variables.  The basis index tables are cached per ``(n, D)``;
every array-level routine here accepts a leading batch axis so the expansion
engine can work on many base points at once.  :class:`LocalPolynomial` is the
single-base-point value type built on top.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb

import numpy as np
from scipy import sparse

from . import _kernels
from .errors import InputError


def _exponents(n, D):
    out = []
    for deg in range(D + 1):
        # graded, lexicographically descending within a degree
        for combo in combinations_with_replacement(range(n), deg):
            e = [0] * n
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


class Basis:
    """Index tables for the monomials of total degree <= D in n variables."""

    def __init__(self, n, D):
        if n < 1:
            raise InputError(f"dimension must be >= 1, got {n}")
        if D < 0:
            raise InputError(f"degree cap must be >= 0, got {D}")
        self.n = n
        self.D = D
        exps = _exponents(n, D)
        self.exps = np.array(exps, dtype=np.int64).reshape(len(exps), n)
        self.size = len(exps)
        self.degs = self.exps.sum(axis=1)
        self.index = {e: i for i, e in enumerate(exps)}

        ia, ib, ic = [], [], []
        for a, ea in enumerate(exps):
            da = self.degs[a]
            for b, eb in enumerate(exps):
                if da + self.degs[b] > D:
                    continue
                ia.append(a)
                ib.append(b)
                ic.append(self.index[tuple(x + y for x, y in zip(ea, eb))])
        self.mul_a = np.array(ia, dtype=np.int64)
        self.mul_b = np.array(ib, dtype=np.int64)
        self.mul_c = np.array(ic, dtype=np.int64)
        self._scatter = None

        # d/dx_l : coefficient at gamma moves to gamma - e_l times gamma_l
        self.deriv = []
        self.second = []
        self.shift = []
        for l in range(n):
            src, dst, fac = [], [], []
            src2, dst2, fac2 = [], [], []
            ssrc, sdst = [], []
            for i, e in enumerate(exps):
                if e[l] >= 1:
                    f = list(e)
                    f[l] -= 1
                    src.append(i)
                    dst.append(self.index[tuple(f)])
                    fac.append(e[l])
                if e[l] >= 2:
                    f = list(e)
                    f[l] -= 2
                    src2.append(i)
                    dst2.append(self.index[tuple(f)])
                    fac2.append(e[l] * (e[l] - 1))
                if self.degs[i] < D:
                    f = list(e)
                    f[l] += 1
                    ssrc.append(i)
                    sdst.append(self.index[tuple(f)])
            self.deriv.append(
                (np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), np.array(fac, dtype=float))
            )
            self.second.append(
                (np.array(src2, dtype=np.int64), np.array(dst2, dtype=np.int64), np.array(fac2, dtype=float))
            )
            self.shift.append((np.array(ssrc, dtype=np.int64), np.array(sdst, dtype=np.int64)))

    @property
    def scatter(self):
        if self._scatter is None:
            self._scatter = _kernels._scatter_matrix(self.mul_c, self.size)
        return self._scatter

    def multi_index(self, i):
        return tuple(int(v) for v in self.exps[i])

    # -- batched array operations; arrays have shape (..., size) ------------

    def mul(self, P, Q):
        P = np.asarray(P, dtype=float)
        Q = np.asarray(Q, dtype=float)
        shape = np.broadcast_shapes(P.shape, Q.shape)
        P2 = np.broadcast_to(P, shape).reshape(-1, self.size)
        Q2 = np.broadcast_to(Q, shape).reshape(-1, self.size)
        scatter = None if _kernels.HAVE_NUMBA else self.scatter
        out = _kernels.mul_rows(P2, Q2, self.mul_a, self.mul_b, self.mul_c, self.size, scatter)
        return out.reshape(shape)

    def dropped(self, P, Q):
        shape = np.broadcast_shapes(np.shape(P), np.shape(Q))
        P2 = np.broadcast_to(P, shape).reshape(-1, self.size)
        Q2 = np.broadcast_to(Q, shape).reshape(-1, self.size)
        return _kernels.dropped_products(P2, Q2, self.degs, self.D).reshape(shape[:-1])

    def diff(self, P, l):
        src, dst, fac = self.deriv[l]
        out = np.zeros_like(P, dtype=float)
        out[..., dst] = P[..., src] * fac
        return out

    def laplacian(self, P):
        out = np.zeros_like(P, dtype=float)
        for src, dst, fac in self.second:
            out[..., dst] += P[..., src] * fac
        return out

    def gradient_dot(self, P, Q):
        out = 0.0
        for l in range(self.n):
            out = out + self.mul(self.diff(P, l), self.diff(Q, l))
        return out

    def times_var(self, P, l):
        """Multiply by dx_l, dropping the top degree."""
        src, dst = self.shift[l]
        out = np.zeros_like(P, dtype=float)
        out[..., dst] = P[..., src]
        return out

    def ray(self, P, k):
        return P / (self.degs + k)

    def euler(self, P):
        """sum_l dx_l d/dx_l, which is diagonal: gamma -> |gamma|."""
        return P * self.degs

    def monomials(self, dx):
        """Monomial values dx**gamma, shape (..., size) for dx of shape (..., n)."""
        dx = np.asarray(dx, dtype=float)
        if dx.shape[-1] != self.n:
            raise InputError(f"point has length {dx.shape[-1]}, expected {self.n}")
        pw = dx[..., :, None] ** np.arange(self.D + 1)
        out = np.ones(dx.shape[:-1] + (self.size,))
        for i in range(self.n):
            out = out * pw[..., i, self.exps[:, i]]
        return out

    def evaluate(self, P, dx):
        return np.sum(P * self.monomials(dx), axis=-1)


@lru_cache(maxsize=64)
def basis(n, D):
    return Basis(int(n), int(D))


@lru_cache(maxsize=64)
def _shift_pairs(n, D):
    """(gamma, delta, gamma - delta, prod binom) over all delta <= gamma in basis(n, D)."""
    B = basis(n, D)
    g_idx, d_idx, r_idx, coef = [], [], [], []
    for gi in range(B.size):
        g = B.exps[gi]
        ranges = [range(int(v) + 1) for v in g]
        for delta in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(n, -1).T:
            c = 1
            for gv, dv in zip(g, delta):
                c *= comb(int(gv), int(dv))
            g_idx.append(gi)
            d_idx.append(B.index[tuple(int(v) for v in delta)])
            r_idx.append(B.index[tuple(int(v) for v in g - delta)])
            coef.append(float(c))
    return (np.array(g_idx), np.array(d_idx), np.array(r_idx), np.array(coef))


def shift_rows(P, h, n, D_in, D_out=None):
    """Re-expand polynomials in powers of (dx - h).

    ``P`` has shape (size_in,) or (B, size_in) over basis(n, D_in); ``h`` has
    shape (n,) or (B, n).  Returns coefficients over basis(n, D_out), which
    defaults to D_in; degrees above D_out are dropped.
    """
    D_out = D_in if D_out is None else D_out
    Bin = basis(n, D_in)
    Bout = basis(n, D_out)
    g_idx, d_idx, r_idx, coef = _shift_pairs(n, D_in)
    P = np.asarray(P, dtype=float)
    h = np.atleast_2d(np.asarray(h, dtype=float))
    hp = Bin.monomials(h)
    if P.ndim == 1:
        W = sparse.csr_matrix((P[g_idx] * coef, (r_idx, d_idx)), shape=(Bin.size, Bin.size))
        out = np.asarray(hp @ W)
        if out.shape[0] == 1:
            out = out[0]
    else:
        # separate polynomial per row
        terms = P[:, g_idx] * coef * hp[:, r_idx]
        M = sparse.csr_matrix((np.ones(len(d_idx)), (np.arange(len(d_idx)), d_idx)),
                              shape=(len(d_idx), Bin.size))
        out = np.asarray((M.T @ terms.T).T)
    return _truncate(out, n, D_in, D_out)


def _truncate(P, n, D_in, D_out):
    if D_out == D_in:
        return P
    Bin = basis(n, D_in)
    Bout = basis(n, D_out)
    out = np.zeros(P.shape[:-1] + (Bout.size,))
    if D_out < D_in:
        out[...] = P[..., : Bout.size]
    else:
        out[..., : Bin.size] = P
    return out


@dataclass(frozen=True, eq=False)
class LocalPolynomial:
    """Truncated polynomial sum_gamma p_gamma (x - y)**gamma about a base point y.

    Coefficients live in a dense vector over ``basis(dim, degree_cap)``; absent
    monomials are zero.  ``truncation_loss`` counts monomial products that were
    dropped because they exceeded the degree cap while building this value.
    """

    dim: int
    base_point: np.ndarray
    degree_cap: int
    coeffs: np.ndarray
    truncation_loss: int = field(default=0)

    def __post_init__(self):
        y = np.asarray(self.base_point, dtype=float).reshape(-1)
        if y.shape[0] != self.dim:
            raise InputError(f"base point has length {y.shape[0]}, expected dim={self.dim}")
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.basis.size,):
            raise InputError(f"coefficient vector has shape {c.shape}, expected ({self.basis.size},)")
        object.__setattr__(self, "base_point", y)
        object.__setattr__(self, "coeffs", c)

    @property
    def basis(self):
        return basis(self.dim, self.degree_cap)

    @classmethod
    def zero(cls, dim, base_point, degree_cap):
        return cls(dim, base_point, degree_cap, np.zeros(basis(dim, degree_cap).size))

    @classmethod
    def constant(cls, value, dim, base_point, degree_cap):
        c = np.zeros(basis(dim, degree_cap).size)
        c[0] = value
        return cls(dim, base_point, degree_cap, c)

    @classmethod
    def from_terms(cls, terms, dim, base_point, degree_cap):
        """Build from ``{gamma: value}``; terms above the cap raise InputError."""
        B = basis(dim, degree_cap)
        c = np.zeros(B.size)
        for gamma, value in dict(terms).items():
            gamma = tuple(int(g) for g in np.atleast_1d(gamma))
            if len(gamma) != dim or min(gamma) < 0:
                raise InputError(f"invalid multi-index {gamma} for dim={dim}")
            if sum(gamma) > degree_cap:
                raise InputError(f"multi-index {gamma} exceeds degree cap {degree_cap}")
            c[B.index[gamma]] += value
        return cls(dim, base_point, degree_cap, c)

    def terms(self, atol=0.0):
        """Nonzero coefficients as ``{gamma: value}``."""
        B = self.basis
        return {B.multi_index(i): float(v) for i, v in enumerate(self.coeffs) if abs(v) > atol}

    def coefficient(self, gamma):
        gamma = tuple(int(g) for g in np.atleast_1d(gamma))
        if sum(gamma) > self.degree_cap:
            return 0.0
        return float(self.coeffs[self.basis.index[gamma]])

    def degree(self):
        nz = np.nonzero(self.coeffs)[0]
        return int(self.basis.degs[nz].max()) if nz.size else 0

    def _like(self, coeffs, loss=0):
        return LocalPolynomial(self.dim, self.base_point, self.degree_cap, coeffs,
                               self.truncation_loss + loss)

    def _check(self, other):
        if other.dim != self.dim:
            raise InputError(f"dimension mismatch: {self.dim} vs {other.dim}")
        if other.degree_cap != self.degree_cap:
            raise InputError(f"degree cap mismatch: {self.degree_cap} vs {other.degree_cap}")
        if not np.array_equal(other.base_point, self.base_point):
            raise InputError("base point mismatch")

    def __add__(self, other):
        if isinstance(other, LocalPolynomial):
            self._check(other)
            return self._like(self.coeffs + other.coeffs, other.truncation_loss)
        c = self.coeffs.copy()
        c[0] += other
        return self._like(c)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, LocalPolynomial):
            return multiply(self, other)
        return self._like(self.coeffs * other)

    def __rmul__(self, other):
        return self * other

    def __truediv__(self, scalar):
        return self._like(self.coeffs / scalar)

    def __call__(self, x):
        return eval_poly(self, x)

    def diff(self, l):
        return self._like(self.basis.diff(self.coeffs, l))

    def allclose(self, other, atol=1e-12, rtol=0.0):
        self._check(other)
        return np.allclose(self.coeffs, other.coeffs, atol=atol, rtol=rtol)

    def __repr__(self):
        return (f"LocalPolynomial(dim={self.dim}, y={self.base_point.tolist()}, "
                f"D={self.degree_cap}, terms={self.terms()})")


def multiply(P, Q):
    """Truncated product; dropped nonzero products are added to the loss counter."""
    P._check(Q)
    B = P.basis
    c = B.mul(P.coeffs, Q.coeffs)
    loss = int(B.dropped(P.coeffs, Q.coeffs))
    return LocalPolynomial(P.dim, P.base_point, P.degree_cap, c,
                           P.truncation_loss + Q.truncation_loss + loss)


def laplacian(P):
    return P._like(P.basis.laplacian(P.coeffs))


def gradient_dot(P, Q):
    """sum_l dP/dx_l * dQ/dx_l, truncated at the cap."""
    P._check(Q)
    B = P.basis
    loss = 0
    out = np.zeros(B.size)
    for l in range(P.dim):
        dp, dq = B.diff(P.coeffs, l), B.diff(Q.coeffs, l)
        out += B.mul(dp, dq)
        loss += int(B.dropped(dp, dq))
    return LocalPolynomial(P.dim, P.base_point, P.degree_cap, out,
                           P.truncation_loss + Q.truncation_loss + loss)


def ray_integral(P, k):
    """J_k[P](x) = int_0^1 P(y + s dx) s**(k-1) ds, i.e. p_gamma / (|gamma| + k).

    The result ``c`` solves ``k c + dx . grad c = P`` exactly.
    """
    if int(k) != k or k < 1:
        raise InputError(f"ray integral order must be a positive integer, got {k}")
    return P._like(P.basis.ray(P.coeffs, k))


def monomial_ray_integral(gamma, y, k, D):
    """int_0^1 (y + s dx)**gamma s**(k-1) ds, expanded in powers of dx by the binomial rule."""
    if int(k) != k or k < 1:
        raise InputError(f"ray integral order must be a positive integer, got {k}")
    gamma = tuple(int(g) for g in np.atleast_1d(gamma))
    y = np.asarray(y, dtype=float).reshape(-1)
    n = len(gamma)
    if y.shape[0] != n:
        raise InputError(f"base point has length {y.shape[0]}, expected {n}")
    terms = {}
    for delta in np.ndindex(*(g + 1 for g in gamma)):
        if sum(delta) > D:
            continue
        c = 1.0
        for gi, di, yi in zip(gamma, delta, y):
            c *= comb(gi, di) * yi ** (gi - di)
        terms[delta] = c / (sum(delta) + k)
    return LocalPolynomial.from_terms(terms, n, y, D)


def recenter(P, new_base):
    """Same polynomial function, re-expanded about ``new_base``."""
    new_base = np.asarray(new_base, dtype=float).reshape(-1)
    if new_base.shape[0] != P.dim:
        raise InputError(f"new base point has length {new_base.shape[0]}, expected {P.dim}")
    h = new_base - P.base_point
    c = shift_rows(P.coeffs, h, P.dim, P.degree_cap)
    return LocalPolynomial(P.dim, new_base, P.degree_cap, c, P.truncation_loss)


def eval_poly(P, x):
    """Value of P at x; ``x`` may carry leading batch axes."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != P.dim:
        raise InputError(f"point has length {x.shape[-1]}, expected {P.dim}")
    val = P.basis.evaluate(P.coeffs, x - P.base_point)
    return float(val) if np.ndim(val) == 0 else val
