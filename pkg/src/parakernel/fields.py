"""Drift and diffusion coefficient functions.

Two representations are supported: finite Fourier series in ``(t, x)`` and
polynomials in ``x``.  Both can be evaluated, localized to a truncated Taylor
polynomial about a base point, restricted to a coordinate slice, and pushed
forward through a linear change of variables.
"""
import math
from math import factorial

import numpy as np

from .errors import InputError, UnsupportedRepresentationError
from .polyalg import LocalPolynomial, basis, shift_rows


def _as_points(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != n:
        raise InputError(f"point has length {x.shape[-1]}, expected dim={n}")
    return x


class CoefficientField:
    """Common surface of :class:`FourierField` and :class:`PolyField`.

    ``growth_bound`` is an optional constant C with |D^k b| <= C^k.
    """

    dim: int
    time_dependent: bool = False
    growth_bound = None

    def _check_growth(self):
        if self.growth_bound is not None and not self.growth_bound > 0:
            raise InputError(f"growth bound must be positive, got {self.growth_bound}")

    def __call__(self, t, x):
        return self.evaluate(t, x)

    def localize(self, y, t0=0.0, D=4, time_degree=None):
        """Taylor polynomial of degree D about (t0, y).

        Returns a :class:`LocalPolynomial` in ``dx`` with time frozen at
        ``t0``; with ``time_degree=L`` returns a list of L+1 polynomials, the
        l-th holding the coefficient of ``(t - t0)**l``.
        """
        y = _as_points(y, self.dim).reshape(-1)
        if D < 0:
            raise InputError(f"degree cap must be >= 0, got {D}")
        L = 0 if time_degree is None else int(time_degree)
        rows = self.localize_rows(y[None, :], t0, D, L)[0]
        polys = [LocalPolynomial(self.dim, y, D, rows[l]) for l in range(L + 1)]
        return polys[0] if time_degree is None else polys


class FourierField(CoefficientField):
    """sum_j a_j sin(j0 t + j.x) + b_j cos(j0 t + j.x).

    Parameters
    ----------
    dim : int
        Spatial dimension n.
    freqs : array_like, shape (m, n + 1)
        Frequency vectors; column 0 is the time frequency.
    sin, cos : array_like, shape (m,)
        Sine and cosine coefficients.
    time_dependent : bool, optional
        Defaults to whether any time frequency is nonzero.  Declaring a field
        time-independent while it has time frequencies is an error.
    """

    def __init__(self, dim, freqs=(), sin=(), cos=(), time_dependent=None, growth_bound=None):
        self.dim = int(dim)
        if self.dim < 1:
            raise InputError(f"dimension must be >= 1, got {dim}")
        freqs = np.asarray(freqs, dtype=float).reshape(-1, self.dim + 1)
        sin = np.asarray(sin, dtype=float).reshape(-1)
        cos = np.asarray(cos, dtype=float).reshape(-1)
        if not (freqs.shape[0] == sin.shape[0] == cos.shape[0]):
            raise InputError("freqs, sin and cos must have the same number of terms")
        has_time = bool(np.any(freqs[:, 0] != 0))
        if time_dependent is None:
            time_dependent = has_time
        elif not time_dependent and has_time:
            raise InputError("time-independent Fourier field has nonzero time frequencies")
        self.freqs = freqs
        self.sin = sin
        self.cos = cos
        self.time_dependent = bool(time_dependent)
        self.growth_bound = growth_bound
        self._check_growth()

    @classmethod
    def constant(cls, value, dim):
        return cls(dim, np.zeros((1, dim + 1)), [0.0], [value])

    @classmethod
    def zero(cls, dim):
        return cls(dim)

    @property
    def num_terms(self):
        return self.freqs.shape[0]

    def __repr__(self):
        return f"FourierField(dim={self.dim}, terms={self.num_terms}, time_dependent={self.time_dependent})"

    def evaluate(self, t, x):
        x = _as_points(x, self.dim)
        if self.num_terms == 0:
            return np.zeros(x.shape[:-1]) if x.ndim > 1 else 0.0
        t = np.asarray(t, dtype=float)
        phase = x @ self.freqs[:, 1:].T + np.expand_dims(t, -1) * self.freqs[:, 0]
        val = np.sin(phase) @ self.sin + np.cos(phase) @ self.cos
        return float(val) if np.ndim(val) == 0 else val

    def localize_rows(self, Y, t0, D, L=0):
        """Taylor coefficients about each row of ``Y``; shape (B, L+1, size)."""
        Y = np.asarray(Y, dtype=float)
        B = basis(self.dim, D)
        out = np.zeros((Y.shape[0], L + 1, B.size))
        if self.num_terms == 0:
            return out
        inv_gamma_fact = 1.0 / np.array(
            [math.prod(factorial(int(g)) for g in e) for e in B.exps], dtype=float
        )
        inv_l_fact = 1.0 / np.array([factorial(l) for l in range(L + 1)], dtype=float)
        order = (np.arange(L + 1)[:, None] + B.degs[None, :]) % 4
        phases = Y @ self.freqs[:, 1:].T + t0 * self.freqs[:, 0]
        for j in range(self.num_terms):
            kx = self.freqs[j, 1:]
            mono = np.prod(kx[None, :] ** B.exps, axis=1) * inv_gamma_fact
            tpow = self.freqs[j, 0] ** np.arange(L + 1) * inv_l_fact
            s, c = np.sin(phases[:, j]), np.cos(phases[:, j])
            a, b = self.sin[j], self.cos[j]
            # derivative of order m of a sin(p) + b cos(p) is a sin(p + m pi/2) + b cos(p + m pi/2)
            cyc = np.stack([a * s + b * c, a * c - b * s, -a * s - b * c, -a * c + b * s], axis=1)
            out += cyc[:, order] * (tpow[:, None] * mono[None, :])
        return out

    def restrict(self, fixed):
        """Freeze the coordinates in ``fixed`` (``{index: value}``) and drop them."""
        keep = [i for i in range(self.dim) if i not in fixed]
        if not keep:
            raise InputError("cannot restrict away every coordinate")
        phi = np.zeros(self.num_terms)
        for i, v in fixed.items():
            phi += self.freqs[:, 1 + i] * v
        a, b = self.sin, self.cos
        new_sin = a * np.cos(phi) - b * np.sin(phi)
        new_cos = a * np.sin(phi) + b * np.cos(phi)
        freqs = self.freqs[:, [0] + [1 + i for i in keep]]
        return FourierField(len(keep), freqs, new_sin, new_cos, self.time_dependent, self.growth_bound)

    def compose_linear(self, L):
        """The field z -> b(L z)."""
        L = np.asarray(L, dtype=float)
        freqs = self.freqs.copy()
        freqs[:, 1:] = self.freqs[:, 1:] @ L
        return FourierField(self.dim, freqs, self.sin, self.cos, self.time_dependent)

    def __add__(self, other):
        if not isinstance(other, FourierField) or other.dim != self.dim:
            return NotImplemented
        return FourierField(self.dim, np.vstack([self.freqs, other.freqs]),
                            np.concatenate([self.sin, other.sin]),
                            np.concatenate([self.cos, other.cos]),
                            self.time_dependent or other.time_dependent)

    def __mul__(self, alpha):
        return FourierField(self.dim, self.freqs, alpha * self.sin, alpha * self.cos,
                            self.time_dependent)

    __rmul__ = __mul__

    def to_json(self):
        return {
            "type": "fourier",
            "dim": self.dim,
            "terms": [
                {"freq": f.tolist(), "sin": float(a), "cos": float(b)}
                for f, a, b in zip(self.freqs, self.sin, self.cos)
            ],
        }


class PolyField(CoefficientField):
    """Polynomial field sum_gamma p_gamma x**gamma about the origin.

    ``coeffs`` maps multi-indices to monomial coefficients.  Use
    :meth:`from_taylor` for derivative values b_gamma, which are divided by
    gamma! on ingestion.
    """

    time_dependent = False

    def __init__(self, dim, coeffs, degree=None, growth_bound=None):
        self.dim = int(dim)
        if self.dim < 1:
            raise InputError(f"dimension must be >= 1, got {dim}")
        terms = {}
        for gamma, value in dict(coeffs).items():
            gamma = tuple(int(g) for g in np.atleast_1d(gamma))
            if len(gamma) != self.dim or min(gamma) < 0:
                raise InputError(f"invalid multi-index {gamma} for dim={self.dim}")
            terms[gamma] = terms.get(gamma, 0.0) + float(value)
        maxdeg = max((sum(g) for g in terms), default=0)
        self.degree = maxdeg if degree is None else int(degree)
        if maxdeg > self.degree:
            raise InputError(f"multi-index of order {maxdeg} exceeds declared degree {self.degree}")
        self.terms = terms
        B = basis(self.dim, self.degree)
        self.vector = np.zeros(B.size)
        for gamma, value in terms.items():
            self.vector[B.index[gamma]] = value
        self.growth_bound = growth_bound
        self._check_growth()

    @classmethod
    def from_taylor(cls, dim, derivs, degree=None):
        coeffs = {}
        for gamma, value in dict(derivs).items():
            gamma = tuple(int(g) for g in np.atleast_1d(gamma))
            coeffs[gamma] = value / math.prod(factorial(g) for g in gamma)
        return cls(dim, coeffs, degree)

    @classmethod
    def from_vector(cls, dim, vector, degree):
        B = basis(dim, degree)
        return cls(dim, {B.multi_index(i): v for i, v in enumerate(vector) if v != 0.0}, degree)

    @classmethod
    def constant(cls, value, dim):
        return cls(dim, {(0,) * dim: value})

    @classmethod
    def zero(cls, dim):
        return cls(dim, {})

    def __repr__(self):
        return f"PolyField(dim={self.dim}, degree={self.degree}, terms={self.terms})"

    def evaluate(self, t, x):
        x = _as_points(x, self.dim)
        val = basis(self.dim, self.degree).evaluate(self.vector, x)
        return float(val) if np.ndim(val) == 0 else val

    def localize_rows(self, Y, t0, D, L=0):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        rows = shift_rows(self.vector, Y, self.dim, self.degree, D)
        rows = np.atleast_2d(rows)
        if rows.shape[0] != Y.shape[0]:
            rows = np.broadcast_to(rows, (Y.shape[0], rows.shape[-1]))
        out = np.zeros((Y.shape[0], L + 1, rows.shape[-1]))
        out[:, 0, :] = rows
        return out

    def restrict(self, fixed):
        keep = [i for i in range(self.dim) if i not in fixed]
        if not keep:
            raise InputError("cannot restrict away every coordinate")
        out = {}
        for gamma, value in self.terms.items():
            v = value
            for i, xi in fixed.items():
                v *= xi ** gamma[i]
            key = tuple(gamma[i] for i in keep)
            out[key] = out.get(key, 0.0) + v
        return PolyField(len(keep), out, self.degree)

    def compose_linear(self, L):
        """The field z -> p(L z), by expanding each monomial."""
        L = np.asarray(L, dtype=float)
        B = basis(self.dim, self.degree)
        lin = []
        for i in range(self.dim):
            row = np.zeros(B.size)
            if self.degree >= 1:
                for k in range(self.dim):
                    e = [0] * self.dim
                    e[k] = 1
                    row[B.index[tuple(e)]] = L[i, k]
            lin.append(row)
        one = np.zeros(B.size)
        one[0] = 1.0
        total = np.zeros(B.size)
        for gamma, value in self.terms.items():
            term = one
            for i, g in enumerate(gamma):
                for _ in range(g):
                    term = B.mul(term, lin[i])
            total += value * term
        return PolyField.from_vector(self.dim, total, self.degree)

    def __add__(self, other):
        if not isinstance(other, PolyField) or other.dim != self.dim:
            return NotImplemented
        out = dict(self.terms)
        for g, v in other.terms.items():
            out[g] = out.get(g, 0.0) + v
        return PolyField(self.dim, out)

    def __mul__(self, alpha):
        return PolyField(self.dim, {g: alpha * v for g, v in self.terms.items()}, self.degree)

    __rmul__ = __mul__

    def to_json(self):
        return {
            "type": "poly",
            "dim": self.dim,
            "coeffs": [{"gamma": list(g), "value": float(v)} for g, v in sorted(self.terms.items())],
        }


def evaluate_field(field, t, x):
    return field.evaluate(t, x)


def localize(field, y, t0=0.0, D=4, time_degree=None):
    return field.localize(y, t0, D, time_degree)


def is_zero(field):
    if isinstance(field, FourierField):
        return not (np.any(field.sin) or np.any(field.cos))
    return not any(field.terms.values())


def fourier_bounds(fields):
    """Frequency and coefficient bounds of a list of Fourier fields.

    Returns a dict with ``m0`` (per-coordinate maximal |frequency|, time
    first), ``abs_m0`` (the maximum of ``m0``), ``ebar`` (largest complex
    exponential modulus 0.5*sqrt(a**2 + b**2) over all terms) and
    ``term_count_bound`` (2*abs_m0 + 1, rounded up for non-integer
    frequencies).
    """
    fields = list(fields)
    if not fields:
        raise InputError("no fields given")
    for f in fields:
        if not isinstance(f, FourierField):
            raise UnsupportedRepresentationError(
                f"horizon bounds need Fourier fields, got {type(f).__name__}"
            )
    n = fields[0].dim
    m0 = np.zeros(n + 1)
    ebar = 0.0
    for f in fields:
        if f.dim != n:
            raise InputError("fields have different dimensions")
        active = (f.sin != 0) | (f.cos != 0)
        if not np.any(active):
            continue
        m0 = np.maximum(m0, np.abs(f.freqs[active]).max(axis=0))
        ebar = max(ebar, float(np.max(0.5 * np.hypot(f.sin, f.cos))))
    abs_m0 = float(m0.max())
    if abs_m0 == int(abs_m0):
        abs_m0 = int(abs_m0)
        m0 = m0.astype(int)
    return {
        "m0": m0.tolist(),
        "abs_m0": abs_m0,
        "ebar": ebar,
        "term_count_bound": 2 * math.ceil(abs_m0) + 1,
    }


def field_from_json(obj, dim=None):
    """Parse ``{"type": "fourier"|"poly", ...}``; raises InputError on bad input."""
    if not isinstance(obj, dict):
        raise InputError(f"field must be a JSON object, got {type(obj).__name__}")
    kind = obj.get("type")
    if kind == "fourier":
        allowed = {"type", "terms", "dim", "time_dependent", "growth_bound"}
        _reject_unknown(obj, allowed, "fourier field")
        terms = obj.get("terms", [])
        d = obj.get("dim", dim)
        if d is None:
            if not terms:
                raise InputError("fourier field without terms needs an explicit 'dim'")
            d = len(terms[0]["freq"]) - 1
        freqs, sins, coss = [], [], []
        for term in terms:
            _reject_unknown(term, {"freq", "sin", "cos"}, "fourier term")
            if len(term["freq"]) != d + 1:
                raise InputError(f"fourier frequency {term['freq']} must have length dim+1={d + 1}")
            freqs.append(term["freq"])
            sins.append(term.get("sin", 0.0))
            coss.append(term.get("cos", 0.0))
        return FourierField(d, np.array(freqs, dtype=float).reshape(-1, d + 1), sins, coss,
                            obj.get("time_dependent"), obj.get("growth_bound"))
    if kind == "poly":
        _reject_unknown(obj, {"type", "coeffs", "dim", "convention", "growth_bound"}, "poly field")
        coeffs = obj.get("coeffs", [])
        d = obj.get("dim", dim)
        if d is None:
            if not coeffs:
                raise InputError("poly field without coefficients needs an explicit 'dim'")
            d = len(coeffs[0]["gamma"])
        terms = {}
        for c in coeffs:
            _reject_unknown(c, {"gamma", "value"}, "poly coefficient")
            terms[tuple(c["gamma"])] = c["value"]
        convention = obj.get("convention", "monomial")
        if convention == "taylor":
            f = PolyField.from_taylor(d, terms)
        elif convention == "monomial":
            f = PolyField(d, terms)
        else:
            raise InputError(f"unknown poly convention {convention!r}")
        f.growth_bound = obj.get("growth_bound")
        f._check_growth()
        return f
    raise InputError(f"unknown field type {kind!r}; expected 'fourier' or 'poly'")


def _reject_unknown(obj, allowed, what):
    extra = set(obj) - set(allowed)
    if extra:
        raise InputError(f"unknown keys in {what}: {sorted(extra)}")
