"""Certified lower bound of the convergence horizon, plus an empirical check."""
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .fields import fourier_bounds

DEFAULT_SAFETY = 0.9
NEGLIGIBLE = 1e-14


@dataclass(frozen=True)
class HorizonParams:
    n: int
    abs_m0: float
    ebar: float
    R: float
    variable_diffusion: bool = False

    def __post_init__(self):
        if self.n < 1 or self.abs_m0 < 0 or self.ebar < 0 or not self.R > 0:
            raise InputError(
                f"invalid horizon parameters n={self.n}, |m0|={self.abs_m0}, "
                f"ebar={self.ebar}, R={self.R}"
            )

    @classmethod
    def from_fields(cls, fields, R, variable_diffusion=False):
        b = fourier_bounds(fields)
        return cls(fields[0].dim, b["abs_m0"], b["ebar"], R, variable_diffusion)


@dataclass(frozen=True)
class HorizonBound:
    """Result of :func:`beta_lower_bound`; compares and converts like a float."""

    beta: float
    factor: int
    drift_free: bool = False

    def __float__(self):
        return self.beta

    @property
    def marker(self):
        return "drift-free: any horizon" if self.drift_free else ""


def beta_lower_bound(p):
    """beta = 1 / (F n (2|m0| + 1) ebar R^2 |m0|^2).

    F is 3 for constant (Laplacian) diffusion and 6 when the diffusion
    coefficients are themselves Fourier series.  A drift with no Fourier
    content gives beta = inf, flagged ``drift_free``.
    """
    factor = 6 if p.variable_diffusion else 3
    if p.ebar == 0 or p.abs_m0 == 0:
        return HorizonBound(math.inf, factor, True)
    denom = factor * p.n * (2 * p.abs_m0 + 1) * p.ebar * p.R ** 2 * p.abs_m0 ** 2
    return HorizonBound(1.0 / denom, factor)


def certified_horizon(fields, R, variable_diffusion=False):
    """beta for a list of Fourier drift fields on the ball of radius R."""
    return beta_lower_bound(HorizonParams.from_fields(fields, R, variable_diffusion)).beta


def empirical_ratio_diagnostic(exp, t, sample_points):
    """Largest observed ratio t * max|c_{k+1}| / max|c_k| for k = K/2 .. K-1.

    The maxima run over ``sample_points`` (and, for an
    :class:`~parakernel.wkb.ExpansionBatch`, over every base point).  Taking
    sup-norms rather than pointwise quotients keeps isolated zero crossings
    of c_k from reporting a spurious blow-up.  Orders whose sup-norm is below
    1e-14 are skipped.
    """
    K = exp.order
    if K < 2:
        raise InputError(f"ratio diagnostic needs order >= 2, got {K}")
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if hasattr(exp, "base_points"):
        vals = np.concatenate([np.abs(exp.power_values(x)) for x in pts])
    else:
        vals = np.abs(np.array([exp.power_values(x) for x in pts]))
    sup = vals.max(axis=0)
    ratios = [
        sup[k + 1] * t / sup[k]
        for k in range(K // 2, K)
        if sup[k] > NEGLIGIBLE and sup[k + 1] > NEGLIGIBLE
    ]
    if not ratios:
        return {"max_ratio": 0.0, "converging": True}
    max_ratio = float(max(ratios))
    return {"max_ratio": max_ratio, "converging": bool(max_ratio < 1.0)}
