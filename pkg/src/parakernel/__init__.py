"""Small-time expansions of parabolic transition densities.

The package computes convergent expansions of the fundamental solution of
du/dt = sum a_ij d_ij u + b . grad u for analytic drifts, certifies how long
they stay convergent, and uses them for Cauchy problems, semigroup
time-stepping and an alternating-direction splitting solver.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("parakernel")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    __version__ = "0.0.0"

from .errors import (
    ConfigError,
    DivergenceError,
    HorizonExceededError,
    InputError,
    ParakernelError,
    StateError,
    UnsupportedRepresentationError,
)
from .fields import FourierField, PolyField, field_from_json, fourier_bounds
from .grid import GridSpec, GridState
from .horizon import HorizonParams, beta_lower_bound, certified_horizon, empirical_ratio_diagnostic
from .kernel import (
    ConstantDiffusion,
    DegeneracyMask,
    KernelApprox,
    MonteCarloSpec,
    QuadratureSpec,
    cauchy_solve,
    cauchy_solve_composed,
    composed_expectation,
    eval_density,
    reduce_constant_diffusion,
    semigroup_compose,
    weak_expectation,
)
from .polyalg import LocalPolynomial
from .splitting import (
    BlockProblem,
    SplitConfig,
    ad_step,
    diffusion_step,
    split_solve,
    vector_field_step,
)
from .wkb import WkbExpansion, compute_c0, compute_ck, compute_dk, expand

__all__ = [
    "BlockProblem",
    "ConfigError",
    "ConstantDiffusion",
    "DegeneracyMask",
    "DivergenceError",
    "FourierField",
    "GridSpec",
    "GridState",
    "HorizonExceededError",
    "HorizonParams",
    "InputError",
    "KernelApprox",
    "LocalPolynomial",
    "MonteCarloSpec",
    "ParakernelError",
    "PolyField",
    "QuadratureSpec",
    "SplitConfig",
    "StateError",
    "UnsupportedRepresentationError",
    "WkbExpansion",
    "ad_step",
    "beta_lower_bound",
    "cauchy_solve",
    "cauchy_solve_composed",
    "certified_horizon",
    "composed_expectation",
    "compute_c0",
    "compute_ck",
    "compute_dk",
    "diffusion_step",
    "empirical_ratio_diagnostic",
    "eval_density",
    "expand",
    "field_from_json",
    "fourier_bounds",
    "reduce_constant_diffusion",
    "semigroup_compose",
    "split_solve",
    "vector_field_step",
    "weak_expectation",
]
