"""JSON problem configuration shared by every CLI command.

A configuration is a single JSON object.  Unknown keys are rejected at every
level, and errors name the offending field path (``expansion.K``) or the
line and column of a JSON syntax error.
"""
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError
from .fields import field_from_json
from .grid import GridSpec
from .kernel import DegeneracyMask, MonteCarloSpec, QuadratureSpec

TOP_KEYS = {
    "dim", "drift", "diffusion", "R", "horizon", "variable_diffusion", "expansion",
    "quadrature", "monte_carlo", "solve", "split", "mask", "validate", "output",
}
EXPANSION_KEYS = {"K", "D", "form", "t0", "time_inhomogeneous"}
SOLVE_KEYS = {"method", "payoff", "x", "t", "compose"}
SPLIT_KEYS = {"d", "T", "grid", "initial", "rho", "tau_step", "iterations", "tol", "rk_substeps",
              "kernel_horizon"}
GRID_KEYS = {"lo", "hi", "points"}
MASK_KEYS = {"epsilon", "coordinate"}
VALIDATE_KEYS = {"suites"}
OUTPUT_KEYS = {"path"}
METHODS = ("quadrature", "monte_carlo")


def _reject(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected a JSON object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {extra}")


def _number(obj, key, where, default=None, kind=float, positive=False):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{where}.{key}: required")
        return default
    try:
        val = kind(obj[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected a {kind.__name__}, got {obj[key]!r}") from None
    if positive and not val > 0:
        raise ConfigError(f"{where}.{key}: must be positive, got {val}")
    return val


def _vector(value, where, n=None):
    try:
        v = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a list of numbers") from None
    if n is not None and v.size != n:
        raise ConfigError(f"{where}: expected {n} components, got {v.size}")
    return v


# payoffs ---------------------------------------------------------------------

def make_payoff(spec, n, where="payoff"):
    """Vectorized callable points (M, n) -> (M,) from a JSON payoff spec.

    Types: constant {value}, coordinate {index}, power {index, exponent},
    indicator {index, threshold} (1 where x_index > threshold),
    gaussian_bump {center, width, amplitude} and sum {terms}.
    """
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(f"{where}: expected an object with a 'type'")
    kind = spec["type"]

    def index():
        i = int(_number(spec, "index", where, kind=int, default=0))
        if not 0 <= i < n:
            raise ConfigError(f"{where}.index: must lie in [0, {n}), got {i}")
        return i

    if kind == "constant":
        _reject(spec, {"type", "value"}, where)
        c = _number(spec, "value", where)
        return lambda X: np.full(np.shape(X)[0], c)
    if kind == "coordinate":
        _reject(spec, {"type", "index"}, where)
        i = index()
        return lambda X: X[:, i]
    if kind == "power":
        _reject(spec, {"type", "index", "exponent"}, where)
        i, p = index(), _number(spec, "exponent", where)
        return lambda X: X[:, i] ** p
    if kind == "indicator":
        _reject(spec, {"type", "index", "threshold"}, where)
        i, c = index(), _number(spec, "threshold", where, default=0.0)
        return lambda X: (X[:, i] > c).astype(float)
    if kind == "gaussian_bump":
        _reject(spec, {"type", "center", "width", "amplitude"}, where)
        center = _vector(spec.get("center", [0.0] * n), f"{where}.center", n)
        w = _number(spec, "width", where, positive=True)
        amp = _number(spec, "amplitude", where, default=1.0)
        mask = np.isfinite(center)
        return lambda X: amp * np.exp(-np.sum((X[:, mask] - center[mask]) ** 2, axis=1) / (2 * w * w))
    if kind == "sum":
        _reject(spec, {"type", "terms"}, where)
        parts = [make_payoff(t, n, f"{where}.terms[{i}]") for i, t in enumerate(spec.get("terms", []))]
        return lambda X: sum((p(X) for p in parts), np.zeros(np.shape(X)[0]))
    raise ConfigError(f"{where}.type: unknown payoff type {kind!r}")


# config sections ---------------------------------------------------------------

@dataclass(frozen=True)
class ExpansionConfig:
    K: int = 2
    D: int = None
    form: str = "d_series"
    t0: float = 0.0
    time_inhomogeneous: bool = False


@dataclass(frozen=True)
class SolveConfig:
    method: str = "quadrature"
    payoff: dict = None
    x: tuple = None
    t: float = None
    compose: int = 1


@dataclass(frozen=True)
class SplitSection:
    d: int
    T: float
    grid: GridSpec
    initial: dict
    rho: float = None
    tau_step: float = 0.1
    iterations: int = 3
    tol: float = 1e-8
    rk_substeps: int = 8
    kernel_horizon: float = None


@dataclass
class ProblemConfig:
    """Parsed configuration; ``raw`` keeps the source object for hashing."""

    dim: int
    drift: list
    diffusion: np.ndarray = None
    R: float = 1.0
    horizon: float = None
    variable_diffusion: bool = False
    expansion: ExpansionConfig = ExpansionConfig()
    quadrature: QuadratureSpec = QuadratureSpec()
    monte_carlo: MonteCarloSpec = MonteCarloSpec()
    solve: SolveConfig = SolveConfig()
    split: SplitSection = None
    mask: dict = None
    validate: tuple = None
    output: str = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def config_hash(self):
        return config_hash(self.raw)

    def degeneracy_mask(self):
        if self.mask is None:
            return None
        i = self.mask["coordinate"]
        return DegeneracyMask(self.mask["epsilon"], lambda X: np.abs(X[:, i]))


def config_hash(raw):
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def parse_config(raw):
    """Validate a decoded JSON object and return a :class:`ProblemConfig`."""
    _reject(raw, TOP_KEYS, "config")
    n = int(_number(raw, "dim", "config", kind=int, positive=True))
    drift_raw = raw.get("drift")
    if not isinstance(drift_raw, list) or len(drift_raw) != n:
        raise ConfigError(f"config.drift: expected a list of {n} fields")
    drift = []
    for i, f in enumerate(drift_raw):
        try:
            drift.append(field_from_json(f, n))
        except (InputError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"config.drift[{i}]: {exc}") from None
        if drift[-1].dim != n:
            raise ConfigError(f"config.drift[{i}]: field has dim {drift[-1].dim}, expected {n}")
    diffusion = None
    if raw.get("diffusion") is not None:
        diffusion = np.asarray(raw["diffusion"], dtype=float)
        if diffusion.shape != (n, n):
            raise ConfigError(f"config.diffusion: expected a {n}x{n} matrix")
    cfg = ProblemConfig(n, drift, diffusion, raw=raw)
    cfg.R = _number(raw, "R", "config", default=1.0, positive=True)
    if raw.get("horizon") is not None:
        cfg.horizon = _number(raw, "horizon", "config", positive=True)
    cfg.variable_diffusion = bool(raw.get("variable_diffusion", False))

    exp = raw.get("expansion", {})
    _reject(exp, EXPANSION_KEYS, "config.expansion")
    form = exp.get("form", "d_series")
    if form not in ("d_series", "wkb_exponent"):
        raise ConfigError(f"config.expansion.form: unknown form {form!r}")
    K = int(_number(exp, "K", "config.expansion", default=2, kind=int))
    if K < 0:
        raise ConfigError("config.expansion.K: must be >= 0")
    D = exp.get("D")
    cfg.expansion = ExpansionConfig(
        K, None if D is None else int(D), form,
        _number(exp, "t0", "config.expansion", default=0.0),
        bool(exp.get("time_inhomogeneous", False)),
    )

    quad = raw.get("quadrature", {})
    _reject(quad, {"nodes", "window_sigmas"}, "config.quadrature")
    mc = raw.get("monte_carlo", {})
    _reject(mc, {"paths", "seed", "chunk"}, "config.monte_carlo")
    try:
        cfg.quadrature = QuadratureSpec(**quad)
        cfg.monte_carlo = MonteCarloSpec(**mc)
    except InputError as exc:
        raise ConfigError(f"config: {exc}") from None

    solve = raw.get("solve", {})
    _reject(solve, SOLVE_KEYS, "config.solve")
    method = solve.get("method", "quadrature")
    if method not in METHODS:
        raise ConfigError(f"config.solve.method: expected one of {METHODS}, got {method!r}")
    payoff = solve.get("payoff")
    if payoff is not None:
        make_payoff(payoff, n, "config.solve.payoff")
    x = solve.get("x")
    cfg.solve = SolveConfig(
        method, payoff, None if x is None else tuple(_vector(x, "config.solve.x", n)),
        solve.get("t"), int(_number(solve, "compose", "config.solve", default=1, kind=int)),
    )

    if "split" in raw:
        sp = raw["split"]
        _reject(sp, SPLIT_KEYS, "config.split")
        grid = sp.get("grid")
        _reject(grid, GRID_KEYS, "config.split.grid")
        try:
            spec = GridSpec(grid["lo"], grid["hi"], grid["points"])
        except (KeyError, InputError) as exc:
            raise ConfigError(f"config.split.grid: {exc}") from None
        if spec.dim != n:
            raise ConfigError(f"config.split.grid: expected {n} axes")
        if "initial" not in sp:
            raise ConfigError("config.split.initial: required")
        make_payoff(sp["initial"], n, "config.split.initial")
        cfg.split = SplitSection(
            int(_number(sp, "d", "config.split", kind=int, positive=True)),
            _number(sp, "T", "config.split", positive=True),
            spec,
            sp["initial"],
            sp.get("rho"),
            _number(sp, "tau_step", "config.split", default=0.1, positive=True),
            int(_number(sp, "iterations", "config.split", default=3, kind=int)),
            _number(sp, "tol", "config.split", default=1e-8, positive=True),
            int(_number(sp, "rk_substeps", "config.split", default=8, kind=int)),
            sp.get("kernel_horizon"),
        )

    if raw.get("mask") is not None:
        m = raw["mask"]
        _reject(m, MASK_KEYS, "config.mask")
        cfg.mask = {
            "epsilon": _number(m, "epsilon", "config.mask", positive=True),
            "coordinate": int(_number(m, "coordinate", "config.mask", default=0, kind=int)),
        }

    if "validate" in raw:
        v = raw["validate"]
        _reject(v, VALIDATE_KEYS, "config.validate")
        cfg.validate = tuple(v.get("suites", ()))
    if "output" in raw:
        _reject(raw["output"], OUTPUT_KEYS, "config.output")
        cfg.output = raw["output"].get("path")
    return cfg


def load_config(path):
    """Read and parse a configuration file, reporting JSON syntax errors by line."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(raw)


__all__ = ["ProblemConfig", "config_hash", "load_config", "make_payoff", "parse_config"]
