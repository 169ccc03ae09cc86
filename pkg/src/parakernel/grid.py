"""Uniform tensor grids and the solution snapshots that live on them."""
from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class GridSpec:
    """Per-axis bounds and node counts of a uniform tensor grid."""

    lo: tuple
    hi: tuple
    points: tuple

    def __post_init__(self):
        lo, hi, pts = (tuple(np.atleast_1d(v).tolist()) for v in (self.lo, self.hi, self.points))
        if not len(lo) == len(hi) == len(pts):
            raise InputError("grid lo, hi and points must have the same length")
        if any(p < 2 for p in pts) or any(not b > a for a, b in zip(lo, hi)):
            raise InputError(f"invalid grid lo={lo} hi={hi} points={pts}")
        object.__setattr__(self, "lo", tuple(float(v) for v in lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in hi))
        object.__setattr__(self, "points", tuple(int(v) for v in pts))

    @property
    def dim(self):
        return len(self.points)

    def axes(self):
        return tuple(np.linspace(a, b, p) for a, b, p in zip(self.lo, self.hi, self.points))


@dataclass(frozen=True, eq=False)
class GridState:
    """Values of u on a tensor grid at time ``time``."""

    axes: tuple
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        values = np.asarray(self.values, dtype=float)
        shape = tuple(len(a) for a in axes)
        if values.shape != shape:
            raise InputError(f"values have shape {values.shape}, grid has shape {shape}")
        if not np.all(np.isfinite(values)):
            raise InputError("grid values must be finite")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, spec, f, time=0.0):
        """Sample the vectorized ``f`` (points (M, n) -> (M,)) on ``spec``."""
        axes = spec.axes() if isinstance(spec, GridSpec) else tuple(spec)
        pts = mesh_points(axes)
        vals = np.broadcast_to(np.asarray(f(pts), dtype=float), pts.shape[:1])
        return cls(axes, vals.reshape(tuple(len(a) for a in axes)), time)

    @property
    def shape(self):
        return self.values.shape

    @property
    def spacing(self):
        return np.array([a[1] - a[0] for a in self.axes])

    def points(self):
        return mesh_points(self.axes)

    def replace(self, values, time=None):
        return GridState(self.axes, values, self.time if time is None else time)

    def cell_volume(self):
        return float(np.prod(self.spacing))


def mesh_points(axes):
    """All nodes of the tensor grid, shape (M, n), in C order."""
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


__all__ = ["GridSpec", "GridState", "mesh_points"]
