"""Anisotropic wake weights, weighted sup norms, and the sampling grid.

The weight (1+|x|)^m (1+|zeta||x|+zeta.x)^m is 1 on the wake axis behind
the body (x antiparallel to zeta) and grows like |x|^{2m} upstream, so a
finite weighted sup norm encodes the paraboloidal wake structure.  Fields
live on a fixed radial-angular-temporal grid; norms are grid maxima.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "FieldGrid",
    "WeightedField",
    "comparability_constant",
    "weight",
    "weighted_norm",
]

_AXES = (
    (1.0, 0.0, 0.0), (-1.0, 0.0, 0.0),
    (0.0, 1.0, 0.0), (0.0, -1.0, 0.0),
    (0.0, 0.0, 1.0), (0.0, 0.0, -1.0),
)


def weight(x, zeta, m) -> float | np.ndarray:
    """(1+|x|)^m (1+|zeta||x|+zeta.x)^m, at one point or batched (...,3).

    Always >= 1: the wake factor is smallest (exactly 1) where x points
    against zeta, and the cross term never drops below -|zeta||x|.
    """
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    m = float(m)
    if m < 0.0:
        raise ValueError("m must be >= 0")
    r = np.linalg.norm(x, axis=-1)
    wake = 1.0 + np.linalg.norm(zeta) * r + x @ zeta
    out = ((1.0 + r) * wake) ** m
    return float(out) if out.ndim == 0 else out


def comparability_constant(M, zeta) -> float:
    """c_* = (1+M)^2 (1+2M|zeta|)^2 for drift amplitude M.

    Shifting an argument by at most M and rotating about the zeta axis
    changes the m = 1 weight by at most sqrt(c_*); squared, it covers the
    m = 2 weights of quadratic terms.
    """
    M = float(M)
    if M < 0.0:
        raise ValueError("M must be >= 0")
    az = float(np.linalg.norm(np.asarray(zeta, dtype=float)))
    return ((1.0 + M) * (1.0 + 2.0 * M * az)) ** 2


def _fibonacci_sphere(n):
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])


@dataclass(frozen=True)
class FieldGrid:
    """Radial shells x unit directions x one period of uniform times.

    Shell radii are geometric with an extra node at the origin; the
    direction set is a Fibonacci covering plus the six coordinate axes
    kept exact so axis slices and decay fits hit them without projection.
    """

    radii: tuple
    directions: tuple
    times: tuple
    period: float = 1.0

    @classmethod
    def build(cls, r_max: float = 64.0, n_shells: int = 32,
              n_dirs: int = 50, n_times: int = 16, period: float = 1.0,
              r_min: float = 0.5) -> "FieldGrid":
        if not (r_max > r_min > 0.0):
            raise ValueError("need r_max > r_min > 0")
        if n_shells < 2 or n_dirs < 7 or n_times < 1:
            raise ValueError("grid too small")
        radii = (0.0,) + tuple(np.geomspace(r_min, r_max, n_shells - 1))
        dirs = _AXES + tuple(map(tuple, _fibonacci_sphere(n_dirs - 6)))
        times = tuple(np.arange(n_times) * (period / n_times))
        return cls(radii=radii, directions=dirs, times=times, period=period)

    @cached_property
    def radii_array(self) -> np.ndarray:
        a = np.asarray(self.radii, dtype=float)
        a.setflags(write=False)
        return a

    @cached_property
    def dirs_array(self) -> np.ndarray:
        a = np.asarray(self.directions, dtype=float)
        a.setflags(write=False)
        return a

    @cached_property
    def times_array(self) -> np.ndarray:
        a = np.asarray(self.times, dtype=float)
        a.setflags(write=False)
        return a

    @cached_property
    def points(self) -> np.ndarray:
        """All spatial nodes, shape (n_radii, n_dirs, 3)."""
        a = self.radii_array[:, None, None] * self.dirs_array[None, :, :]
        a.setflags(write=False)
        return a

    @property
    def r_max(self) -> float:
        return float(self.radii[-1])

    @property
    def shape(self):
        return (len(self.times), len(self.radii), len(self.directions), 3)


@dataclass(frozen=True)
class WeightedField:
    """Vector field samples with their anisotropic weighted sup norm.

    values[i_t, i_r, i_d] is the field at radius radii[i_r] along
    directions[i_d] at times[i_t].  Instances are immutable; derive new
    fields with with_values or the arithmetic operators, each of which
    recomputes the cached norm.
    """

    grid: FieldGrid
    values: np.ndarray
    m: float
    zeta: tuple

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(
                f"values shape {v.shape} != grid shape {self.grid.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "zeta",
                           tuple(float(z) for z in self.zeta))
        object.__setattr__(self, "m", float(self.m))

    @cached_property
    def node_weights(self) -> np.ndarray:
        """Weight at each spatial node, shape (n_radii, n_dirs)."""
        return weight(self.grid.points, np.asarray(self.zeta), self.m)

    @cached_property
    def norm(self) -> float:
        speed = np.linalg.norm(self.values, axis=-1)
        return float(np.max(self.node_weights[None, :, :] * speed))

    def with_values(self, values) -> "WeightedField":
        return WeightedField(self.grid, values, self.m, self.zeta)

    def _check_compatible(self, other):
        if self.grid is not other.grid and self.grid != other.grid:
            raise ValueError("fields live on different grids")
        if self.m != other.m or self.zeta != other.zeta:
            raise ValueError("fields carry different weight parameters")

    def __add__(self, other):
        self._check_compatible(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        self._check_compatible(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, a):
        return self.with_values(self.values * float(a))

    __rmul__ = __mul__

    def write_csv(self, path):
        """One row per node: r, dir_index, t_index, vx, vy, vz, preceded
        by a commented JSON header carrying the grid and parameters."""
        meta = {
            "radii": [float(r) for r in self.grid.radii],
            "directions": [list(map(float, d))
                           for d in self.grid.directions],
            "times": [float(t) for t in self.grid.times],
            "period": float(self.grid.period),
            "m": self.m,
            "zeta": list(self.zeta),
        }
        nt, nr, nd, _ = self.values.shape
        with open(path, "w") as fh:
            fh.write("# " + json.dumps(meta) + "\n")
            fh.write("r,dir_index,t_index,vx,vy,vz\n")
            for it in range(nt):
                for ir in range(nr):
                    for idir in range(nd):
                        v = self.values[it, ir, idir]
                        fh.write("%.17g,%d,%d,%.17g,%.17g,%.17g\n"
                                 % (self.grid.radii[ir], idir, it,
                                    v[0], v[1], v[2]))

    @classmethod
    def read_csv(cls, path) -> "WeightedField":
        with open(path) as fh:
            header = fh.readline()
            if not header.startswith("# "):
                raise ValueError("missing JSON header line")
            meta = json.loads(header[2:])
            fh.readline()                      # column names
            data = np.loadtxt(fh, delimiter=",")
        grid = FieldGrid(radii=tuple(meta["radii"]),
                         directions=tuple(map(tuple, meta["directions"])),
                         times=tuple(meta["times"]),
                         period=float(meta["period"]))
        nt, nr, nd, _ = grid.shape
        values = np.zeros(grid.shape)
        it = data[:, 2].astype(int)
        idir = data[:, 1].astype(int)
        rvals = data[:, 0]
        ir = np.searchsorted(grid.radii_array, rvals)
        ir = np.clip(ir, 0, nr - 1)
        # snap to the nearest stored radius; exact for our own files
        below = np.clip(ir - 1, 0, nr - 1)
        pick_below = np.abs(grid.radii_array[below] - rvals) \
            < np.abs(grid.radii_array[ir] - rvals)
        ir[pick_below] = below[pick_below]
        values[it, ir, idir] = data[:, 3:6]
        return cls(grid=grid, values=values, m=float(meta["m"]),
                   zeta=tuple(meta["zeta"]))


def weighted_norm(field: WeightedField) -> float:
    """Grid max of weight(x) |v(x,t)| over all nodes and times."""
    if field.values.size == 0:
        raise ValueError("empty grid")
    return field.norm
