"""Potential shapes.

Shape parameters are stored in the units they are usually quoted in (eV and
um); conversion to internal energy happens only when a grid table is built
for the propagator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .grids import Grid
from .units import energy_ev_to_internal


@dataclass(frozen=True)
class QuarticDoubleWell:
    """V(x) = h ((x/x0)^2 - 1)^2: minima at +-x0, central barrier h."""

    half_separation_um: float
    barrier_height_ev: float

    def __post_init__(self):
        _require_positive(half_separation_um=self.half_separation_um,
                          barrier_height_ev=self.barrier_height_ev)

    def energy_ev(self, x, y=None):
        u = (np.asarray(x) / self.half_separation_um) ** 2 - 1.0
        return self.barrier_height_ev * u**2


@dataclass(frozen=True)
class MexicanHat:
    """Rotationally symmetric double well V(r) = h ((r/r0)^2 - 1)^2."""

    well_radius_um: float
    peak_height_ev: float

    def __post_init__(self):
        _require_positive(well_radius_um=self.well_radius_um,
                          peak_height_ev=self.peak_height_ev)

    def energy_ev(self, x, y):
        rsq = np.asarray(x) ** 2 + np.asarray(y) ** 2
        u = rsq / self.well_radius_um**2 - 1.0
        return self.peak_height_ev * u**2


@dataclass(frozen=True)
class HenonHeiles:
    """Three-fold chaotic well V = A [r^4 + a r^2 + b r^3 cos(3 phi)]."""

    quartic_ev_um4: float
    quadratic_um2: float
    cubic_um: float

    def __post_init__(self):
        _require_positive(quartic_ev_um4=self.quartic_ev_um4,
                          quadratic_um2=self.quadratic_um2,
                          cubic_um=self.cubic_um)

    def energy_ev(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        rsq = x**2 + y**2
        r = np.sqrt(rsq)
        phi = np.arctan2(y, x)
        return self.quartic_ev_um4 * (
            rsq**2 + self.quadratic_um2 * rsq + self.cubic_um * r**3 * np.cos(3.0 * phi)
        )


@dataclass(frozen=True)
class Harmonic:
    """Product of independent 1D harmonic wells, one stiffness per axis:
    V = 1/2 * sum_a k_a (q_a - c_a)^2 with k_a in eV/um^2."""

    stiffness_ev_um2: tuple[float, ...]
    center_um: tuple[float, ...] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "stiffness_ev_um2",
                           tuple(float(k) for k in np.atleast_1d(self.stiffness_ev_um2)))
        object.__setattr__(self, "center_um",
                           tuple(float(c) for c in np.atleast_1d(self.center_um)))
        for k in self.stiffness_ev_um2:
            if k <= 0:
                raise ValueError(f"harmonic stiffness must be positive, got {k}")

    def energy_ev(self, x, y=None):
        coords = (x,) if y is None else (x, y)
        total = 0.0
        for k, c, q in zip(self.stiffness_ev_um2, self.center_um, coords):
            total = total + 0.5 * k * (np.asarray(q) - c) ** 2
        return total


@dataclass(frozen=True)
class FreeSpace:
    """V = 0 everywhere."""

    def energy_ev(self, x, y=None):
        return np.zeros(np.broadcast(np.asarray(x)).shape)


@dataclass(frozen=True)
class Tabulated:
    """Grid-aligned samples in eV, loaded from a snapshot file."""

    grid: Grid
    values_ev: tuple  # flattened row-major samples, hashability-friendly
    path: str | None = field(default=None, compare=False)

    @classmethod
    def from_array(cls, grid: Grid, values_ev: np.ndarray) -> "Tabulated":
        arr = np.asarray(values_ev, dtype=float)
        if arr.shape != grid.shape:
            raise ValueError(f"table shape {arr.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tabulated potential contains non-finite samples")
        return cls(grid, tuple(arr.ravel().tolist()))

    def table(self) -> np.ndarray:
        return np.asarray(self.values_ev, dtype=float).reshape(self.grid.shape)

    def energy_ev(self, x, y=None):
        arr = self.table()
        point = (x,) if y is None else (x, y)
        idx = []
        for a, q in enumerate(point):
            ax = self.grid.axes[a]
            j = int(np.argmin(np.abs(ax - float(q))))
            if abs(ax[j] - float(q)) > 1e-9 * max(1.0, abs(float(q))):
                raise ValueError("tabulated potentials evaluate at grid nodes only")
            idx.append(j)
        return float(arr[tuple(idx)])


Potential = Union[QuarticDoubleWell, MexicanHat, HenonHeiles, Harmonic, FreeSpace, Tabulated]

_2D_ONLY = (MexicanHat, HenonHeiles)


def _require_positive(**params):
    for name, value in params.items():
        if not value > 0:
            raise ValueError(f"{name} must be strictly positive, got {value}")


def eval_potential(pot: Potential, point) -> float:
    """Potential energy in eV at a position given in um."""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if point.size == 1:
        return float(pot.energy_ev(point[0]))
    return float(pot.energy_ev(point[0], point[1]))


def potential_table_ev(pot: Potential, grid: Grid) -> np.ndarray:
    """Sample the potential on every grid node (eV)."""
    if isinstance(pot, _2D_ONLY) and grid.ndim != 2:
        raise ValueError(f"{type(pot).__name__} is a two-dimensional potential")
    if isinstance(pot, Tabulated):
        if pot.grid != grid:
            raise ValueError("tabulated potential was sampled on a different grid")
        return pot.table()
    if grid.ndim == 1:
        return np.asarray(pot.energy_ev(grid.axes[0]), dtype=float)
    x = grid.coord(0)
    y = grid.coord(1)
    return np.asarray(pot.energy_ev(x, y), dtype=float) * np.ones(grid.shape)


def potential_table_internal(pot: Potential, grid: Grid) -> np.ndarray:
    return energy_ev_to_internal(1.0) * potential_table_ev(pot, grid)
