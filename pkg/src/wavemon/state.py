"""Wave functions on a grid: construction, observables and fidelity.

A :class:`WaveFunction` is treated as immutable: every operation returns a
new value and never mutates the amplitudes of its inputs, so states can be
shared freely between trajectory workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, ZeroNormError
from .grids import Grid

# Density below this at the outermost cells counts as "no boundary leak"
# for the periodic-grid contract.
BOUNDARY_DENSITY_LIMIT = 1e-8


@dataclass
class WaveFunction:
    grid: Grid
    values: np.ndarray  # complex amplitudes, shape == grid.shape

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"amplitude shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.values.copy())


@dataclass
class GaussianPacketSpec:
    """Gaussian packet: ``width`` is the standard deviation of the position
    density |psi|^2, ``momentum`` a plane-wave offset in 1/um (hbar = 1)."""

    center: tuple[float, ...]
    width: float
    momentum: tuple[float, ...] = field(default=())

    def __post_init__(self):
        self.center = tuple(float(c) for c in np.atleast_1d(self.center))
        self.width = float(self.width)
        mom = tuple(float(p) for p in np.atleast_1d(self.momentum)) if len(
            np.atleast_1d(self.momentum)
        ) else ()
        if not mom:
            mom = (0.0,) * len(self.center)
        if len(mom) != len(self.center):
            raise ValueError("momentum must have one component per center component")
        self.momentum = mom
        if self.width <= 0:
            raise ValueError(f"packet width must be positive, got {self.width}")


def make_gaussian_packet(grid: Grid, spec: GaussianPacketSpec) -> WaveFunction:
    """Normalized Gaussian packet with density std ``spec.width`` per axis."""
    if len(spec.center) != grid.ndim:
        raise ValueError(f"center must have {grid.ndim} components")
    if not grid.contains(spec.center):
        raise ValueError(f"packet center {spec.center} lies outside the grid extents")
    if spec.width < 2.0 * max(grid.spacing):
        raise ValueError(
            f"packet width {spec.width} um is narrower than twice the grid "
            f"spacing {max(grid.spacing)} um and cannot be resolved"
        )
    # density std w  <=>  amplitude ~ exp(-(q-c)^2 / (4 w^2))
    log_amp = np.zeros(grid.shape)
    phase = np.zeros(grid.shape)
    for a in range(grid.ndim):
        q = grid.coord(a)
        log_amp = log_amp - (q - spec.center[a]) ** 2 / (4.0 * spec.width**2)
        if spec.momentum[a] != 0.0:
            phase = phase + spec.momentum[a] * q
    values = np.exp(log_amp + 1j * phase)
    return normalize(WaveFunction(grid, values))


def density(wf: WaveFunction) -> np.ndarray:
    return np.abs(wf.values) ** 2


def norm(wf: WaveFunction) -> float:
    """Cell-volume-weighted L2 norm."""
    return float(np.sqrt(np.sum(np.abs(wf.values) ** 2) * wf.grid.cell_volume))


def normalize(wf: WaveFunction) -> WaveFunction:
    n = norm(wf)
    if n == 0.0 or not np.isfinite(n):
        raise ZeroNormError(f"cannot normalize state with norm {n}")
    return WaveFunction(wf.grid, wf.values / n)


def marginal_density(wf: WaveFunction, axis: int) -> np.ndarray:
    """Position density integrated over all other axes (units 1/um)."""
    rho = density(wf)
    other = tuple(a for a in range(wf.grid.ndim) if a != axis)
    if other:
        rho = rho.sum(axis=other)
    return rho * wf.grid.cell_volume / wf.grid.spacing[axis]


def position_moments(grid: Grid, values: np.ndarray):
    """Per-axis (mean, variance) of |values|^2 in one pass.

    The single canonical reduction; every trace writer uses it so that
    live runs and record replays agree bit for bit.
    """
    rho = np.abs(values) ** 2
    total = rho.sum()
    mean = np.empty(grid.ndim)
    var = np.empty(grid.ndim)
    for a in range(grid.ndim):
        other = tuple(ax for ax in range(grid.ndim) if ax != a)
        m = (rho.sum(axis=other) if other else rho) / total
        q = grid.axes[a]
        mean[a] = np.dot(m, q)
        var[a] = np.dot(m, (q - mean[a]) ** 2)
    return mean, var


def expectation_position(wf: WaveFunction) -> np.ndarray:
    """First moment of the position density, one component per axis."""
    return position_moments(wf.grid, wf.values)[0]


def position_variance(wf: WaveFunction) -> np.ndarray:
    """Variance of the position density per axis, in um^2."""
    return position_moments(wf.grid, wf.values)[1]


def expectation_momentum(wf: WaveFunction) -> np.ndarray:
    """First moment of the discrete-Fourier momentum density (hbar/um)."""
    spectrum = np.abs(np.fft.fftn(wf.values)) ** 2
    total = spectrum.sum()
    out = np.empty(wf.grid.ndim)
    for a in range(wf.grid.ndim):
        other = tuple(ax for ax in range(wf.grid.ndim) if ax != a)
        m = spectrum.sum(axis=other) if other else spectrum
        out[a] = float(np.dot(m, wf.grid.wavenumbers[a])) / total
    return out


def fidelity(wf_a: WaveFunction, wf_b: WaveFunction) -> float:
    """|<a|b>| with cell-volume weighting; 1 means identical up to phase."""
    if wf_a.grid != wf_b.grid:
        raise GridMismatchError("fidelity requires both states on the same grid")
    overlap = np.vdot(wf_a.values, wf_b.values) * wf_a.grid.cell_volume
    return float(np.abs(overlap))


def boundary_density(wf: WaveFunction) -> float:
    """Largest |psi|^2 on the outermost cell shell (periodic-wrap indicator)."""
    rho = density(wf)
    if wf.grid.ndim == 1:
        return float(max(rho[0], rho[-1]))
    edges = [rho[0, :], rho[-1, :], rho[:, 0], rho[:, -1]]
    return float(max(e.max() for e in edges))
