"""Unitary self-dynamics: Hamiltonian application and split-step propagation.

The propagator is the symmetric (Strang) split

    exp(-i V dt/2) . exp(-i T dt) . exp(-i V dt/2)

with the kinetic factor applied exactly in Fourier space, so the step is
norm-preserving to round-off and second-order accurate in dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridMismatchError
from .grids import Grid
from .potentials import Potential, potential_table_internal
from .state import WaveFunction
from .units import mass_kg_to_internal


@dataclass(frozen=True)
class Hamiltonian:
    """Kinetic + potential energy of the particle, in internal units."""

    grid: Grid
    potential: Potential
    mass: float  # internal units; math.inf freezes the kinetic term

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")

    @classmethod
    def from_si(cls, grid: Grid, potential: Potential, mass_kg: float) -> "Hamiltonian":
        mass = math.inf if math.isinf(mass_kg) else mass_kg_to_internal(mass_kg)
        return cls(grid, potential, mass)

    @cached_property
    def potential_values(self) -> np.ndarray:
        v = potential_table_internal(self.potential, self.grid)
        v.setflags(write=False)
        return v

    @cached_property
    def kinetic_values(self) -> np.ndarray:
        """k^2/2m on the FFT-ordered wavenumber mesh."""
        if math.isinf(self.mass):
            k = np.zeros(self.grid.shape)
        else:
            k = self.grid.wavenumber_mesh_sq() / (2.0 * self.mass)
        k.setflags(write=False)
        return k

    @property
    def is_static(self) -> bool:
        """True when H is exactly zero (no self-dynamics at all)."""
        return math.isinf(self.mass) and not self.potential_values.any()


def apply_hamiltonian(ham: Hamiltonian, wf: WaveFunction) -> WaveFunction:
    """(T + V) psi, unnormalized; kinetic term via spectral second derivative."""
    if wf.grid != ham.grid:
        raise GridMismatchError("state and Hamiltonian grids differ")
    kinetic = np.fft.ifftn(ham.kinetic_values * np.fft.fftn(wf.values))
    return WaveFunction(wf.grid, kinetic + ham.potential_values * wf.values)


def energy_expectation(ham: Hamiltonian, wf: WaveFunction) -> float:
    """<psi|H|psi> in internal energy units (state assumed normalized)."""
    h_psi = apply_hamiltonian(ham, wf)
    return float(np.real(np.vdot(wf.values, h_psi.values)) * wf.grid.cell_volume)


class SplitStepPropagator:
    """Caches the phase factors of one Strang step for a fixed (H, dt).

    ``step`` advances one full dt.  ``half_in``/``half_out`` expose the two
    halves of the palindromic splitting V/2 . K/2 | K/2 . V/2 used by the
    monitored steppers, which insert the measurement update in the middle.
    """

    def __init__(self, ham: Hamiltonian, dt: float):
        self.ham = ham
        self.dt = float(dt)
        self.grid = ham.grid
        self._identity = ham.is_static or self.dt == 0.0
        if not self._identity:
            v = ham.potential_values
            k = ham.kinetic_values
            self._exp_v_half = np.exp(-0.5j * self.dt * v)
            self._exp_v_full = self._exp_v_half * self._exp_v_half
            self._exp_k_full = np.exp(-1.0j * self.dt * k)
            self._exp_k_half = np.exp(-0.5j * self.dt * k)

    def step(self, values: np.ndarray) -> np.ndarray:
        if self._identity:
            return values
        out = self._exp_v_half * values
        out = np.fft.ifftn(self._exp_k_full * np.fft.fftn(out))
        out *= self._exp_v_half
        return out

    def step_lie(self, values: np.ndarray) -> np.ndarray:
        """First-order (Lie) split step V . K, used by the Euler-Maruyama
        scheme whose deterministic part is first order by construction."""
        if self._identity:
            return values
        return self._exp_v_full * np.fft.ifftn(self._exp_k_full * np.fft.fftn(values))

    def half_in(self, values: np.ndarray) -> np.ndarray:
        """First half of a monitored step: V/2 then K/2."""
        if self._identity:
            return values
        return np.fft.ifftn(self._exp_k_half * np.fft.fftn(self._exp_v_half * values))

    def half_out(self, values: np.ndarray) -> np.ndarray:
        """Second half of a monitored step: K/2 then V/2."""
        if self._identity:
            return values
        return self._exp_v_half * np.fft.ifftn(self._exp_k_half * np.fft.fftn(values))


def unitary_step(ham: Hamiltonian, wf: WaveFunction, dt: float, n_steps: int = 1) -> WaveFunction:
    """Advance by ``n_steps`` Strang steps of size dt.

    Convenience wrapper; loops that run many steps with the same (H, dt)
    should hold a :class:`SplitStepPropagator` instead.
    """
    if wf.grid != ham.grid:
        raise GridMismatchError("state and Hamiltonian grids differ")
    prop = SplitStepPropagator(ham, dt)
    values = wf.values
    for _ in range(n_steps):
        values = prop.step(values)
    return WaveFunction(wf.grid, values)
