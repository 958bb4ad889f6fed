"""Internal unit system and physical constants.

Everything inside the simulation core uses length in micrometres, time in
milliseconds and hbar = 1.  The derived units are then

    energy    hbar/ms            = 6.5821e-13 eV
    mass      hbar*ms/um^2       = 1.0545718e-25 kg
    momentum  hbar/um            = 1.0545718e-28 kg m/s

SI and eV values only appear at the configuration boundary; conversion
happens here and nowhere else.
"""

from __future__ import annotations

import math

# CODATA / SI-exact constants
HBAR_JS = 1.0545718e-34
EV_J = 1.602176634e-19
BOLTZMANN_J_PER_K = 1.380649e-23
HYDROGEN_MASS_KG = 1.6735e-27

# internal-unit sizes expressed in SI / eV
MASS_UNIT_KG = HBAR_JS * 1e-3 / 1e-12        # hbar * ms / um^2
ENERGY_UNIT_EV = HBAR_JS / 1e-3 / EV_J       # hbar / ms, in eV
MOMENTUM_UNIT_KG_M_S = HBAR_JS / 1e-6        # hbar / um


def mass_kg_to_internal(mass_kg: float) -> float:
    if mass_kg <= 0:
        raise ValueError(f"mass must be positive, got {mass_kg} kg")
    return mass_kg / MASS_UNIT_KG


def energy_ev_to_internal(energy_ev: float) -> float:
    return energy_ev / ENERGY_UNIT_EV


def energy_internal_to_ev(energy: float) -> float:
    return energy * ENERGY_UNIT_EV


def momentum_si_to_internal(momentum_kg_m_s: float) -> float:
    return momentum_kg_m_s / MOMENTUM_UNIT_KG_M_S


def momentum_internal_to_si(momentum: float) -> float:
    return momentum * MOMENTUM_UNIT_KG_M_S


def thermal_momentum_si(temperature_k: float, mass_kg: float) -> float:
    """Momentum sqrt(m*kB*T) in kg m/s of a thermal kick of the given strength."""
    if temperature_k < 0:
        raise ValueError(f"temperature must be non-negative, got {temperature_k} K")
    return math.sqrt(mass_kg * BOLTZMANN_J_PER_K * temperature_k)


HYDROGEN_MASS_INTERNAL = mass_kg_to_internal(HYDROGEN_MASS_KG)
