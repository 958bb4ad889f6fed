"""Discrete unsharp position monitoring.

One monitoring round: propagate for a period tau, draw a position reading
whose density is the true position density blurred by a Gaussian of
resolution sigma, multiply both the true state and the estimate by the
square-root Gaussian window centred on the reading, renormalize.  The
single surviving strength parameter is gamma = 1/(sigma^2 tau).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MeasurementUnderflowError, ZeroNormError
from .propagation import Hamiltonian, SplitStepPropagator, energy_expectation
from .state import (
    WaveFunction,
    expectation_position,
    make_gaussian_packet,
    GaussianPacketSpec,
    normalize,
    norm,
    position_variance,
)

log = logging.getLogger(__name__)

# Posterior norm below this signals a reading incompatible with the state's
# support (a point mass ~8 resolutions away gives exp(-16) ~ 1.1e-7).
POSTERIOR_NORM_FLOOR = 1e-7


@dataclass
class MonitorConfig:
    """Resolution sigma (um), period tau (ms) and strength gamma (1/(um^2 ms)).

    Any two determine the third through gamma = 1/(sigma^2 tau); giving all
    three is allowed only when they are consistent.  gamma alone is enough
    for the continuous-limit integrator.
    """

    sigma: float | None = None
    tau: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        for name in ("sigma", "tau"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be strictly positive, got {v}")
        if self.gamma is not None and self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if self.gamma == 0.0:
            if self.sigma is not None or self.tau is not None:
                raise ValueError("gamma=0 (monitoring off) excludes sigma and tau")
            return
        given = [v is not None for v in (self.sigma, self.tau, self.gamma)]
        if sum(given) < 2 and self.gamma is None:
            raise ValueError("need gamma, or two of (sigma, tau, gamma)")
        if self.sigma is not None and self.tau is not None:
            derived = 1.0 / (self.sigma**2 * self.tau)
            if self.gamma is None:
                self.gamma = derived
            elif not math.isclose(self.gamma, derived, rel_tol=1e-6):
                raise ValueError(
                    f"gamma != 1/(sigma^2*tau): gamma={self.gamma}, "
                    f"1/(sigma^2*tau)={derived}"
                )
        elif self.gamma is not None and self.sigma is not None:
            self.tau = 1.0 / (self.gamma * self.sigma**2)
        elif self.gamma is not None and self.tau is not None:
            self.sigma = 1.0 / math.sqrt(self.gamma * self.tau)


@dataclass
class MeasurementOutcome:
    position: np.ndarray  # one component per measured axis, um
    time: float = 0.0  # ms

    def __post_init__(self):
        self.position = np.atleast_1d(np.asarray(self.position, dtype=float))
        if not np.all(np.isfinite(self.position)):
            raise ValueError("measurement outcome must be finite")


def _measured_axes(grid, axes):
    if axes is None:
        return tuple(range(grid.ndim))
    axes = tuple(int(a) for a in axes)
    if not axes or any(a < 0 or a >= grid.ndim for a in axes) or len(set(axes)) != len(axes):
        raise ValueError(f"invalid measured axes {axes} for a {grid.ndim}D grid")
    return axes


def gaussian_window(grid, reading, sigma, axes=None) -> np.ndarray:
    """Amplitude window prod_a exp(-(q_a - reading_a)^2 / (4 sigma^2))."""
    axes = _measured_axes(grid, axes)
    reading = np.atleast_1d(np.asarray(reading, dtype=float))
    if reading.shape != (len(axes),):
        raise ValueError(f"reading must have {len(axes)} components")
    exponent = np.zeros(grid.shape)
    for r, a in zip(reading, axes):
        exponent = exponent - (grid.coord(a) - r) ** 2 / (4.0 * sigma**2)
    # the constant part of the exponent drops out on renormalization; shift
    # it so the window peaks at 1 and cannot overflow
    return np.exp(exponent - exponent.max())


def outcome_density(wf: WaveFunction, sigma: float, reading, axes=None) -> float:
    """Probability density of obtaining ``reading``: the position density
    convolved with a Gaussian of std sigma on each measured axis."""
    axes = _measured_axes(wf.grid, axes)
    reading = np.atleast_1d(np.asarray(reading, dtype=float))
    rho = np.abs(wf.values) ** 2 * wf.grid.cell_volume
    kernel = np.ones(wf.grid.shape)
    for r, a in zip(reading, axes):
        q = wf.grid.coord(a)
        kernel = kernel * np.exp(-((q - r) ** 2) / (2.0 * sigma**2))
    kernel = kernel / (2.0 * np.pi * sigma**2) ** (len(axes) / 2.0)
    return float(np.sum(kernel * rho))


def sample_outcome(wf: WaveFunction, sigma: float, rng: np.random.Generator,
                   axes=None, time: float = 0.0) -> MeasurementOutcome:
    """Draw a reading from the outcome density.

    Exact mixture construction: draw a position from |psi|^2 (grid cells
    weighted by probability, uniform jitter within the cell), then add
    independent Gaussian noise of std sigma per measured axis.
    """
    axes = _measured_axes(wf.grid, axes)
    prob = (np.abs(wf.values) ** 2).ravel()
    total = prob.sum()
    if total <= 0 or not np.isfinite(total):
        raise ZeroNormError("cannot sample a measurement from a zero-norm state")
    cdf = np.cumsum(prob)
    flat = int(np.searchsorted(cdf, rng.uniform(0.0, cdf[-1]), side="right"))
    flat = min(flat, prob.size - 1)
    idx = np.unravel_index(flat, wf.grid.shape)
    reading = []
    for a in axes:
        x = wf.grid.axes[a][idx[a]] + (rng.uniform() - 0.5) * wf.grid.spacing[a]
        reading.append(x + sigma * rng.standard_normal())
    return MeasurementOutcome(np.asarray(reading), time)


def collapse(wf: WaveFunction, reading, sigma: float, axes=None) -> WaveFunction:
    """Multiply by the square-root Gaussian window and renormalize.

    Raises :class:`MeasurementUnderflowError` when the reading is so far
    from the state's support that the posterior norm underflows.
    """
    window = gaussian_window(wf.grid, reading, sigma, axes)
    posterior = WaveFunction(wf.grid, wf.values * window)
    post_norm = norm(posterior)
    if not np.isfinite(post_norm) or post_norm < POSTERIOR_NORM_FLOOR:
        raise MeasurementUnderflowError(
            f"posterior norm {post_norm:.3e} below floor {POSTERIOR_NORM_FLOOR}; "
            f"reading {np.atleast_1d(reading)} lies outside the state's support"
        )
    return WaveFunction(wf.grid, posterior.values / post_norm)


def update_estimate(wf_e: WaveFunction, reading, sigma: float, axes=None,
                    events: list | None = None) -> WaveFunction:
    """Impose the true reading on the estimate: same window, renormalized.

    If the estimate has no support near the reading the update is
    unrecoverable as algebra; the estimate is then re-seeded as a Gaussian
    of its previous per-axis width centred at the reading (unmeasured axes
    keep their previous centre), and the event is logged.
    """
    try:
        return collapse(wf_e, reading, sigma, axes)
    except MeasurementUnderflowError:
        axes_t = _measured_axes(wf_e.grid, axes)
        reading = np.atleast_1d(np.asarray(reading, dtype=float))
        widths = np.sqrt(position_variance(wf_e))
        centers = expectation_position(wf_e)
        for r, a in zip(reading, axes_t):
            centers[a] = r
        lo = np.array([e[0] for e in wf_e.grid.extents])
        hi = np.array([e[1] for e in wf_e.grid.extents])
        centers = np.clip(centers, lo + 2 * np.asarray(wf_e.grid.spacing),
                          hi - 2 * np.asarray(wf_e.grid.spacing))
        width = float(max(np.max(widths), 2.0 * max(wf_e.grid.spacing)))
        log.warning("estimate lost support at reading %s; re-seeding width %.3g um",
                    reading, width)
        if events is not None:
            events.append({"kind": "estimate-reseed", "reading": reading.tolist(),
                           "width_um": width})
        return make_gaussian_packet(wf_e.grid, GaussianPacketSpec(tuple(centers), width))


def discrete_monitor_step(ham: Hamiltonian, wf: WaveFunction, wf_e: WaveFunction,
                          cfg: MonitorConfig, rng: np.random.Generator, axes=None,
                          events: list | None = None,
                          propagator: SplitStepPropagator | None = None,
                          time: float = 0.0):
    """One monitoring round: free evolution over tau for both states, one
    reading sampled from the true state, the same window applied to both.

    Returns ``(wf, wf_e, outcome)``.  When sigma is effectively infinite
    (gamma -> 0) the window is flat and the round reduces to unitary
    propagation.
    """
    if cfg.sigma is None or cfg.tau is None:
        raise ValueError("discrete monitoring needs an explicit (sigma, tau) pair")
    prop = propagator if propagator is not None else SplitStepPropagator(ham, cfg.tau)
    wf = WaveFunction(wf.grid, prop.step(wf.values))
    wf_e = WaveFunction(wf_e.grid, prop.step(wf_e.values))
    outcome = sample_outcome(wf, cfg.sigma, rng, axes, time)
    wf = collapse(wf, outcome.position, cfg.sigma, axes)
    wf_e = update_estimate(wf_e, outcome.position, cfg.sigma, axes, events)
    return wf, wf_e, outcome


def decoherence_rate(gamma: float, sigma_psi_sq: float) -> float:
    """Average rate gamma * sigma_psi^2 at which monitoring distorts the
    self-dynamics (1/ms for internal inputs)."""
    return gamma * sigma_psi_sq


def self_dynamics_timescale(ham: Hamiltonian, wf: WaveFunction) -> float:
    """Characteristic evolution time 2*pi*hbar / (<H> - min V); infinite for
    a static Hamiltonian."""
    if ham.is_static:
        return math.inf
    scale = energy_expectation(ham, wf) - float(ham.potential_values.min())
    if scale <= 0:
        return math.inf
    return 2.0 * math.pi / scale


def validate_config(cfg: MonitorConfig, wf0: WaveFunction, ham: Hamiltonian,
                    axes=None) -> list[str]:
    """Check the continuous-limit regime conditions; returns warnings.

    (i)  a single reading must not resolve structure: sigma >= 10 sigma_psi;
    (ii) the period must be short against the self-dynamics: tau <= T/20.
    """
    warnings = []
    axes = _measured_axes(wf0.grid, axes)
    sigma_psi = float(np.sqrt(np.max(position_variance(wf0)[list(axes)])))
    if cfg.sigma is not None and cfg.sigma < 10.0 * sigma_psi:
        warnings.append(
            f"condition (i): resolution sigma={cfg.sigma:g} um resolves the state "
            f"(10*sigma_psi={10 * sigma_psi:g} um); single readings distort strongly"
        )
    timescale = self_dynamics_timescale(ham, wf0)
    if cfg.tau is not None and math.isfinite(timescale) and cfg.tau > timescale / 20.0:
        warnings.append(
            f"condition (ii): period tau={cfg.tau:g} ms is not small against the "
            f"self-dynamics timescale {timescale:g} ms"
        )
    rate = decoherence_rate(cfg.gamma, sigma_psi**2)
    log.info("monitoring strength gamma=%.6g /(um^2 ms); decoherence rate %.6g /ms",
             cfg.gamma, rate)
    return warnings
