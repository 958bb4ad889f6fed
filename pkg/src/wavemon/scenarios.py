"""Scenario configurations and trajectory/ensemble execution.

Each builtin scenario comes in two variants: ``full`` carries the original
full-scale parameter set (intended for offline runs), ``desk`` is scaled so
that statistical checks complete in minutes on one core.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import units
from .errors import NumericalBlowupError, WavemonError, ZeroNormError
from .grids import Grid
from .measurement import (
    MonitorConfig,
    _measured_axes,
    discrete_monitor_step,
    validate_config,
)
from .potentials import (
    FreeSpace,
    Harmonic,
    HenonHeiles,
    MexicanHat,
    Potential,
    QuarticDoubleWell,
)
from .propagation import Hamiltonian, SplitStepPropagator
from .sde import ContinuousMonitor, MeasurementRecord, SdeScheme
from .state import (
    BOUNDARY_DENSITY_LIMIT,
    GaussianPacketSpec,
    WaveFunction,
    boundary_density,
    make_gaussian_packet,
    position_moments,
)

log = logging.getLogger(__name__)

MODES = ("continuous", "discrete")


def temperature_to_kick(temperature_k: float, mass_kg: float) -> float:
    """Momentum sqrt(m kB T) of a thermal collision, in kg m/s."""
    return units.thermal_momentum_si(temperature_k, mass_kg)


def momentum_kick(wf: WaveFunction, momentum) -> WaveFunction:
    """Multiply by exp(i p.q) (p in 1/um, hbar=1): a sudden collision.

    Pure phase: the position density is untouched, the momentum density is
    shifted by p.  A kick beyond the grid's Nyquist wavenumber cannot be
    represented and wraps around; that is logged loudly but not fatal.
    """
    momentum = np.atleast_1d(np.asarray(momentum, dtype=float))
    if momentum.shape != (wf.grid.ndim,):
        raise ValueError(f"momentum must have {wf.grid.ndim} components")
    phase = np.zeros(wf.grid.shape)
    for a, p in enumerate(momentum):
        if abs(p) > 0.9 * wf.grid.max_wavenumber(a):
            log.warning(
                "momentum kick %.4g /um exceeds 90%% of the grid Nyquist "
                "wavenumber %.4g /um on axis %d and will alias",
                p, wf.grid.max_wavenumber(a), a)
        if p:
            phase = phase + p * wf.grid.coord(a)
    return WaveFunction(wf.grid, wf.values * np.exp(1j * phase))


@dataclass(frozen=True)
class PerturbationEvent:
    """A momentum kick at a given time, either as an explicit wave-vector
    per axis (1/um) or as an equivalent collision temperature on one axis."""

    time: float
    momentum: tuple[float, ...] | None = None
    temperature_k: float | None = None
    axis: int = 0

    def __post_init__(self):
        if (self.momentum is None) == (self.temperature_k is None):
            raise ValueError("give exactly one of momentum or temperature_k")
        if self.momentum is not None:
            object.__setattr__(self, "momentum",
                               tuple(float(p) for p in np.atleast_1d(self.momentum)))
        if self.temperature_k is not None and self.temperature_k < 0:
            raise ValueError("temperature must be non-negative")
        if self.time < 0:
            raise ValueError("perturbation time must be non-negative")

    def kick_vector(self, ndim: int, mass_kg: float) -> np.ndarray:
        if self.momentum is not None:
            if len(self.momentum) != ndim:
                raise ValueError(f"kick momentum must have {ndim} components")
            return np.asarray(self.momentum, dtype=float)
        p_si = temperature_to_kick(self.temperature_k, mass_kg)
        vec = np.zeros(ndim)
        vec[self.axis] = units.momentum_si_to_internal(p_si)
        return vec


@dataclass
class ScenarioConfig:
    label: str
    grid: Grid
    potential: Potential
    initial_true: GaussianPacketSpec
    initial_estimate: GaussianPacketSpec
    monitor: MonitorConfig
    dt: float
    duration: float
    mass_kg: float = units.HYDROGEN_MASS_KG
    measured_axes: tuple[int, ...] | None = None
    mode: str = "continuous"
    scheme: SdeScheme = SdeScheme.WEAK_ORDER_2
    seed: int = 1
    snapshot_times: tuple[float, ...] = ()
    perturbations: tuple[PerturbationEvent, ...] = ()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        self.scheme = SdeScheme.parse(self.scheme)
        if not (self.duration >= self.dt > 0):
            raise ValueError("need duration >= dt > 0")
        if self.measured_axes is not None:
            self.measured_axes = tuple(int(a) for a in self.measured_axes)
        axes = _measured_axes(self.grid, self.measured_axes)
        if not axes and self.monitor.gamma:
            raise ValueError("monitoring with gamma > 0 needs at least one measured axis")
        self.snapshot_times = tuple(float(t) for t in self.snapshot_times)
        self.perturbations = tuple(self.perturbations)
        for ev in self.perturbations:
            if ev.time > self.duration:
                raise ValueError(f"perturbation at t={ev.time} ms is past the horizon")
        if int(self.seed) < 0 or int(self.seed) >= 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    @property
    def step_size(self) -> float:
        """Stepping interval: dt in continuous mode, tau in discrete mode."""
        if self.mode == "discrete":
            if self.monitor.tau is None:
                raise ValueError("discrete mode needs an explicit (sigma, tau) pair")
            return self.monitor.tau
        return self.dt

    def hamiltonian(self) -> Hamiltonian:
        return Hamiltonian.from_si(self.grid, self.potential, self.mass_kg)


@dataclass
class DensitySnapshot:
    time: float
    true_density: np.ndarray
    est_density: np.ndarray


@dataclass
class TrajectoryResult:
    times: np.ndarray
    fidelity: np.ndarray
    true_mean: np.ndarray
    true_var: np.ndarray
    est_mean: np.ndarray
    est_var: np.ndarray
    snapshots: list
    record: MeasurementRecord | None
    events: list
    provenance: dict
    final_true: WaveFunction | None = None
    final_estimate: WaveFunction | None = None
    failed: bool = False
    failure: str | None = None


def _observe(grid, values):
    return position_moments(grid, values)


def _overlap(grid, a, b):
    return float(np.abs(np.vdot(a, b)) * grid.cell_volume)


def run_trajectory(config: ScenarioConfig, keep_snapshots: bool = True,
                   record_stride: int = 1) -> TrajectoryResult:
    """Co-evolve the true state and the estimate for one seed.

    Perturbations hit only the true state (the estimator is unaware of
    them).  On numerical blow-up the traces are truncated at the last valid
    step and the result is flagged ``failed`` instead of raising.
    ``record_stride`` thins the observable traces (the measurement record
    always keeps every step); the final step is always recorded.
    """
    grid = config.grid
    ham = config.hamiltonian()
    axes = _measured_axes(grid, config.measured_axes)
    wf = make_gaussian_packet(grid, config.initial_true)
    wf_e = make_gaussian_packet(grid, config.initial_estimate)
    events: list = []
    for w in validate_config(config.monitor, wf, ham, axes):
        events.append({"time": 0.0, "kind": "warning", "detail": w})

    dt = config.step_size
    n_steps = max(1, int(round(config.duration / dt)))
    gamma = config.monitor.gamma or 0.0
    rng = np.random.default_rng(int(config.seed))
    stride = max(1, int(record_stride))

    monitor = None
    propagator = None
    if config.mode == "continuous":
        monitor = ContinuousMonitor(ham, dt, gamma, config.scheme, axes)
    else:
        propagator = SplitStepPropagator(ham, dt)

    kick_steps: dict[int, list[PerturbationEvent]] = {}
    for ev in config.perturbations:
        kick_steps.setdefault(int(round(ev.time / dt)), []).append(ev)
    snap_steps = {int(round(t / dt)): t for t in config.snapshot_times}

    rows = [k for k in range(0, n_steps + 1) if k % stride == 0 or k == n_steps]
    row_of = {k: i for i, k in enumerate(rows)}
    times = dt * np.asarray(rows, dtype=float)
    fid = np.empty(len(rows))
    true_mean = np.empty((len(rows), grid.ndim))
    true_var = np.empty((len(rows), grid.ndim))
    est_mean = np.empty((len(rows), grid.ndim))
    est_var = np.empty((len(rows), grid.ndim))
    increments = np.zeros((n_steps, len(axes)))
    snapshots: list = []
    boundary_flagged = False

    def observe(i, t_vals, e_vals):
        fid[i] = _overlap(grid, t_vals, e_vals)
        true_mean[i], true_var[i] = _observe(grid, t_vals)
        est_mean[i], est_var[i] = _observe(grid, e_vals)

    true_vals = wf.values
    est_vals = wf_e.values
    observe(0, true_vals, est_vals)
    if 0 in snap_steps and keep_snapshots:
        snapshots.append(DensitySnapshot(0.0, np.abs(true_vals) ** 2, np.abs(est_vals) ** 2))

    failed = False
    failure = None
    last = n_steps
    for k in range(n_steps):
        t = k * dt
        for ev in kick_steps.get(k, ()):
            kick = ev.kick_vector(grid.ndim, config.mass_kg)
            true_vals = momentum_kick(WaveFunction(grid, true_vals), kick).values
            events.append({"time": float(t), "kind": "momentum-kick",
                           "momentum_per_um": kick.tolist()})
        try:
            if config.mode == "continuous":
                true_vals, est_vals, dq = monitor.step_pair(true_vals, est_vals, rng)
                if dq is not None:
                    increments[k] = dq
            else:
                n_ev = len(events)
                wf_t, wf_est, outcome = discrete_monitor_step(
                    ham, WaveFunction(grid, true_vals), WaveFunction(grid, est_vals),
                    config.monitor, rng, axes, events, propagator, time=(k + 1) * dt)
                for entry in events[n_ev:]:
                    entry.setdefault("time", (k + 1) * dt)
                true_vals, est_vals = wf_t.values, wf_est.values
                increments[k] = outcome.position * dt
        except (NumericalBlowupError, ZeroNormError) as exc:
            failed = True
            failure = str(exc)
            last = k
            events.append({"time": float(t), "kind": "failure", "detail": failure})
            log.error("trajectory failed at t=%.4g ms: %s", t, failure)
            break
        if (k + 1) in row_of:
            observe(row_of[k + 1], true_vals, est_vals)
        if (k + 1) in snap_steps:
            if keep_snapshots:
                snapshots.append(DensitySnapshot(
                    (k + 1) * dt, np.abs(true_vals) ** 2, np.abs(est_vals) ** 2))
            if not boundary_flagged:
                leak = boundary_density(WaveFunction(grid, true_vals))
                if leak > BOUNDARY_DENSITY_LIMIT:
                    boundary_flagged = True
                    detail = (f"boundary density {leak:.3e} exceeds "
                              f"{BOUNDARY_DENSITY_LIMIT:.0e}; periodic wrap-around likely")
                    events.append({"time": (k + 1) * dt, "kind": "warning",
                                   "detail": detail})
                    log.warning("%s", detail)

    if failed:
        keep = [i for i, k in enumerate(rows) if k <= last]
        times, fid = times[keep], fid[keep]
        true_mean, true_var = true_mean[keep], true_var[keep]
        est_mean, est_var = est_mean[keep], est_var[keep]
    record = None
    if gamma > 0.0:
        record = MeasurementRecord(
            dt, increments[:last], start_time=0.0,
            meta={"gamma": gamma, "seed": int(config.seed), "scenario": config.label,
                  "scheme": str(config.scheme.value), "mode": config.mode})
    from .config import config_hash  # runtime import; config depends on this module

    provenance = {"seed": int(config.seed), "scheme": str(config.scheme.value),
                  "mode": config.mode, "label": config.label,
                  "config_hash": config_hash(config)}
    return TrajectoryResult(
        times=times, fidelity=fid,
        true_mean=true_mean, true_var=true_var,
        est_mean=est_mean, est_var=est_var,
        snapshots=snapshots, record=record, events=events, provenance=provenance,
        final_true=WaveFunction(grid, true_vals), final_estimate=WaveFunction(grid, est_vals),
        failed=failed, failure=failure)


def derive_seed(master_seed: int, index: int) -> int:
    """Per-trajectory stream: master XOR index (injective in the index)."""
    return (int(master_seed) ^ int(index)) & (2**64 - 1)


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean_fidelity: np.ndarray
    se_fidelity: np.ndarray
    n_total: int
    n_failed: int
    failed_indices: list
    results: list  # per-trajectory TrajectoryResult, failures included


def run_ensemble(config: ScenarioConfig, n: int, keep_snapshots: bool = False,
                 on_result=None, record_stride: int = 1,
                 workers: int = 1) -> EnsembleResult:
    """Run ``n`` independent trajectories with seeds derived from the master
    seed, and aggregate the fidelity trace on the shared time axis.

    Trajectories are independent tasks; ``workers > 1`` fans them out to a
    process pool with identical results (each member owns its RNG stream and
    aggregation is by index).  Failed trajectories are excluded from the
    aggregate but reported.  ``on_result(index, result)`` is invoked in
    index order.
    """
    if n < 1:
        raise ValueError("ensemble needs n >= 1")
    configs = [replace(config, seed=derive_seed(config.seed, i)) for i in range(n)]
    if workers > 1 and n > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(workers, n)) as pool:
            futures = [pool.submit(run_trajectory, cfg, keep_snapshots, record_stride)
                       for cfg in configs]
            results = [f.result() for f in futures]
        if on_result is not None:
            for i, res in enumerate(results):
                on_result(i, res)
    else:
        results = []
        for i, cfg in enumerate(configs):
            res = run_trajectory(cfg, keep_snapshots=keep_snapshots,
                                 record_stride=record_stride)
            if on_result is not None:
                on_result(i, res)
            results.append(res)
    good = [r for r in results if not r.failed]
    if not good:
        raise WavemonError("all ensemble trajectories failed")
    times = good[0].times
    stack = np.stack([r.fidelity for r in good])
    mean = stack.mean(axis=0)
    se = stack.std(axis=0, ddof=1) / math.sqrt(len(good)) if len(good) > 1 \
        else np.zeros_like(mean)
    failed = [i for i, r in enumerate(results) if r.failed]
    if failed:
        log.warning("%d/%d trajectories failed: indices %s", len(failed), n, failed)
    return EnsembleResult(times, mean, se, n, len(failed), failed, results)


# --------------------------------------------------------------------------
# builtin scenarios
# --------------------------------------------------------------------------

DOUBLE_WELL_GAMMA = 9.9856e-3     # 1/(um^2 ms) == 9.9856 /(um^2 s)
HENON_HEILES_GAMMA = 12.351e-3

_DOUBLE_WELL = QuarticDoubleWell(half_separation_um=94.5, barrier_height_ev=1e-13)
_MEXICAN_HAT = MexicanHat(well_radius_um=40.0, peak_height_ev=1.07e-12)
_HENON_HEILES = HenonHeiles(quartic_ev_um4=5.44e-17, quadratic_um2=13.09, cubic_um=36.18)


def _harmonic_product(omega_per_ms: float, ndim: int) -> Harmonic:
    """Harmonic product well with the given angular frequency for hydrogen."""
    stiffness_internal = units.HYDROGEN_MASS_INTERNAL * omega_per_ms**2
    k_ev = units.energy_internal_to_ev(stiffness_internal)
    return Harmonic(stiffness_ev_um2=(k_ev,) * ndim, center_um=(0.0,) * ndim)


def builtin_scenario(name: str, variant: str = "full") -> ScenarioConfig:
    """A fully populated configuration for one of the named experiments."""
    if variant not in ("full", "desk"):
        raise ValueError(f"unknown variant {variant!r}; use 'full' or 'desk'")
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ValueError(
            f"unknown scenario {name!r}; available: {', '.join(scenario_names())}"
        ) from None
    return factory(variant)


def scenario_names() -> tuple[str, ...]:
    return tuple(_BUILTINS)


def _double_well(variant):
    grid = Grid(((-500.0, 500.0),), (1024,))
    desk = variant == "desk"
    return ScenarioConfig(
        label=f"double-well-1d[{variant}]",
        grid=grid,
        potential=_DOUBLE_WELL,
        # full variant: mean energy slightly above the central barrier so
        # the packet swings across both wells; desk: confined single-well
        # swing with a short, well-defined oscillation period
        initial_true=GaussianPacketSpec((-60.0,) if desk else (-52.0,), 10.0),
        initial_estimate=GaussianPacketSpec((94.5,), 5.0),
        monitor=MonitorConfig(sigma=1400.0, gamma=DOUBLE_WELL_GAMMA),
        dt=0.02,
        duration=120.0 if desk else 400.0,
        snapshot_times=(0.0, 30.0, 60.0, 90.0, 120.0) if desk
        else (0.0, 100.0, 200.0, 300.0, 400.0),
    )


def _mexican_hat(variant):
    desk = variant == "desk"
    if desk:
        grid = Grid(((-150.0, 150.0), (-150.0, 150.0)), (128, 128))
        estimate = GaussianPacketSpec((-46.0, -46.0), 5.0)
    else:
        grid = Grid(((-220.0, 220.0), (-220.0, 220.0)), (512, 512))
        estimate = GaussianPacketSpec((-103.6, -103.6), 5.0)
    return ScenarioConfig(
        label=f"mexican-hat-2d[{variant}]",
        grid=grid,
        potential=_MEXICAN_HAT,
        initial_true=GaussianPacketSpec((-55.0, -14.8), 10.0),
        initial_estimate=estimate,
        monitor=MonitorConfig(gamma=DOUBLE_WELL_GAMMA),
        dt=0.02 if desk else 0.005,
        duration=24.0 if desk else 5.0,
        snapshot_times=(0.0, 6.0, 12.0, 24.0) if desk else (0.0, 1.0, 2.5, 5.0),
    )


def _henon_heiles(variant):
    desk = variant == "desk"
    if desk:
        grid = Grid(((-100.0, 100.0), (-100.0, 100.0)), (128, 128))
        true0 = GaussianPacketSpec((-25.0, -5.0), 7.0)
        est0 = GaussianPacketSpec((-29.0, 4.0), 7.0)
    else:
        grid = Grid(((-80.0, 80.0), (-80.0, 80.0)), (512, 512))
        true0 = GaussianPacketSpec((-14.8, -29.6), 10.0)
        est0 = GaussianPacketSpec((-29.6, -29.6), 10.0)
    return ScenarioConfig(
        label=f"henon-heiles-2d[{variant}]",
        grid=grid,
        potential=_HENON_HEILES,
        initial_true=true0,
        initial_estimate=est0,
        monitor=MonitorConfig(gamma=HENON_HEILES_GAMMA),
        dt=0.005 if desk else 0.002,
        duration=12.0 if desk else 5.0,
        snapshot_times=(0.0, 3.0, 6.0, 12.0) if desk else (0.0, 1.0, 3.15, 5.0),
    )


def _henon_heiles_kick(variant):
    base = _henon_heiles(variant)
    desk = variant == "desk"
    kick = PerturbationEvent(time=6.0 if desk else 3.15, temperature_k=1.0, axis=0)
    return replace(base, label=f"henon-heiles-kick[{variant}]",
                   perturbations=(kick,))


def _separable_degenerate(variant):
    grid = Grid(((-80.0, 80.0), (-80.0, 80.0)), (64, 64))
    return ScenarioConfig(
        label=f"separable-degenerate-2d[{variant}]",
        grid=grid,
        potential=_harmonic_product(1.0, 2),
        # x is monitored and converges; the y profiles differ on purpose and
        # their overlap is a unitary invariant, capping the fidelity
        initial_true=GaussianPacketSpec((-20.0, 0.0), 10.0),
        initial_estimate=GaussianPacketSpec((15.0, 0.0), 5.0),
        monitor=MonitorConfig(gamma=DOUBLE_WELL_GAMMA),
        measured_axes=(0,),
        dt=0.02,
        duration=24.0,
        snapshot_times=(0.0, 12.0, 24.0),
    )


def _free_localization(variant):
    grid = Grid(((-60.0, 60.0),), (512,))
    return ScenarioConfig(
        label=f"free-localization-1d[{variant}]",
        grid=grid,
        potential=FreeSpace(),
        mass_kg=math.inf,  # H = 0 exactly: static state, monitoring only
        initial_true=GaussianPacketSpec((0.0,), 10.0),
        initial_estimate=GaussianPacketSpec((10.0,), 10.0),
        monitor=MonitorConfig(gamma=DOUBLE_WELL_GAMMA),
        dt=0.05,
        duration=101.0,
        snapshot_times=(0.0, 1.0, 10.0, 101.0),
    )


_BUILTINS = {
    "double-well-1d": _double_well,
    "mexican-hat-2d": _mexican_hat,
    "henon-heiles-2d": _henon_heiles,
    "henon-heiles-kick": _henon_heiles_kick,
    "separable-degenerate-2d": _separable_degenerate,
    "free-localization-1d": _free_localization,
}
