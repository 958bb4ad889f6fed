"""Scenario configuration files: nested key/value YAML documents.

Every dimensional field carries its unit in the key name (``*_um``,
``*_ms``, ``*_ev``, ``*_k``, ``*_kg``).  Unknown keys anywhere are
rejected.  The serializer emits a canonical document whose re-parse
compares equal, and whose SHA-256 is the run's config hash.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .grids import Grid
from .measurement import MonitorConfig
from .potentials import (
    FreeSpace,
    Harmonic,
    HenonHeiles,
    MexicanHat,
    QuarticDoubleWell,
    Tabulated,
)
from .scenarios import PerturbationEvent, ScenarioConfig
from .sde import SdeScheme
from .state import GaussianPacketSpec
from . import units


_REQUIRED = object()


class _Section:
    """Dict wrapper that tracks consumed keys and reports full key paths."""

    def __init__(self, data, path):
        if not isinstance(data, dict):
            raise ConfigError(f"section '{path}' must be a mapping")
        self.data = data
        self.path = path
        self.used = set()

    def _label(self, key):
        return f"{self.path}.{key}" if self.path else key

    def take(self, key, default=_REQUIRED):
        self.used.add(key)
        if key not in self.data:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key '{self._label(key)}'")
            return default
        return self.data[key]

    def section(self, key, required=True):
        if key not in self.data and not required:
            self.used.add(key)
            return None
        raw = self.take(key)
        return _Section(raw, self._label(key))

    def finish(self):
        unknown = set(self.data) - self.used
        if unknown:
            name = self.path or "top level"
            raise ConfigError(f"unknown key(s) in {name}: {', '.join(sorted(unknown))}")


def _number(value, label):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{label}' must be a number, got {value!r}")
    return float(value)


def _vector(value, label):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"'{label}' must be a non-empty list of numbers")
    return tuple(_number(v, label) for v in value)


def _parse_grid(sec: _Section) -> Grid:
    extent = sec.take("extent_um")
    if not isinstance(extent, list) or not all(isinstance(e, list) and len(e) == 2 for e in extent):
        raise ConfigError("'grid.extent_um' must be a list of [min, max] pairs")
    extents = tuple((_number(e[0], "grid.extent_um"), _number(e[1], "grid.extent_um"))
                    for e in extent)
    points = sec.take("points")
    if not isinstance(points, list):
        raise ConfigError("'grid.points' must be a list of integers")
    try:
        grid = Grid(extents, tuple(int(p) for p in points))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc
    sec.finish()
    return grid


_POTENTIAL_KINDS = {
    "quartic-double-well": (QuarticDoubleWell,
                            {"half_separation_um": "half_separation_um",
                             "barrier_height_ev": "barrier_height_ev"}),
    "mexican-hat": (MexicanHat, {"well_radius_um": "well_radius_um",
                                 "peak_height_ev": "peak_height_ev"}),
    "henon-heiles": (HenonHeiles, {"quartic_ev_per_um4": "quartic_ev_um4",
                                   "quadratic_um2": "quadratic_um2",
                                   "cubic_um": "cubic_um"}),
}


def _parse_potential(sec: _Section, grid: Grid, base_dir: Path):
    kind = sec.take("kind")
    if kind in _POTENTIAL_KINDS:
        cls, keymap = _POTENTIAL_KINDS[kind]
        kwargs = {attr: _number(sec.take(key), f"potential.{key}")
                  for key, attr in keymap.items()}
        sec.finish()
        try:
            return cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"invalid potential: {exc}") from exc
    if kind == "harmonic":
        stiffness = _vector(sec.take("stiffness_ev_per_um2"), "potential.stiffness_ev_per_um2")
        center = _vector(sec.take("center_um", [0.0] * grid.ndim), "potential.center_um")
        sec.finish()
        try:
            return Harmonic(stiffness, center)
        except ValueError as exc:
            raise ConfigError(f"invalid potential: {exc}") from exc
    if kind == "free":
        sec.finish()
        return FreeSpace()
    if kind == "tabulated":
        rel = sec.take("path")
        sec.finish()
        from .formats import read_snapshot  # deferred: formats imports sde
        path = (base_dir / rel) if not Path(rel).is_absolute() else Path(rel)
        if not path.is_file():
            raise ConfigError(f"tabulated potential file not found: {path}")
        tab_grid, values = read_snapshot(path)
        if np.iscomplexobj(values):
            raise ConfigError("tabulated potential snapshots must carry real samples")
        if tab_grid != grid:
            raise ConfigError("tabulated potential grid does not match the scenario grid")
        pot = Tabulated.from_array(tab_grid, values)
        object.__setattr__(pot, "path", str(rel))
        return pot
    raise ConfigError(f"unknown potential kind {kind!r}")


def _parse_packet(sec: _Section, label) -> GaussianPacketSpec:
    center = _vector(sec.take("center_um"), f"{label}.center_um")
    width = _number(sec.take("width_um"), f"{label}.width_um")
    momentum = sec.take("momentum_per_um", None)
    if momentum is not None:
        momentum = _vector(momentum, f"{label}.momentum_per_um")
    sec.finish()
    try:
        return GaussianPacketSpec(center, width, momentum or ())
    except ValueError as exc:
        raise ConfigError(f"invalid {label} packet: {exc}") from exc


def _parse_monitor(sec: _Section):
    sigma = sec.take("sigma_um", None)
    tau = sec.take("tau_ms", None)
    gamma = sec.take("gamma_per_um2_ms", None)
    axes = sec.take("measured_axes", None)
    sec.finish()
    if axes is not None:
        if not isinstance(axes, list):
            raise ConfigError("'monitor.measured_axes' must be a list of axis indices")
        axes = tuple(int(a) for a in axes)
    kwargs = {}
    for name, val in (("sigma", sigma), ("tau", tau), ("gamma", gamma)):
        if val is not None:
            kwargs[name] = _number(val, f"monitor.{name}")
    try:
        return MonitorConfig(**kwargs), axes
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_perturbation(raw, index) -> PerturbationEvent:
    sec = _Section(raw, f"perturbations[{index}]")
    time = _number(sec.take("time_ms"), f"{sec.path}.time_ms")
    temperature = sec.take("temperature_k", None)
    momentum = sec.take("momentum_per_um", None)
    axis = sec.take("axis", 0)
    sec.finish()
    try:
        if momentum is not None:
            return PerturbationEvent(time, momentum=_vector(momentum, "momentum_per_um"))
        if temperature is None:
            raise ConfigError(
                f"'{sec.path}' needs temperature_k or momentum_per_um")
        return PerturbationEvent(time, temperature_k=_number(temperature, "temperature_k"),
                                 axis=int(axis))
    except ValueError as exc:
        raise ConfigError(f"invalid perturbation: {exc}") from exc


def parse_config_text(text: str, base_dir: Path | None = None,
                      label: str = "config") -> ScenarioConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"config parse error{where}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a mapping of sections")
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()

    top = _Section(raw, "")
    meta = top.section("meta", required=False)
    if meta is not None:
        label = str(meta.take("label", label))
        meta.finish()
    grid = _parse_grid(top.section("grid"))
    potential = _parse_potential(top.section("potential"), grid, base_dir)
    particle = top.section("particle", required=False)
    mass_kg = units.HYDROGEN_MASS_KG
    if particle is not None:
        mass_kg = _number(particle.take("mass_kg", units.HYDROGEN_MASS_KG),
                          "particle.mass_kg")
        particle.finish()
    initial = top.section("initial")
    true_spec = _parse_packet(initial.section("true_state"), "initial.true_state")
    est_spec = _parse_packet(initial.section("estimate"), "initial.estimate")
    initial.finish()
    monitor, axes = _parse_monitor(top.section("monitor"))
    run = top.section("run")
    mode = str(run.take("mode", "continuous"))
    scheme = str(run.take("scheme", "weak2"))
    dt = _number(run.take("dt_ms"), "run.dt_ms")
    duration = _number(run.take("duration_ms"), "run.duration_ms")
    seed = run.take("seed", 1)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("'run.seed' must be an integer")
    snap = run.take("snapshot_times_ms", [])
    if not isinstance(snap, list):
        raise ConfigError("'run.snapshot_times_ms' must be a list")
    run.finish()
    raw_perturbations = top.take("perturbations", [])
    if not isinstance(raw_perturbations, list):
        raise ConfigError("'perturbations' must be a list")
    perturbations = tuple(_parse_perturbation(p, i) for i, p in enumerate(raw_perturbations))
    top.finish()

    try:
        return ScenarioConfig(
            label=label, grid=grid, potential=potential,
            initial_true=true_spec, initial_estimate=est_spec,
            monitor=monitor, dt=dt, duration=duration, mass_kg=mass_kg,
            measured_axes=axes, mode=mode, scheme=SdeScheme.parse(scheme),
            seed=seed, snapshot_times=tuple(float(t) for t in snap),
            perturbations=perturbations)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    return parse_config_text(text, base_dir=path.parent, label=path.stem)


_POTENTIAL_SERIALIZERS = {
    QuarticDoubleWell: lambda p: {"kind": "quartic-double-well",
                                  "half_separation_um": p.half_separation_um,
                                  "barrier_height_ev": p.barrier_height_ev},
    MexicanHat: lambda p: {"kind": "mexican-hat",
                           "well_radius_um": p.well_radius_um,
                           "peak_height_ev": p.peak_height_ev},
    HenonHeiles: lambda p: {"kind": "henon-heiles",
                            "quartic_ev_per_um4": p.quartic_ev_um4,
                            "quadratic_um2": p.quadratic_um2,
                            "cubic_um": p.cubic_um},
    Harmonic: lambda p: {"kind": "harmonic",
                         "stiffness_ev_per_um2": list(p.stiffness_ev_um2),
                         "center_um": list(p.center_um)},
    FreeSpace: lambda p: {"kind": "free"},
}


def config_to_dict(cfg: ScenarioConfig) -> dict:
    pot = cfg.potential
    if isinstance(pot, Tabulated):
        path = getattr(pot, "path", None)
        if path is None:
            raise ConfigError("tabulated potentials need a file path to serialize")
        pot_doc = {"kind": "tabulated", "path": str(path)}
    else:
        pot_doc = _POTENTIAL_SERIALIZERS[type(pot)](pot)

    def packet(spec: GaussianPacketSpec):
        doc = {"center_um": list(spec.center), "width_um": spec.width}
        if any(spec.momentum):
            doc["momentum_per_um"] = list(spec.momentum)
        return doc

    monitor = {}
    if cfg.monitor.gamma is not None:
        monitor["gamma_per_um2_ms"] = cfg.monitor.gamma
    if cfg.monitor.sigma is not None:
        monitor["sigma_um"] = cfg.monitor.sigma
    if cfg.monitor.tau is not None:
        monitor["tau_ms"] = cfg.monitor.tau
    if cfg.measured_axes is not None:
        monitor["measured_axes"] = list(cfg.measured_axes)

    doc = {
        "meta": {"label": cfg.label},
        "grid": {"extent_um": [list(e) for e in cfg.grid.extents],
                 "points": list(cfg.grid.points)},
        "potential": pot_doc,
        "particle": {"mass_kg": cfg.mass_kg},
        "initial": {"true_state": packet(cfg.initial_true),
                    "estimate": packet(cfg.initial_estimate)},
        "monitor": monitor,
        "run": {"mode": cfg.mode, "scheme": cfg.scheme.value, "dt_ms": cfg.dt,
                "duration_ms": cfg.duration, "seed": int(cfg.seed),
                "snapshot_times_ms": list(cfg.snapshot_times)},
    }
    if cfg.perturbations:
        events = []
        for ev in cfg.perturbations:
            if ev.momentum is not None:
                events.append({"time_ms": ev.time, "momentum_per_um": list(ev.momentum)})
            else:
                events.append({"time_ms": ev.time, "temperature_k": ev.temperature_k,
                               "axis": ev.axis})
        doc["perturbations"] = events
    return doc


def serialize_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=None)


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()
