"""Command-line interface.

Subcommands: run, ensemble, replay, probe-order, validate, list-scenarios.
Exit codes: 0 success, 1 usage, 2 configuration error, 3 numerical failure.
All randomness flows from --seed; the default seed is the fixed constant 1,
so repeated invocations are byte-identical (pass ``--seed random`` to opt
into entropy).
"""

from __future__ import annotations

import argparse
import logging
import secrets
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, units
from .config import config_hash, parse_config, serialize_config
from .errors import ConfigError, FormatError, NumericalBlowupError, UsageError, WavemonError
from .formats import (
    RunManifest,
    read_record,
    write_fidelity_trace,
    write_manifest,
    write_mean_fidelity,
    write_observables,
    write_record,
    write_snapshot,
    write_wavefunction,
)
from .measurement import decoherence_rate, validate_config
from .measurement import _measured_axes
from .propagation import Hamiltonian
from .scenarios import builtin_scenario, run_ensemble, run_trajectory, scenario_names
from .sde import SdeScheme, harmonic_probe_problem, replay_estimate, weak_order_probe
from .state import make_gaussian_packet, position_variance

log = logging.getLogger("wavemon")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DEFAULT_SEED = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="wavemon", description=__doc__)
    parser.add_argument("--version", action="version", version=f"wavemon {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add_common(p):
        p.add_argument("--variant", choices=("full", "desk"), default="full",
                       help="builtin scenario variant (default: full)")
        p.add_argument("--mode", choices=("discrete", "continuous"), default=None)
        p.add_argument("--scheme", choices=("em", "weak2"), default=None)
        p.add_argument("--seed", default=None,
                       help="integer seed or 'random' (default: config seed)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("-q", "--quiet", action="store_true")

    p_run = sub.add_parser("run", help="run a single trajectory")
    p_run.add_argument("config", help="config file path or builtin scenario name")
    add_common(p_run)

    p_ens = sub.add_parser("ensemble", help="run an ensemble of trajectories")
    p_ens.add_argument("config")
    p_ens.add_argument("--n", type=int, required=True, help="number of trajectories")
    p_ens.add_argument("--workers", type=int, default=1,
                       help="process-pool width for independent trajectories")
    add_common(p_ens)

    p_rep = sub.add_parser("replay", help="re-run the estimate from a stored record")
    p_rep.add_argument("record", help="QREC1 record file")
    p_rep.add_argument("config")
    add_common(p_rep)

    p_probe = sub.add_parser("probe-order",
                             help="measure the weak convergence order of both schemes")
    p_probe.add_argument("config", nargs="?", default=None,
                         help="optional config; its gamma seeds the probe strength")
    p_probe.add_argument("--n-pairs", type=int, default=96)
    p_probe.add_argument("--seed", default=None)
    p_probe.add_argument("-q", "--quiet", action="store_true")

    p_val = sub.add_parser("validate", help="check a config against the model's regime")
    p_val.add_argument("config")
    p_val.add_argument("--variant", choices=("full", "desk"), default="full")

    sub.add_parser("list-scenarios", help="list builtin scenario names")
    return parser


def _load_config(ref: str, variant: str):
    if ref in scenario_names():
        return builtin_scenario(ref, variant)
    return parse_config(ref)


def _apply_overrides(cfg, args):
    if getattr(args, "mode", None):
        cfg = replace(cfg, mode=args.mode)
    if getattr(args, "scheme", None):
        cfg = replace(cfg, scheme=SdeScheme.parse(args.scheme))
    seed = getattr(args, "seed", None)
    if seed is not None:
        if seed == "random":
            cfg = replace(cfg, seed=secrets.randbits(63))
        else:
            try:
                cfg = replace(cfg, seed=int(seed))
            except ValueError:
                raise UsageError(f"--seed must be an integer or 'random', got {seed!r}")
    return cfg


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _result_warnings(result) -> list[str]:
    return [e["detail"] for e in result.events if e.get("kind") == "warning"]


def _write_trajectory_files(out: Path, result, with_snapshots=True) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_fidelity_trace(out / "fidelity.tsv", result.times, result.fidelity)
    write_observables(out / "observables.tsv", result)
    if result.record is not None and result.record.n_steps:
        write_record(out / "record.qrec", result.record)
    if with_snapshots and result.snapshots:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        grid = result.final_true.grid
        for i, snap in enumerate(result.snapshots):
            write_snapshot(snap_dir / f"snap_{i:02d}_true.qmon", grid, snap.true_density)
            write_snapshot(snap_dir / f"snap_{i:02d}_est.qmon", grid, snap.est_density)


def _cmd_run(args) -> int:
    cfg = _apply_overrides(_load_config(args.config, args.variant), args)
    out = Path(args.out or f"wavemon-out/{cfg.label}")
    started = _utcnow()
    result = run_trajectory(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(serialize_config(cfg), encoding="utf-8")
    _write_trajectory_files(out, result)
    write_wavefunction(out / "final_true.qmon", result.final_true)
    write_wavefunction(out / "final_estimate.qmon", result.final_estimate)
    manifest = RunManifest(
        tool_version=__version__, config_hash=config_hash(cfg),
        master_seed=int(cfg.seed), scheme=cfg.scheme.value, mode=cfg.mode,
        started_utc=started, finished_utc=_utcnow(),
        warnings=_result_warnings(result))
    write_manifest(out, manifest)
    if not args.quiet:
        print(f"wrote {out}  (final fidelity {result.fidelity[-1]:.4f}, "
              f"{len(result.times) - 1} steps)")
    if result.failed:
        print(f"trajectory failed: {result.failure}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_ensemble(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    cfg = _apply_overrides(_load_config(args.config, args.variant), args)
    out = Path(args.out or f"wavemon-out/{cfg.label}-ensemble")
    out.mkdir(parents=True, exist_ok=True)
    started = _utcnow()

    def save(i, result):
        _write_trajectory_files(out / f"traj_{i:03d}", result, with_snapshots=False)

    ens = run_ensemble(cfg, args.n, on_result=save, workers=args.workers)
    (out / "config.yaml").write_text(serialize_config(cfg), encoding="utf-8")
    write_mean_fidelity(out / "mean_fidelity.tsv", ens.times, ens.mean_fidelity,
                        ens.se_fidelity, ens.n_total - ens.n_failed)
    warnings = []
    if ens.results:
        warnings = _result_warnings(ens.results[0])
    manifest = RunManifest(
        tool_version=__version__, config_hash=config_hash(cfg),
        master_seed=int(cfg.seed), scheme=cfg.scheme.value, mode=cfg.mode,
        started_utc=started, finished_utc=_utcnow(), warnings=warnings,
        extra={"n_trajectories": ens.n_total, "n_failed": ens.n_failed,
               "failed_indices": ens.failed_indices})
    write_manifest(out, manifest)
    if not args.quiet:
        print(f"wrote {out}  (n={ens.n_total}, failed={ens.n_failed}, "
              f"final mean fidelity {ens.mean_fidelity[-1]:.4f})")
    if ens.n_failed:
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_replay(args) -> int:
    cfg = _apply_overrides(_load_config(args.config, args.variant), args)
    record = read_record(args.record)
    step = cfg.step_size
    if abs(record.dt - step) > 1e-12 * max(1.0, step):
        raise ConfigError(
            f"record dt {record.dt} ms does not match the config step {step} ms")
    ham = cfg.hamiltonian()
    wf_e0 = make_gaussian_packet(cfg.grid, cfg.initial_estimate)
    axes = _measured_axes(cfg.grid, cfg.measured_axes)
    res = replay_estimate(record, wf_e0, ham, cfg.scheme, axes)
    out = Path(args.out or f"wavemon-out/{cfg.label}-replay")
    out.mkdir(parents=True, exist_ok=True)
    started = _utcnow()
    header = ["time_ms"]
    cols = [res.times]
    from .formats import _write_table, _AXIS_NAMES
    for a in range(cfg.grid.ndim):
        header.append(f"est_mean_{_AXIS_NAMES[a]}")
        cols.append(res.est_mean[:, a])
    for a in range(cfg.grid.ndim):
        header.append(f"est_var_{_AXIS_NAMES[a]}")
        cols.append(res.est_var[:, a])
    _write_table(out / "replay_observables.tsv", header, cols)
    write_wavefunction(out / "final_estimate.qmon", res.final)
    manifest = RunManifest(
        tool_version=__version__, config_hash=config_hash(cfg),
        master_seed=int(record.meta.get("seed", 0)), scheme=cfg.scheme.value,
        mode=cfg.mode, started_utc=started, finished_utc=_utcnow())
    write_manifest(out, manifest)
    if not args.quiet:
        print(f"wrote {out}  ({record.n_steps} replayed steps)")
    return EXIT_OK


def _cmd_probe_order(args) -> int:
    gamma = 0.15
    if args.config:
        cfg = _load_config(args.config, "desk")
        if cfg.monitor.gamma:
            gamma = cfg.monitor.gamma
    seed = int(args.seed) if args.seed not in (None, "random") else 2017
    ham, wf0, dts, t_final = harmonic_probe_problem()
    print(f"weak-order probe: gamma={gamma} /(um^2 ms), horizon {t_final} ms, "
          f"{args.n_pairs} antithetic pairs")
    codes = {}
    for scheme in (SdeScheme.WEAK_ORDER_2, SdeScheme.EULER_MARUYAMA):
        probe = weak_order_probe(ham, gamma, dts, args.n_pairs, scheme,
                                 wf0=wf0, t_final=t_final, seed=seed)
        codes[scheme] = probe.slope
        print(f"scheme {scheme.value}: fitted weak order {probe.slope:.2f}")
        for dt, err in zip(probe.dts, probe.errors):
            print(f"  dt={dt:8.5f} ms   |E[<q>](T) - ref| = {err:.4e} um")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = _load_config(args.config, args.variant)
    ham = cfg.hamiltonian()
    wf0 = make_gaussian_packet(cfg.grid, cfg.initial_true)
    axes = _measured_axes(cfg.grid, cfg.measured_axes)
    warnings = validate_config(cfg.monitor, wf0, ham, axes)
    gamma = cfg.monitor.gamma or 0.0
    sig_sq = float(np.max(position_variance(wf0)[list(axes)])) if axes else 0.0
    print(f"config ok: {cfg.label}")
    print(f"  gamma = {gamma:.6g} /(um^2 ms) = {gamma * 1e3:.6g} /(um^2 s)")
    print(f"  decoherence rate gamma*sigma_psi^2 = {decoherence_rate(gamma, sig_sq):.6g} /ms")
    for w in warnings:
        print(f"  warning: {w}")
    return EXIT_OK


def _cmd_list(_args) -> int:
    for name in scenario_names():
        print(name)
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "ensemble": _cmd_ensemble,
    "replay": _cmd_replay,
    "probe-order": _cmd_probe_order,
    "validate": _cmd_validate,
    "list-scenarios": _cmd_list,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return EXIT_USAGE
    except (ConfigError, FormatError, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalBlowupError, WavemonError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
