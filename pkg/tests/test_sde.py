"""Continuous-limit integration: signal generation, stepping, replay, order."""

import math

import numpy as np
import pytest

from wavemon import (
    FreeSpace,
    GaussianPacketSpec,
    Grid,
    Hamiltonian,
    Harmonic,
    MeasurementRecord,
    SdeScheme,
    WaveFunction,
    coupled_step,
    expectation_position,
    fidelity,
    generate_dq,
    make_gaussian_packet,
    norm,
    position_variance,
    replay_estimate,
    sse_step,
    unitary_step,
    weak_order_probe,
)
from wavemon import units
from wavemon.sde import ContinuousMonitor, harmonic_probe_problem


def harmonic_ham(grid, omega):
    k_ev = units.energy_internal_to_ev(units.HYDROGEN_MASS_INTERNAL * omega**2)
    return Hamiltonian.from_si(grid, Harmonic((k_ev,), (0.0,)), units.HYDROGEN_MASS_KG)


class TestGenerateDq:
    def test_vanishing_noise_limit(self, packet_1d):
        rng = np.random.default_rng(0)
        dt = 0.01
        dq = generate_dq(packet_1d, dt, 1e12, rng)
        mean = expectation_position(packet_1d)[0]
        assert abs(dq[0] / dt - mean) < 1e-3

    def test_increment_statistics(self, packet_1d):
        gamma, dt = 0.02, 0.05
        rng = np.random.default_rng(7)
        n = 10_000
        draws = np.array([generate_dq(packet_1d, dt, gamma, rng)[0] for _ in range(n)])
        mean = expectation_position(packet_1d)[0]
        assert abs(draws.mean() - mean * dt) < 3.0 * math.sqrt(dt / gamma) / 100.0
        assert abs(draws.var() / (dt / gamma) - 1.0) < 0.03

    def test_bad_arguments(self, packet_1d):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            generate_dq(packet_1d, -0.1, 1.0, rng)
        with pytest.raises(ValueError):
            generate_dq(packet_1d, 0.1, 0.0, rng)


class TestSseStep:
    def test_zero_strength_reduces_to_unitary(self, grid_1d):
        ham = harmonic_ham(grid_1d, 1.0)
        wf = make_gaussian_packet(grid_1d, GaussianPacketSpec((-25.0,), 10.0))
        for scheme in ("weak2", "em"):
            out = sse_step(ham, wf, None, 0.02, 0.0, scheme)
            ref = unitary_step(ham, wf, 0.02)
            assert fidelity(out, ref) > 1.0 - 1e-12

    def test_static_monitoring_localizes_in_the_mean(self):
        grid = Grid(((-60.0, 60.0),), (256,))
        ham = Hamiltonian.from_si(grid, FreeSpace(), math.inf)
        gamma, dt = 0.02, 0.05
        monitor = ContinuousMonitor(ham, dt, gamma)
        wf0 = make_gaussian_packet(grid, GaussianPacketSpec((0.0,), 10.0))
        n_traj, n_steps = 16, 160
        variances = np.empty((n_traj, n_steps + 1))
        for i in range(n_traj):
            rng = np.random.default_rng(100 + i)
            values = wf0.values
            variances[i, 0] = 100.0
            for k in range(n_steps):
                values, _, _ = monitor.step_pair(values, values, rng)
                variances[i, k + 1] = position_variance(WaveFunction(grid, values))[0]
        mean_var = variances.mean(axis=0)
        assert np.all(np.diff(mean_var) < 1e-9)  # deterministic shrink for Gaussians
        expected = 1.0 / (1.0 / 100.0 + gamma * dt * np.arange(n_steps + 1))
        assert np.allclose(mean_var, expected, rtol=0.02)

    def test_ensemble_mean_follows_classical_oscillation(self):
        grid = Grid(((-80.0, 80.0),), (256,))
        omega = 2.0
        ham = harmonic_ham(grid, omega)
        wf0 = make_gaussian_packet(grid, GaussianPacketSpec((-20.0,), 6.0))
        gamma, dt = 0.02, 0.01
        period = 2 * math.pi / omega
        n_steps = round(period / dt)
        monitor = ContinuousMonitor(ham, dt, gamma)
        n_traj = 300
        finals = np.empty(n_traj)
        for i in range(n_traj):
            rng = np.random.default_rng(2000 + i)
            values = wf0.values
            for _ in range(n_steps):
                values, _, _ = monitor.step_pair(values, values, rng)
            finals[i] = expectation_position(WaveFunction(grid, values))[0]
        # classical oracle: after one full period the mean returns to -20
        sem = finals.std(ddof=1) / math.sqrt(n_traj)
        assert abs(finals.mean() - (-20.0)) < max(0.02 * 20.0, 3 * sem)

    def test_norm_restored_every_step(self, grid_1d):
        ham = harmonic_ham(grid_1d, 1.0)
        wf = make_gaussian_packet(grid_1d, GaussianPacketSpec((-25.0,), 10.0))
        rng = np.random.default_rng(3)
        values, est = wf.values, wf.values
        monitor = ContinuousMonitor(ham, 0.02, 0.05)
        for _ in range(50):
            values, est, _ = monitor.step_pair(values, est, rng)
            assert abs(norm(WaveFunction(grid_1d, values)) - 1.0) < 1e-9


class TestCoupledStep:
    def test_identical_states_stay_identical(self, grid_1d):
        ham = harmonic_ham(grid_1d, 1.0)
        wf = make_gaussian_packet(grid_1d, GaussianPacketSpec((-25.0,), 10.0))
        rng = np.random.default_rng(5)
        a, b = wf, wf.copy()
        for _ in range(50):
            a, b, dq = coupled_step(ham, a, b, 0.02, 0.05, "weak2", rng)
            assert np.abs(a.values - b.values).max() < 1e-10

    def test_zero_strength_keeps_fidelity_constant(self, grid_1d):
        ham = harmonic_ham(grid_1d, 1.0)
        a = make_gaussian_packet(grid_1d, GaussianPacketSpec((-25.0,), 10.0))
        b = make_gaussian_packet(grid_1d, GaussianPacketSpec((15.0,), 8.0))
        f0 = fidelity(a, b)
        rng = np.random.default_rng(5)
        for _ in range(100):
            a, b, dq = coupled_step(ham, a, b, 0.02, 0.0, "weak2", rng)
            assert dq is None
        assert abs(fidelity(a, b) - f0) < 1e-6


class TestReplay:
    def _run_live(self, scheme):
        grid = Grid(((-80.0, 80.0),), (128,))
        ham = harmonic_ham(grid, 1.5)
        true0 = make_gaussian_packet(grid, GaussianPacketSpec((-15.0,), 6.0))
        est0 = make_gaussian_packet(grid, GaussianPacketSpec((10.0,), 5.0))
        gamma, dt, n = 0.05, 0.02, 120
        monitor = ContinuousMonitor(ham, dt, gamma, scheme)
        rng = np.random.default_rng(77)
        values, est = true0.values, est0.values
        rows = np.empty((n, 1))
        est_means = np.empty(n + 1)
        est_means[0] = expectation_position(est0)[0]
        for k in range(n):
            values, est, dq = monitor.step_pair(values, est, rng)
            rows[k] = dq
            est_means[k + 1] = expectation_position(WaveFunction(grid, est))[0]
        record = MeasurementRecord(dt, rows, meta={"gamma": gamma, "seed": 77})
        return ham, est0, record, est_means, est

    @pytest.mark.parametrize("scheme", ["weak2", "em"])
    def test_replay_is_bit_identical(self, scheme):
        ham, est0, record, est_means, est_final = self._run_live(scheme)
        replay = replay_estimate(record, est0, ham, scheme)
        assert np.array_equal(replay.est_mean[:, 0], est_means)
        assert np.array_equal(replay.final.values, est_final)

    def test_truncated_record_gives_truncated_trajectory(self):
        ham, est0, record, _, _ = self._run_live("weak2")
        cut = MeasurementRecord(record.dt, record.increments[:50], meta=record.meta)
        replay = replay_estimate(cut, est0, ham, "weak2")
        assert len(replay.times) == 51
        assert replay.times[-1] == pytest.approx(50 * record.dt)

    def test_replay_requires_gamma(self):
        ham, est0, record, _, _ = self._run_live("weak2")
        bare = MeasurementRecord(record.dt, record.increments, meta={})
        with pytest.raises(ValueError, match="gamma"):
            replay_estimate(bare, est0, ham, "weak2")

    def test_replay_with_different_initial_estimate_still_converges(self):
        # the record pins the estimate regardless of where it starts
        grid = Grid(((-80.0, 80.0),), (128,))
        ham = harmonic_ham(grid, 1.5)
        true0 = make_gaussian_packet(grid, GaussianPacketSpec((-15.0,), 6.0))
        est0 = make_gaussian_packet(grid, GaussianPacketSpec((10.0,), 5.0))
        gamma, dt, n = 0.1, 0.02, 600
        monitor = ContinuousMonitor(ham, dt, gamma)
        rng = np.random.default_rng(3)
        values, est = true0.values, est0.values
        rows = np.empty((n, 1))
        for k in range(n):
            values, est, dq = monitor.step_pair(values, est, rng)
            rows[k] = dq
        record = MeasurementRecord(dt, rows, meta={"gamma": gamma, "seed": 3})
        other0 = make_gaussian_packet(grid, GaussianPacketSpec((-30.0,), 10.0))
        replay = replay_estimate(record, other0, ham, "weak2")
        final_true = WaveFunction(grid, values)
        assert fidelity(final_true, replay.final) > 0.9


class TestWeakOrder:
    def test_probe_error_ratios(self):
        ham, wf0, _, t_final = harmonic_probe_problem()
        dts = (0.04, 0.08)
        weak2 = weak_order_probe(ham, 0.15, dts, 24, "weak2", wf0=wf0,
                                 t_final=t_final, seed=5)
        em = weak_order_probe(ham, 0.15, dts, 24, "em", wf0=wf0,
                              t_final=t_final, seed=5)
        assert weak2.errors[1] / weak2.errors[0] == pytest.approx(4.0, abs=1.0)
        assert em.errors[1] / em.errors[0] == pytest.approx(2.0, abs=0.5)

    def test_incommensurate_dt_rejected(self):
        ham, wf0, _, t_final = harmonic_probe_problem()
        with pytest.raises(ValueError, match="commensurate"):
            weak_order_probe(ham, 0.15, (0.04, 0.05), 2, "em", wf0=wf0,
                             t_final=t_final)
