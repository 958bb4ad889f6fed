"""State algebra: packets, moments, fidelity, normalization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavemon import (
    GaussianPacketSpec,
    Grid,
    WaveFunction,
    expectation_momentum,
    expectation_position,
    fidelity,
    make_gaussian_packet,
    norm,
    normalize,
    position_variance,
)
from wavemon.errors import GridMismatchError, ZeroNormError
from wavemon.measurement import collapse

from conftest import random_state


class TestGaussianPacket:
    def test_norm_is_one(self, grid_1d):
        wf = make_gaussian_packet(grid_1d, GaussianPacketSpec((12.0,), 10.0))
        assert abs(norm(wf) - 1.0) < 1e-9

    def test_mexican_hat_true_initial_state(self, grid_2d):
        wf = make_gaussian_packet(grid_2d, GaussianPacketSpec((-55.0, -14.8), 10.0))
        mean = expectation_position(wf)
        half_cell = 0.5 * max(grid_2d.spacing)
        assert abs(mean[0] - (-55.0)) < half_cell
        assert abs(mean[1] - (-14.8)) < half_cell
        std = np.sqrt(position_variance(wf))
        assert np.all(np.abs(std / 10.0 - 1.0) < 0.02)

    def test_variance_of_width_ten(self, grid_1d):
        wf = make_gaussian_packet(grid_1d, GaussianPacketSpec((0.0,), 10.0))
        assert abs(position_variance(wf)[0] / 100.0 - 1.0) < 0.02

    def test_too_narrow_packet_rejected(self, grid_1d):
        with pytest.raises(ValueError, match="resolved"):
            make_gaussian_packet(grid_1d, GaussianPacketSpec((0.0,), 1.0))

    def test_center_outside_grid_rejected(self, grid_1d):
        with pytest.raises(ValueError, match="outside"):
            make_gaussian_packet(grid_1d, GaussianPacketSpec((400.0,), 10.0))


class TestNorm:
    def test_scaling_linearity(self, packet_1d):
        doubled = WaveFunction(packet_1d.grid, 2.0 * packet_1d.values)
        assert abs(norm(doubled) - 2.0 * norm(packet_1d)) < 1e-12

    def test_zero_field(self, grid_1d):
        wf = WaveFunction(grid_1d, np.zeros(grid_1d.shape, dtype=complex))
        assert norm(wf) == 0.0

    def test_normalize_restores_scaled_state(self, packet_1d):
        scaled = WaveFunction(packet_1d.grid, 0.5 * packet_1d.values)
        back = normalize(scaled)
        assert np.abs(back.values - packet_1d.values).max() < 1e-12

    def test_normalize_zero_raises(self, grid_1d):
        wf = WaveFunction(grid_1d, np.zeros(grid_1d.shape, dtype=complex))
        with pytest.raises(ZeroNormError):
            normalize(wf)

    def test_normalize_after_collapse(self, packet_1d):
        post = collapse(packet_1d, np.array([5.0]), 20.0)
        rho_sum = (np.abs(post.values) ** 2).sum() * post.grid.cell_volume
        assert abs(rho_sum - 1.0) < 1e-9


class TestMoments:
    def test_position_at_center(self, grid_1d):
        wf = make_gaussian_packet(grid_1d, GaussianPacketSpec((-60.0,), 10.0))
        assert abs(expectation_position(wf)[0] + 60.0) < 0.5 * grid_1d.spacing[0]

    def test_symmetric_superposition_centers_at_zero(self, grid_1d):
        a = make_gaussian_packet(grid_1d, GaussianPacketSpec((-40.0,), 8.0))
        b = make_gaussian_packet(grid_1d, GaussianPacketSpec((40.0,), 8.0))
        wf = normalize(WaveFunction(grid_1d, a.values + b.values))
        assert abs(expectation_position(wf)[0]) < 0.5 * grid_1d.spacing[0]

    def test_two_packet_variance(self, grid_1d):
        # density-std w humps at +-d: variance w^2 + d^2 (cross term
        # suppressed by exp(-d^2/2w^2) ~ 4e-6 at d=5w)
        w, d = 8.0, 40.0
        a = make_gaussian_packet(grid_1d, GaussianPacketSpec((-d,), w))
        b = make_gaussian_packet(grid_1d, GaussianPacketSpec((d,), w))
        wf = normalize(WaveFunction(grid_1d, a.values + b.values))
        assert abs(position_variance(wf)[0] / (w**2 + d**2) - 1.0) < 0.02

    def test_variance_ignores_momentum_kick(self, grid_1d):
        flat = make_gaussian_packet(grid_1d, GaussianPacketSpec((0.0,), 10.0))
        kicked = make_gaussian_packet(grid_1d, GaussianPacketSpec((0.0,), 10.0, (0.8,)))
        assert abs(position_variance(kicked)[0] - position_variance(flat)[0]) < 1e-9

    def test_real_packet_has_no_momentum(self, packet_1d):
        assert abs(expectation_momentum(packet_1d)[0]) < 1e-6

    def test_momentum_offset(self, grid_1d):
        wf = make_gaussian_packet(grid_1d, GaussianPacketSpec((0.0,), 10.0, (1.2,)))
        assert abs(expectation_momentum(wf)[0] / 1.2 - 1.0) < 0.01


class TestFidelity:
    def test_self_fidelity(self, packet_1d):
        assert abs(fidelity(packet_1d, packet_1d) - 1.0) < 1e-9

    def test_global_phase_invariance(self, packet_1d):
        rotated = WaveFunction(packet_1d.grid, np.exp(1.2j) * packet_1d.values)
        assert abs(fidelity(packet_1d, rotated) - 1.0) < 1e-9

    def test_separated_gaussians_analytic_overlap(self, grid_1d):
        # equal density-std s, separation d: |<a|b>| = exp(-d^2/(8 s^2))
        s, d = 10.0, 20.0
        a = make_gaussian_packet(grid_1d, GaussianPacketSpec((0.0,), s))
        b = make_gaussian_packet(grid_1d, GaussianPacketSpec((d,), s))
        expected = math.exp(-d**2 / (8 * s**2))  # 0.6065306597
        got = fidelity(a, b)
        assert abs(got - expected) < 1e-3
        # quadrature cross-check of the same overlap
        quad = abs(np.sum(np.conj(a.values) * b.values) * grid_1d.cell_volume)
        assert abs(got - quad) < 1e-12

    def test_grid_mismatch_rejected(self, grid_1d, packet_1d):
        other = Grid(((-200.0, 200.0),), (512,))
        wf = make_gaussian_packet(other, GaussianPacketSpec((0.0,), 10.0))
        with pytest.raises(GridMismatchError):
            fidelity(packet_1d, wf)


@settings(max_examples=25, deadline=None)
@given(seed_a=st.integers(0, 2**31), seed_b=st.integers(0, 2**31))
def test_fidelity_symmetry_and_bound(seed_a, seed_b):
    grid = Grid(((-50.0, 50.0),), (64,))
    a, b = random_state(grid, seed_a), random_state(grid, seed_b)
    assert abs(fidelity(a, b) - fidelity(b, a)) < 1e-12
    assert fidelity(a, b) <= 1.0 + 1e-9


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_normalize_idempotent(seed):
    grid = Grid(((-50.0, 50.0),), (64,))
    wf = random_state(grid, seed)
    once = normalize(wf)
    twice = normalize(once)
    assert np.abs(twice.values - once.values).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), phase_seed=st.integers(0, 2**31))
def test_variance_pure_phase_invariance(seed, phase_seed):
    grid = Grid(((-50.0, 50.0),), (64,))
    wf = random_state(grid, seed)
    phase = np.random.default_rng(phase_seed).uniform(0, 2 * np.pi, grid.shape)
    rotated = WaveFunction(grid, wf.values * np.exp(1j * phase))
    assert abs(position_variance(rotated)[0] - position_variance(wf)[0]) < 1e-9


@settings(max_examples=10, deadline=None)
@given(center=st.floats(-80, 80), width=st.floats(6.0, 15.0))
def test_moments_converge_under_grid_refinement(center, width):
    coarse = Grid(((-300.0, 300.0),), (512,))
    fine = Grid(((-300.0, 300.0),), (1024,))
    spec = GaussianPacketSpec((center,), width)
    v_coarse = position_variance(make_gaussian_packet(coarse, spec))[0]
    v_fine = position_variance(make_gaussian_packet(fine, spec))[0]
    assert abs(v_fine / v_coarse - 1.0) < 0.005
