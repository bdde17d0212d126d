import numpy as np
import pytest
from scipy.integrate import simpson

from spinpulse.bath import BathModel, preset_bath
from spinpulse.corrections import (eta_operators, evaluate_corrections,
                                   first_order_norm_identity, nogo_diagnostics)
from spinpulse.sampling import random_fourier_shape
from spinpulse.su2 import spectral_norm
from spinpulse.trajectory import NTrajectory, integrate_axis_angle, n_trajectory


def constant_axis_ntrajectory(tau_p=1.0, nodes=2049, turns=1.0):
    """a = y, psi = turns * pi * t / tau_p, psi(0) = 0."""
    t = np.linspace(0.0, tau_p, nodes)
    psi = turns * np.pi * t / tau_p
    nhat = np.stack([-np.sin(psi), np.zeros_like(t), np.cos(psi)], axis=1)
    return NTrajectory(grid=t, nhat=nhat)


class TestResiduals:
    def test_constant_pi_pulse_first_order(self):
        tau_p = 2.0
        report = evaluate_corrections(constant_axis_ntrajectory(tau_p), tau_p / 2)
        assert np.allclose(report.r1, [-2 * tau_p / np.pi, 0.0, 0.0], atol=1e-9)
        assert report.normalized[0] == pytest.approx(2 / np.pi, abs=1e-9)

    def test_constant_pi_pulse_second_order_moment(self):
        tau_p = 2.0
        report = evaluate_corrections(constant_axis_ntrajectory(tau_p), tau_p / 2)
        expected = (0.5 - 4 / np.pi ** 2) * tau_p ** 2
        assert np.allclose(report.r2a, [0.0, 0.0, expected], atol=1e-9)
        assert report.normalized[1] == pytest.approx(0.5 - 4 / np.pi ** 2, abs=1e-9)

    def test_no_pulse_all_residuals_vanish(self):
        t = np.linspace(0.0, 1.0, 513)
        ntraj = NTrajectory(grid=t, nhat=np.tile([0.0, 0.0, 1.0], (len(t), 1)))
        for tau_s in (0.0, 0.3, 1.0):
            report = evaluate_corrections(ntraj, tau_s)
            assert report.norms.max() < 1e-14

    def test_grid_too_coarse(self):
        t = np.linspace(0.0, 1.0, 8)
        ntraj = NTrajectory(grid=t, nhat=np.tile([0.0, 0.0, 1.0], (len(t), 1)))
        with pytest.raises(ValueError):
            evaluate_corrections(ntraj, 0.5)

    def test_r2b_validity_flag_tracks_r1(self):
        report = evaluate_corrections(constant_axis_ntrajectory(), 0.5)
        assert not report.r2b_valid          # |r1| is large here
        t = np.linspace(0.0, 1.0, 513)
        flat = NTrajectory(grid=t, nhat=np.tile([0.0, 0.0, 1.0], (len(t), 1)))
        assert evaluate_corrections(flat, 0.5).r2b_valid

    def test_fixed_axis_reduction_matches_scalar_integrals(self, rng):
        """For a = y the vector residuals reduce to plain sin/cos quadratures."""
        shape = random_fourier_shape(rng, order=3, components="y")
        traj = integrate_axis_angle(shape, 1024)
        ntraj = n_trajectory(traj)
        report = evaluate_corrections(ntraj, shape.tau_s)
        t, psi = traj.grid, traj.angle
        tau_p, tau_s = shape.tau_p, shape.tau_s
        dt = t - tau_s
        sin_i = simpson(np.sin(psi), x=t)
        cos_i = simpson(np.cos(psi), x=t)
        r1_scalar = np.array([
            -sin_i + (tau_p - tau_s) * np.sin(psi[-1]) + tau_s * np.sin(psi[0]),
            0.0,
            cos_i - (tau_p - tau_s) * np.cos(psi[-1]) - tau_s * np.cos(psi[0]),
        ])
        assert np.abs(report.r1 - r1_scalar).max() < 1e-9
        r2a_scalar = np.array([
            -2 * simpson(dt * np.sin(psi), x=t)
            + (tau_p - tau_s) ** 2 * np.sin(psi[-1]) - tau_s ** 2 * np.sin(psi[0]),
            0.0,
            2 * simpson(dt * np.cos(psi), x=t)
            - (tau_p - tau_s) ** 2 * np.cos(psi[-1]) + tau_s ** 2 * np.cos(psi[0]),
        ])
        assert np.abs(report.r2a - r2a_scalar).max() < 1e-9
        # all residuals live in the plane structure of a fixed-y rotation
        assert abs(report.r1[1]) < 1e-12 and abs(report.r2a[1]) < 1e-12
        assert np.abs(report.r2b[[0, 2]]).max() < 1e-12

    def test_quadrature_convergence_under_doubling(self, rng):
        shape = random_fourier_shape(rng, order=5)
        r_coarse = evaluate_corrections(
            n_trajectory(integrate_axis_angle(shape, 1024)), shape.tau_s)
        r_fine = evaluate_corrections(
            n_trajectory(integrate_axis_angle(shape, 2048)), shape.tau_s)
        rel = np.abs(r_coarse.norms - r_fine.norms) / np.maximum(r_fine.norms, 1e-300)
        assert rel.max() < 1e-6
        assert not r_coarse.unconverged

    def test_double_integral_antisymmetric_under_time_reversal(self, rng):
        shape = random_fourier_shape(rng, order=3)
        ntraj = n_trajectory(integrate_axis_angle(shape, 1024))
        tau_p, tau_s = ntraj.tau_p, shape.tau_s
        fwd = evaluate_corrections(ntraj, tau_s)
        reversed_traj = NTrajectory(grid=(tau_p - ntraj.grid)[::-1].copy(),
                                    nhat=ntraj.nhat[::-1].copy())
        bwd = evaluate_corrections(reversed_traj, tau_p - tau_s)
        # exact antisymmetry up to the (direction-asymmetric) quadrature error
        assert np.abs(fwd.r2b + bwd.r2b).max() < 1e-6 * tau_p ** 2


class TestEtaOperators:
    def test_zero_coupling_gives_zero_operators(self):
        bath = preset_bath("spin-dynamic", coupling=0.0)
        ntraj = constant_axis_ntrajectory()
        report = evaluate_corrections(ntraj, 0.5)
        for op in eta_operators(report, bath, ntraj, 0.5):
            assert spectral_norm(op) == 0.0

    def test_first_order_vanishes_with_r1(self):
        from dataclasses import replace
        bath = preset_bath("spin-dynamic", coupling=0.3)
        ntraj = constant_axis_ntrajectory()
        report = replace(evaluate_corrections(ntraj, 0.5), r1=np.zeros(3))
        eta1, _, _ = eta_operators(report, bath, ntraj, 0.5)
        assert spectral_norm(eta1) == 0.0

    def test_bench_bath_norm_value(self):
        tau_p = 2.0
        bath = BathModel(np.diag([1.0, -1.0]).astype(complex),
                         np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex), 0.1)
        ntraj = constant_axis_ntrajectory(tau_p)
        report = evaluate_corrections(ntraj, tau_p / 2)
        eta1, _, _ = eta_operators(report, bath, ntraj, tau_p / 2)
        assert spectral_norm(eta1) == pytest.approx(0.1 * 2 * tau_p / np.pi, rel=1e-9)

    def test_operator_vector_norm_identity(self, rng):
        for _ in range(10):
            shape = random_fourier_shape(rng, order=3)
            bath = preset_bath("spin-dynamic", coupling=rng.uniform(0.05, 2.0),
                               omega_b=rng.uniform(0.2, 3.0))
            ntraj = n_trajectory(integrate_axis_angle(shape, 512))
            report = evaluate_corrections(ntraj, shape.tau_s)
            lhs, rhs = first_order_norm_identity(report, bath)
            assert lhs == pytest.approx(rhs, rel=1e-8)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            BathModel(np.zeros((2, 2)), np.eye(3), 0.1)


class TestNoGoDiagnostics:
    def test_constant_pi_pulse_gap(self):
        tau_p = 2.0
        diag = nogo_diagnostics(constant_axis_ntrajectory(tau_p), tau_p / 2)
        assert diag.pi2_gap == pytest.approx((0.5 - 4 / np.pi ** 2) * tau_p ** 2, rel=1e-9)
        assert diag.is_pi_pulse

    def test_no_pulse_saturates_end_split(self):
        t = np.linspace(0.0, 1.0, 257)
        ntraj = NTrajectory(grid=t, nhat=np.tile([0.0, 0.0, 1.0], (len(t), 1)))
        diag = nogo_diagnostics(ntraj, 1.0)
        assert diag.tsp_gap == pytest.approx(0.0, abs=1e-12)

    def test_smooth_pulse_has_positive_end_split_gap(self, rng):
        shape = random_fourier_shape(rng, order=3)
        ntraj = n_trajectory(integrate_axis_angle(shape, 512))
        diag = nogo_diagnostics(ntraj, ntraj.tau_p)
        assert diag.tsp_gap > 1e-3

    def test_gap_equals_moment_residual_projection(self):
        """pi2_gap = r2a . n(0) on the pi manifold: the probe's bound identity."""
        tau_p = 1.7
        ntraj = constant_axis_ntrajectory(tau_p)
        tau_s = 0.4 * tau_p
        report = evaluate_corrections(ntraj, tau_s)
        diag = nogo_diagnostics(ntraj, tau_s)
        assert diag.pi2_gap == pytest.approx(float(report.r2a @ ntraj.nhat[0]), abs=1e-12)
        assert np.linalg.norm(report.r2a) >= diag.pi2_gap > 0.0

    def test_gap_positivity_sample(self, rng):
        from spinpulse.sampling import pi_close_ntrajectory, random_ntrajectory
        for _ in range(50):
            ntraj, tau_s = random_ntrajectory(rng, steps=256)
            diag = nogo_diagnostics(ntraj, ntraj.tau_p)
            assert diag.tsp_gap >= -1e-9
            closed = pi_close_ntrajectory(ntraj)
            diag2 = nogo_diagnostics(closed, tau_s)
            assert diag2.is_pi_pulse
            assert diag2.pi2_gap >= -1e-9


def _random_smooth_ntrajectory(rng, nodes=257, tau_p=1.0):
    """Direct sphere-path sampler: normalize a smooth random curve in R^3.

    Independent of the pulse machinery, so the positivity sweep does not
    inherit anything from the frame integration path.
    """
    t = np.linspace(0.0, tau_p, nodes)
    while True:
        coeffs = rng.normal(size=(3, 3)) / np.array([1.0, 2.0, 3.0])
        phases = rng.uniform(0, 2 * np.pi, size=(3, 3))
        m = np.ones((nodes, 3)) * rng.normal(size=3)
        for k in range(3):
            arg = 2 * np.pi * (k + 1) * t[:, None] / tau_p + phases[k]
            m = m + np.cos(arg) * coeffs[k]
        norms = np.linalg.norm(m, axis=1)
        if norms.min() > 0.2:
            return NTrajectory(grid=t, nhat=m / norms[:, None])


def test_nogo_positivity_large_ensemble(rng):
    """Both gaps stay nonnegative over ten thousand random trajectories."""
    from spinpulse.sampling import pi_close_ntrajectory
    tsp_min, pi2_min = np.inf, np.inf
    for _ in range(10_000):
        ntraj = _random_smooth_ntrajectory(rng)
        tau_s = rng.uniform(0.0, 1.0)
        diag = nogo_diagnostics(ntraj, ntraj.tau_p)
        tsp_min = min(tsp_min, diag.tsp_gap)
        closed = pi_close_ntrajectory(ntraj)
        diag_pi = nogo_diagnostics(closed, tau_s)
        pi2_min = min(pi2_min, diag_pi.pi2_gap)
    assert tsp_min >= -1e-9
    assert pi2_min >= -1e-9
