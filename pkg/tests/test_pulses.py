import numpy as np
import pytest

from spinpulse.pulses import (FourierCoefficients, PulseShape,
                              constant_rotation_pulse, eval_amplitude,
                              fourier_pulse)


def test_constant_fourier_term():
    tau_p = 2.0
    shape = fourier_pulse(tau_p, 1.0, np.pi, {"y": [np.pi / (2 * tau_p)]})
    for t in (0.0, 0.3, 1.7, tau_p):
        assert np.allclose(shape.amplitude(t), [0.0, np.pi / (2 * tau_p), 0.0])


def test_piecewise_segment_lookup():
    tau_p = 1.0
    shape = PulseShape(tau_p, 0.5, np.pi, "piecewise_constant",
                       boundaries=np.array([0.0, 0.5, 1.0]),
                       values=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    assert np.allclose(shape.amplitude(0.6 * tau_p), [0.0, 1.0, 0.0])
    assert np.allclose(shape.amplitude(0.0), [1.0, 0.0, 0.0])
    # boundary belongs to the right segment, last segment is closed
    assert np.allclose(shape.amplitude(0.5), [0.0, 1.0, 0.0])
    assert np.allclose(shape.amplitude(1.0), [0.0, 1.0, 0.0])


def test_axis_angle_samples_amplitude_matches_finite_differences():
    tau_p = 1.5
    t = np.linspace(0.0, tau_p, 257)
    axes = np.tile([0.0, 1.0, 0.0], (len(t), 1))
    shape = PulseShape(tau_p, 0.5, np.pi, "axis_angle_samples",
                       sample_times=t, sample_axes=axes,
                       sample_angles=np.pi * t / tau_p)
    v = shape.amplitude(t)
    assert np.abs(v - [0.0, np.pi / (2 * tau_p), 0.0]).max() < 1e-9
    # finite-difference cross-check of psi'/2 along the axis
    h = 1e-5
    mid = 0.4 * tau_p
    fd = (np.pi * (mid + h) / tau_p - np.pi * (mid - h) / tau_p) / (2 * h) / 2
    assert abs(shape.amplitude(mid)[1] - fd) < 1e-8


def test_time_range_error():
    shape = fourier_pulse(1.0, 0.5, np.pi, {"y": [1.0]})
    with pytest.raises(ValueError):
        shape.amplitude(-0.1)
    with pytest.raises(ValueError):
        shape.amplitude(1.1)


def test_non_finite_amplitude_rejected():
    shape = PulseShape(1.0, 0.5, np.pi, "piecewise_constant",
                       boundaries=np.array([0.0, 1.0]),
                       values=np.array([[np.inf, 0.0, 0.0]]))
    with pytest.raises(ValueError):
        shape.amplitude(0.5)


def test_shape_validation():
    with pytest.raises(ValueError):
        PulseShape(-1.0, 0.0, np.pi, "fourier", fourier=FourierCoefficients.zeros(1))
    with pytest.raises(ValueError):
        PulseShape(1.0, 2.0, np.pi, "fourier", fourier=FourierCoefficients.zeros(1))
    with pytest.raises(ValueError):  # boundaries not covering [0, tau_p]
        PulseShape(1.0, 0.5, np.pi, "piecewise_constant",
                   boundaries=np.array([0.0, 0.4]), values=np.array([[1.0, 0, 0]]))
    with pytest.raises(ValueError):  # non-unit axis sample
        PulseShape(1.0, 0.5, np.pi, "axis_angle_samples",
                   sample_times=np.array([0.0, 1.0]),
                   sample_axes=np.array([[0.0, 2.0, 0.0], [0.0, 1.0, 0.0]]),
                   sample_angles=np.array([0.0, 1.0]))


def test_rescaled_keeps_dimensionless_profile():
    shape = fourier_pulse(1.0, 0.4, np.pi, {"y": [-np.pi / 2, 0.3]}, {"y": [0.1]})
    scaled = shape.rescaled(0.01)
    assert scaled.tau_p == pytest.approx(0.01)
    assert scaled.tau_s == pytest.approx(0.004)
    t_frac = 0.3
    v0 = shape.amplitude(t_frac * shape.tau_p)
    v1 = scaled.amplitude(t_frac * scaled.tau_p)
    assert np.allclose(v1 * scaled.tau_p, v0 * shape.tau_p)


def test_constant_rotation_pulse_mean():
    shape = constant_rotation_pulse(2.0, np.pi)
    assert np.allclose(shape.amplitude(0.7), [0.0, -np.pi / 4.0, 0.0])
    assert eval_amplitude(shape, 0.7)[1] == pytest.approx(-np.pi / 4.0)
