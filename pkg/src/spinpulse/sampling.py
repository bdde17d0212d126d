"""Seeded random pulses and constraint-manifold trajectory sampling."""

from __future__ import annotations

import numpy as np

from .pulses import FourierCoefficients, PulseShape
from .trajectory import NTrajectory, integrate_axis_angle, n_trajectory


def random_fourier_shape(rng: np.random.Generator, tau_p: float = 1.0,
                         order: int = 4, components: str = "xyz",
                         scale: float = 1.0, theta: float = np.pi,
                         tau_s: float | None = None) -> PulseShape:
    """Random smooth pulse with amplitude scale ~ pi/(2 tau_p) and decaying harmonics."""
    coeff = FourierCoefficients.zeros(order)
    amp = scale * np.pi / (2.0 * tau_p)
    decay = (1.0 + np.arange(order + 1)) ** 1.5
    for comp in components:
        i = "xyz".index(comp)
        coeff.cos[i] = rng.uniform(-1.0, 1.0, order + 1) * amp / decay
        coeff.sin[i] = rng.uniform(-1.0, 1.0, order) * amp / decay[1:]
    if tau_s is None:
        tau_s = rng.uniform(0.2, 0.8) * tau_p
    return PulseShape(tau_p, tau_s, theta, "fourier", fourier=coeff)


def random_ntrajectory(rng: np.random.Generator, tau_p: float = 1.0,
                       order: int = 4, steps: int = 512,
                       scale: float = 1.0) -> tuple[NTrajectory, float]:
    """(n-trajectory of a random pulse, its tau_s)."""
    shape = random_fourier_shape(rng, tau_p=tau_p, order=order, scale=scale)
    traj = integrate_axis_angle(shape, steps)
    return n_trajectory(traj), shape.tau_s


def _slerp(a: np.ndarray, b: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Great-circle interpolation between unit vectors a and b at fractions s."""
    dot = float(np.clip(a @ b, -1.0, 1.0))
    omega = np.arccos(dot)
    if omega < 1e-9:
        out = np.tile(a, (len(s), 1))
    elif omega > np.pi - 1e-9:
        # antipodal: route through an arbitrary perpendicular
        perp = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-6:
            perp = np.cross(a, [0.0, 1.0, 0.0])
        perp = perp / np.linalg.norm(perp)
        out = (np.outer(np.cos(s * np.pi), a) + np.outer(np.sin(s * np.pi), perp))
    else:
        out = (np.outer(np.sin((1.0 - s) * omega), a) + np.outer(np.sin(s * omega), b)) / np.sin(omega)
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def pi_close_ntrajectory(ntraj: NTrajectory, fraction: float = 0.15) -> NTrajectory:
    """Replace the final stretch with a geodesic landing exactly on n(tp) = -n(0).

    Samples the constraint manifold of the pi condition rather than its
    neighborhood; the junction is continuous.
    """
    n = ntraj.n_nodes
    cut = min(n - 2, max(1, int(np.floor((1.0 - fraction) * (n - 1)))))
    target = -ntraj.nhat[0]
    s = (ntraj.grid[cut:] - ntraj.grid[cut]) / (ntraj.grid[-1] - ntraj.grid[cut])
    tail = _slerp(ntraj.nhat[cut], target, s)
    nhat = np.vstack([ntraj.nhat[:cut], tail])
    return NTrajectory(grid=ntraj.grid.copy(), nhat=nhat)
