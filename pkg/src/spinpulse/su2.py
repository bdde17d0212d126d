"""Exact 2x2 unitary and 3x3 rotation algebra used by every other module."""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm, schur

from .policy import NumericPolicy, active_policy

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])

X_HAT = np.array([1.0, 0.0, 0.0])
Y_HAT = np.array([0.0, 1.0, 0.0])
Z_HAT = np.array([0.0, 0.0, 1.0])


class BranchAmbiguityError(ValueError):
    """Raised when a unitary has an eigenvalue too close to the log branch cut."""


def pauli_dot(vec) -> np.ndarray:
    """sigma . vec for a real or complex 3-vector."""
    v = np.asarray(vec)
    return v[0] * SIGMA_X + v[1] * SIGMA_Y + v[2] * SIGMA_Z


def spectral_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


def _check_unit_axis(axis, policy: NumericPolicy) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,):
        raise ValueError("axis must be a 3-vector")
    if abs(np.linalg.norm(axis) - 1.0) > policy.unit_vector_atol:
        raise ValueError(f"axis must be unit length, got |axis| = {np.linalg.norm(axis)}")
    return axis


def axis_angle_exponential(axis, angle: float, policy: NumericPolicy | None = None) -> np.ndarray:
    """Closed-form 2x2 unitary cos(angle/2) I - i sin(angle/2) (axis . sigma)."""
    policy = policy or active_policy()
    axis = _check_unit_axis(axis, policy)
    half = 0.5 * angle
    return np.cos(half) * IDENTITY_2 - 1.0j * np.sin(half) * pauli_dot(axis)


def rotation_matrix(axis, angle: float, policy: NumericPolicy | None = None) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis.

    Conjugation-consistent with :func:`axis_angle_exponential`: applying the
    returned matrix to a vector m equals conjugating m . sigma by the
    corresponding 2x2 unitary.
    """
    policy = policy or active_policy()
    axis = _check_unit_axis(axis, policy)
    c, s = np.cos(angle), np.sin(angle)
    k = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return c * np.eye(3) + s * k + (1.0 - c) * np.outer(axis, axis)


def rotate_vectors(axis, angle, vectors) -> np.ndarray:
    """Rodrigues rotation applied to rows of ``vectors``; axis/angle may be arrays.

    Vectorized form used on whole trajectories: ``axis`` of shape (n, 3),
    ``angle`` of shape (n,), ``vectors`` of shape (n, 3) or (3,).
    """
    axis = np.atleast_2d(np.asarray(axis, dtype=float))
    angle = np.atleast_1d(np.asarray(angle, dtype=float))
    vec = np.broadcast_to(np.asarray(vectors, dtype=float), axis.shape)
    c = np.cos(angle)[:, None]
    s = np.sin(angle)[:, None]
    cross = np.cross(axis, vec)
    dot = np.sum(axis * vec, axis=1)[:, None]
    return vec * c + cross * s + axis * dot * (1.0 - c)


def is_unitary(u: np.ndarray, atol: float) -> bool:
    u = np.asarray(u)
    return bool(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) <= atol)


def pauli_conjugate(u: np.ndarray, policy: NumericPolicy | None = None) -> np.ndarray:
    """3x3 rotation R_jk = (1/2) Re tr(sigma_j U sigma_k U^dag) of a 2x2 unitary."""
    policy = policy or active_policy()
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    if not is_unitary(u, policy.unitary_atol):
        raise ValueError("matrix is not unitary within tolerance")
    udag = u.conj().T
    r = np.empty((3, 3))
    for k in range(3):
        conj = u @ PAULI[k] @ udag
        for j in range(3):
            r[j, k] = 0.5 * np.real(np.trace(PAULI[j] @ conj))
    return r


def expm_hermitian(h: np.ndarray, scale: complex = -1.0j) -> np.ndarray:
    """exp(scale * h) for Hermitian h via eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(scale * w)) @ v.conj().T


def matrix_exponential(m: np.ndarray) -> np.ndarray:
    """General small-matrix exponential (Pade scaling-and-squaring)."""
    return expm(np.asarray(m, dtype=complex))


def matrix_log_unitary(u: np.ndarray, policy: NumericPolicy | None = None) -> np.ndarray:
    """Principal anti-Hermitian logarithm of a unitary, eigenphases in (-pi, pi].

    Raises :class:`BranchAmbiguityError` if an eigenvalue sits within the
    configured angular margin of the branch cut at -1.
    """
    policy = policy or active_policy()
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u, policy.unitary_atol):
        raise ValueError("matrix is not unitary within tolerance")
    # Unitary matrices are normal, so the complex Schur form is diagonal and
    # the Schur vectors give an orthonormal eigenbasis even for degenerate
    # eigenvalues (np.linalg.eig does not guarantee that).
    t, z = schur(u, output="complex")
    phases = np.angle(np.diag(t))
    if np.any(np.pi - np.abs(phases) < policy.logm_branch_margin):
        raise BranchAmbiguityError(
            "eigenvalue within branch margin of -1; logarithm branch is ambiguous")
    gen = (z * (1.0j * phases)) @ z.conj().T
    return 0.5 * (gen - gen.conj().T)
