"""First- and second-order correction residuals of a pulse trajectory.

Everything here is a functional of the unit-vector path n(t) and the splitting
instant tau_s.  The three residuals are oriented as (integral side) minus
(boundary side), so a vanishing residual is exactly the corresponding design
condition and the sign is fixed for least-squares use:

    r1  = int_0^tp n dt                - [(tp - ts) n(tp) + ts n(0)]
    r2a = 2 int_0^tp (t - ts) n dt     - [(tp - ts)^2 n(tp) - ts^2 n(0)]
    r2b = int int_{t2<t1} n(t1) x n(t2) - ts (tp - ts) n(tp) x n(0)

Normalized forms divide by tau_p (r1) and tau_p^2 (r2a, r2b).  The residuals
feed both the operator-level correction terms (see :func:`eta_operators`) and
the two no-go diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .bath import BathModel
from .policy import NumericPolicy, active_policy
from .su2 import pauli_dot, spectral_norm
from .trajectory import NTrajectory


@dataclass(frozen=True)
class CorrectionReport:
    tau_p: float
    tau_s: float
    r1: np.ndarray
    r2a: np.ndarray
    r2b: np.ndarray
    quad_err: np.ndarray        # per-residual norm change under grid halving
    n_start: np.ndarray
    n_end: np.ndarray
    r2b_valid: bool             # r2b presupposes r1 ~ 0
    unconverged: bool

    @property
    def norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(self.r1), np.linalg.norm(self.r2a),
                         np.linalg.norm(self.r2b)])

    @property
    def normalized(self) -> np.ndarray:
        """Dimensionless residual norms (|r1|/tp, |r2a|/tp^2, |r2b|/tp^2)."""
        scales = np.array([self.tau_p, self.tau_p ** 2, self.tau_p ** 2])
        return self.norms / scales

    def normalized_vector(self, targets=("r1", "r2a", "r2b")) -> np.ndarray:
        """Stacked dimensionless residual components for the requested targets."""
        parts = []
        for t in targets:
            if t == "r1":
                parts.append(self.r1 / self.tau_p)
            elif t == "r2a":
                parts.append(self.r2a / self.tau_p ** 2)
            elif t == "r2b":
                parts.append(self.r2b / self.tau_p ** 2)
            else:
                raise ValueError(f"unknown residual target {t!r}")
        return np.concatenate(parts)


@dataclass(frozen=True)
class NoGoDiagnostics:
    tsp_gap: float       # tau_p - int cos(alpha) dt   (end-splitting obstruction)
    pi2_gap: float       # [(tp-ts)^2 + ts^2] + 2 int (t-ts) cos(alpha) dt
    is_pi_pulse: bool    # n(0) = -n(tau_p) within tolerance; pi2_gap is only
                         # meaningful on the pi manifold


def _residuals_on(grid: np.ndarray, nhat: np.ndarray, tau_s: float):
    tau_p = grid[-1]
    dt = (grid - tau_s)[:, None]
    n0, n1 = nhat[0], nhat[-1]
    r1 = simpson(nhat, x=grid, axis=0) - ((tau_p - tau_s) * n1 + tau_s * n0)
    r2a = 2.0 * simpson(dt * nhat, x=grid, axis=0) - ((tau_p - tau_s) ** 2 * n1 - tau_s ** 2 * n0)
    inner = cumulative_simpson(nhat, x=grid, axis=0, initial=0.0)
    cross = np.cross(nhat, inner)
    r2b = simpson(cross, x=grid, axis=0) - tau_s * (tau_p - tau_s) * np.cross(n1, n0)
    return r1, r2a, r2b


def evaluate_corrections(ntraj: NTrajectory, tau_s: float,
                         policy: NumericPolicy | None = None) -> CorrectionReport:
    """Quadrature evaluation of the three residuals with a halved-grid error estimate."""
    policy = policy or active_policy()
    if ntraj.n_nodes < 16:
        raise ValueError("need at least 16 trajectory nodes")
    tau_p = ntraj.tau_p
    if not 0.0 <= tau_s <= tau_p:
        raise ValueError("tau_s must lie in [0, tau_p]")

    r1, r2a, r2b = _residuals_on(ntraj.grid, ntraj.nhat, tau_s)
    half = np.arange(0, ntraj.n_nodes, 2)
    if half[-1] != ntraj.n_nodes - 1:      # the half grid must keep the endpoint
        half = np.append(half, ntraj.n_nodes - 1)
    r1_h, r2a_h, r2b_h = _residuals_on(ntraj.grid[half], ntraj.nhat[half], tau_s)
    quad_err = np.array([np.linalg.norm(r1 - r1_h), np.linalg.norm(r2a - r2a_h),
                         np.linalg.norm(r2b - r2b_h)])

    norms = np.array([np.linalg.norm(r1), np.linalg.norm(r2a), np.linalg.norm(r2b)])
    floors = policy.quad_unconverged_floor * np.array([tau_p, tau_p ** 2, tau_p ** 2])
    unconverged = bool(np.any(quad_err > np.maximum(policy.quad_unconverged_rel * norms, floors)))
    r2b_valid = bool(np.linalg.norm(r1) <= policy.r2b_validity_rel * tau_p)
    return CorrectionReport(tau_p=tau_p, tau_s=tau_s, r1=r1, r2a=r2a, r2b=r2b,
                            quad_err=quad_err, n_start=ntraj.nhat[0].copy(),
                            n_end=ntraj.nhat[-1].copy(), r2b_valid=r2b_valid,
                            unconverged=unconverged)


def eta_operators(report: CorrectionReport, bath: BathModel,
                  ntraj: NTrajectory, tau_s: float):
    """Joint-space correction operators assembled from the vector residuals.

    Returns (first-order, bath-dynamics second-order, coupling-squared
    second-order); the full second-order operator is the sum of the last two.
    The coupling-squared term uses the r1-completed combination
    h = r2b - [(tp-ts) n(tp) - ts n(0)] x r1, which reduces to r2b when the
    first-order condition holds.
    """
    lam = bath.coupling
    dim = bath.dim_b
    n0, n1 = ntraj.nhat[0], ntraj.nhat[-1]
    tau_p = ntraj.tau_p
    h_vec = report.r2b - np.cross((tau_p - tau_s) * n1 - tau_s * n0, report.r1)
    eta1 = lam * np.kron(pauli_dot(report.r1), bath.a)
    # the 1/2 on the bath-dynamics term is required for the second-order
    # remainder to scale as tau_p^3 against the exact propagator; see the
    # expansion-order tests
    eta2a = 0.5 * lam * np.kron(pauli_dot(report.r2a), 1.0j * bath.commutator)
    eta2b = lam ** 2 * np.kron(pauli_dot(h_vec), bath.a @ bath.a)
    assert eta1.shape == (2 * dim, 2 * dim)
    return eta1, eta2a, eta2b


def first_order_norm_identity(report: CorrectionReport, bath: BathModel) -> tuple[float, float]:
    """(operator norm of the first-order term, lambda ||A|| |r1|) for equivalence checks."""
    eta1 = bath.coupling * np.kron(pauli_dot(report.r1), bath.a)
    return spectral_norm(eta1), abs(bath.coupling) * spectral_norm(bath.a) * float(np.linalg.norm(report.r1))


def nogo_diagnostics(ntraj: NTrajectory, tau_s: float,
                     policy: NumericPolicy | None = None) -> NoGoDiagnostics:
    """The two impossibility gaps; both are nonnegative up to quadrature error."""
    policy = policy or active_policy()
    tau_p = ntraj.tau_p
    if not 0.0 <= tau_s <= tau_p:
        raise ValueError("tau_s must lie in [0, tau_p]")
    cos_alpha = ntraj.nhat @ ntraj.nhat[0]
    tsp_gap = tau_p - float(simpson(cos_alpha, x=ntraj.grid))
    dt = ntraj.grid - tau_s
    pi2_gap = (tau_p - tau_s) ** 2 + tau_s ** 2 + 2.0 * float(simpson(dt * cos_alpha, x=ntraj.grid))
    is_pi = bool(np.linalg.norm(ntraj.nhat[0] + ntraj.nhat[-1]) < policy.pi_condition_atol)
    return NoGoDiagnostics(tsp_gap=tsp_gap, pi2_gap=pi2_gap, is_pi_pulse=is_pi)
