"""Short coherent control pulses with time-varying rotation axes.

Library layout:

* :mod:`spinpulse.su2` -- exact 2x2 unitary / 3x3 rotation algebra
* :mod:`spinpulse.pulses` -- pulse shapes and amplitude evaluation
* :mod:`spinpulse.trajectory` -- frame integration and conversions
* :mod:`spinpulse.corrections` -- correction residuals and no-go gaps
* :mod:`spinpulse.bath` / :mod:`spinpulse.oracle` -- exact joint-space checks
* :mod:`spinpulse.design` -- least-squares pulse design and probes
* :mod:`spinpulse.fileio` / :mod:`spinpulse.cli` -- schemas and command line
"""

from .bath import BathModel, preset_bath
from .corrections import (CorrectionReport, NoGoDiagnostics, eta_operators,
                          evaluate_corrections, nogo_diagnostics)
from .design import (DesignProblem, DesignSolution, ProbeResult,
                     feasibility_probe, jacobian_check, solve)
from .oracle import (DecompositionError, PropagationResult, SweepResult,
                     dephasing_identity_defect, f_generator, integrate_deviation,
                     magnus_consistency, propagate_joint, reconstruct_uf)
from .policy import DEFAULT_POLICY, NumericPolicy, active_policy
from .pulses import (FourierCoefficients, PulseShape, constant_rotation_pulse,
                     eval_amplitude, fourier_pulse)
from .su2 import (BranchAmbiguityError, axis_angle_exponential,
                  matrix_log_unitary, pauli_conjugate, rotation_matrix)
from .trajectory import (AxisAngleTrajectory, NTrajectory,
                         amplitude_from_axis_angle, integrate_axis_angle,
                         n_trajectory)

__version__ = "0.1.0"

__all__ = [
    "AxisAngleTrajectory", "BathModel", "BranchAmbiguityError",
    "CorrectionReport", "DecompositionError", "DesignProblem", "DesignSolution",
    "FourierCoefficients", "NTrajectory", "NoGoDiagnostics", "NumericPolicy",
    "ProbeResult", "PropagationResult", "PulseShape", "SweepResult",
    "DEFAULT_POLICY", "active_policy", "amplitude_from_axis_angle",
    "axis_angle_exponential", "constant_rotation_pulse",
    "dephasing_identity_defect", "eta_operators", "eval_amplitude",
    "evaluate_corrections", "f_generator", "feasibility_probe", "fourier_pulse",
    "integrate_axis_angle", "integrate_deviation", "jacobian_check",
    "magnus_consistency", "matrix_log_unitary", "n_trajectory",
    "nogo_diagnostics", "pauli_conjugate", "preset_bath", "propagate_joint",
    "reconstruct_uf", "rotation_matrix", "solve",
]
