"""Global numeric policy: every tolerance used by the library in one record.

The active policy can be overridden through the environment variable
``SPINPULSE_NUMERIC_POLICY`` set to a comma-separated ``name=value`` list,
e.g. ``SPINPULSE_NUMERIC_POLICY="unitary_atol=1e-9,ode_steps_default=2048"``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass


@dataclass(frozen=True)
class NumericPolicy:
    # linear-algebra validation
    hermitian_rtol: float = 1e-12
    unitary_atol: float = 1e-10
    orthogonal_atol: float = 1e-12
    unit_vector_atol: float = 1e-9
    # matrix logarithm of unitaries (principal branch)
    logm_branch_margin: float = 1e-6
    logm_roundtrip_atol: float = 1e-9
    antihermitian_atol: float = 1e-10
    # ODE integration of the pulse frame
    ode_steps_default: int = 1024
    ode_unitary_defect: float = 1e-8
    projection_interval: int = 64
    axis_floor: float = 1e-7
    # quadrature and report flags
    quad_unconverged_rel: float = 1e-3
    quad_unconverged_floor: float = 1e-9
    r2b_validity_rel: float = 1e-6
    pi_condition_atol: float = 1e-6
    nogo_tolerance: float = 1e-9
    # solver
    converged_objective: float = 1e-16
    residual_threshold: float = 1e-6
    # joint-space propagation
    joint_steps_default: int = 1024
    joint_dim_cap: int = 32

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


DEFAULT_POLICY = NumericPolicy()

_ENV_VAR = "SPINPULSE_NUMERIC_POLICY"


def active_policy() -> NumericPolicy:
    """Default policy with any environment overrides applied."""
    raw = os.environ.get(_ENV_VAR, "").strip()
    if not raw:
        return DEFAULT_POLICY
    overrides = {}
    fields = {f.name: f.type for f in dataclasses.fields(NumericPolicy)}
    for item in raw.split(","):
        if not item.strip():
            continue
        name, _, value = item.partition("=")
        name = name.strip()
        if name not in fields:
            raise ValueError(f"unknown numeric-policy field {name!r}")
        caster = int if fields[name] in ("int", int) else float
        overrides[name] = caster(value)
    return dataclasses.replace(DEFAULT_POLICY, **overrides)
