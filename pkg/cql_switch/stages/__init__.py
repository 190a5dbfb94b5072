"""
The three stages of a CQL switching: expulsion, transfer and attraction.
"""

from cql_switch.stages.attraction import (
    AttractionResult,
    BasinSpec,
    basin_contains,
    basin_spec,
    boundary_points,
    lyapunov_W,
    predicted_limit,
    run_attraction,
    select_theorem_params,
)
from cql_switch.stages.expulsion import (
    ExpulsionPlan,
    approx_expulsion,
    expm_L,
    expulsion_time,
    lemma1_thresholds,
    plan_expulsion,
)
from cql_switch.stages.transfer import (
    ControlWaveform,
    NormalFormCoefficients,
    TransferPlan,
    approx_transfer_solution,
    lemma2_thresholds,
    normal_form_coefficients,
    plan_transfer,
    synthesize_control,
    transfer_time,
)

__all__ = [
    "AttractionResult",
    "BasinSpec",
    "ControlWaveform",
    "ExpulsionPlan",
    "NormalFormCoefficients",
    "TransferPlan",
    "approx_expulsion",
    "approx_transfer_solution",
    "basin_contains",
    "basin_spec",
    "boundary_points",
    "expm_L",
    "expulsion_time",
    "lemma1_thresholds",
    "lemma2_thresholds",
    "lyapunov_W",
    "normal_form_coefficients",
    "plan_expulsion",
    "plan_transfer",
    "predicted_limit",
    "run_attraction",
    "select_theorem_params",
    "synthesize_control",
    "transfer_time",
]
