"""
cql-switch

Macrospin magnetization switching along a control-quasi-latitudinal path:
expulsion from s_minus, transfer along a fixed latitude, free attraction
to s_plus.
"""

from cql_switch.switch import CqlSwitch
from cql_switch.params import (
    DerivedParams,
    MaterialParams,
    derive_params,
    preset,
    validate_admissibility,
)
from cql_switch.pipeline import (
    SwitchingPlan,
    SwitchingReport,
    ballistic_baseline,
    plan_switching,
    run_switching,
    stress_test,
    sweep,
)
from cql_switch.report import export_report, load_report
from cql_switch.exceptions import (
    CqlSwitchException,
    IntegrationError,
    ParameterValidationError,
    PlanningError,
)

__version__ = "1.0.0"
__all__ = [
    "CqlSwitch",
    "MaterialParams",
    "DerivedParams",
    "derive_params",
    "preset",
    "validate_admissibility",
    "SwitchingPlan",
    "SwitchingReport",
    "plan_switching",
    "run_switching",
    "stress_test",
    "ballistic_baseline",
    "sweep",
    "export_report",
    "load_report",
    "CqlSwitchException",
    "IntegrationError",
    "ParameterValidationError",
    "PlanningError",
]
