"""
cql-switch

Main entry class composing parameters, stage planners and the pipeline.
"""

import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from cql_switch import settings
from cql_switch.params import (
    DerivedParams,
    Diagnostic,
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
from cql_switch.stages.attraction import (
    AttractionResult,
    basin_spec,
    boundary_points,
    run_attraction,
)
from cql_switch.stages.expulsion import expulsion_error_series, lemma1_thresholds
from cql_switch.stages.transfer import cql_drift, lemma2_thresholds, plan_transfer

logger = logging.getLogger(__name__)


class CqlSwitch:
    """
    Switching controller for one parameter set.

    It provides access to:
    - Planning (expulsion, transfer, assembled control)
    - Stage simulations (expulsion error, transfer drift, attraction)
    - Full switching, stress tests and the ballistic baseline

    Usage:
        >>> from cql_switch import CqlSwitch
        >>>
        >>> switch = CqlSwitch.from_preset("FIG6", lam=0.002)
        >>> plan = switch.plan(beta_e=0.03)
        >>> plan.expulsion.T_e
        1.0270...
        >>>
        >>> report = switch.switch(t_attract_max=12500)
        >>> report.success
        True
    """

    def __init__(self, raw: MaterialParams, rtol: float = settings.DEFAULT_RTOL,
                 atol: float = settings.DEFAULT_ATOL):
        """
        Args:
            raw: Raw parameters
            rtol, atol: Integrator tolerances for every simulation
        """
        self.raw = raw
        self.params: DerivedParams = derive_params(raw)
        self.rtol = rtol
        self.atol = atol
        self._plan: Optional[SwitchingPlan] = None

    @classmethod
    def from_preset(cls, figure_id: str, lam: Optional[float] = None, **kwargs) -> "CqlSwitch":
        return cls(preset(figure_id, lam), **kwargs)

    def default_start(self, offset=settings.DEFAULT_OFFSET) -> np.ndarray:
        """s_minus + lam * offset."""
        return self.params.s_minus + self.params.lam * np.asarray(offset, dtype=float)

    def admissibility(self) -> List[Diagnostic]:
        return validate_admissibility(self.params)

    # ==================== Planning ====================

    def plan(self, K: Optional[float] = None, beta_e: Optional[float] = None) -> SwitchingPlan:
        """
        Plan the three stages and cache the result for later runs.

        Args:
            K: Target latitude override
            beta_e: Unscaled expulsion current; defaults to lam * beta_e_t

        Returns:
            SwitchingPlan
        """
        self._plan = plan_switching(self.raw, K=K, beta_e=beta_e)
        return self._plan

    @property
    def current_plan(self) -> SwitchingPlan:
        if self._plan is None:
            self.plan()
        return self._plan

    # ==================== Stages ====================

    def expel(self, rho_e: float = 1.0, with_thresholds: bool = True,
              dt: float = settings.DEFAULT_DT_EXPORT):
        """
        Expulsion error series against the first-order solution.

        Returns:
            (ExpulsionPlan, DataFrame)
        """
        plan = self.current_plan.expulsion
        if with_thresholds:
            plan = lemma1_thresholds(self.params, plan.K, plan.beta_e, rho_e)
        frame = expulsion_error_series(plan, self.params, dt=dt, rtol=self.rtol, atol=self.atol)
        return plan, frame

    def transfer(self, w0=None, with_thresholds: bool = True) -> Tuple[Any, float]:
        """
        Transfer plan from w0 (default: the planned expulsion end) and the
        open-loop drift max |u3 + K|.

        Returns:
            (TransferPlan, drift)
        """
        if w0 is None:
            plan = self.current_plan.transfer
        else:
            plan = plan_transfer(w0, self.params)
        if with_thresholds:
            plan = lemma2_thresholds(plan, self.params)
        return plan, cql_drift(plan, self.params, self.rtol, self.atol)

    def attract(self, delta_a: float = 0.0, n_points: int = 20,
                t_max: Optional[float] = None) -> List[AttractionResult]:
        """Relax from points on the basin boundary at energy offset delta_a."""
        return [
            run_attraction(U0, self.params, t_max, self.rtol, self.atol)
            for U0 in boundary_points(delta_a, self.params, n_points)
        ]

    def basin(self) -> Dict[str, float]:
        spec = basin_spec(self.params)
        return {"W_star": spec.W_star, "r_sm": spec.r_sm, "delta_a_max": spec.delta_a_max}

    # ==================== Switching ====================

    def switch(self, u0=None, t_attract_max: Optional[float] = None) -> SwitchingReport:
        """
        Full switching from u0 (default s_minus + lam * DEFAULT_OFFSET).
        """
        u0 = self.default_start() if u0 is None else u0
        return run_switching(u0, self.current_plan, t_attract_max, self.rtol, self.atol)

    def stress(self, j: float, u0=None,
               t_attract_max: Optional[float] = None) -> Tuple[SwitchingReport, SwitchingReport]:
        """(expulsion-time variant, transfer-clock variant) at factor j."""
        u0 = self.default_start() if u0 is None else u0
        return stress_test(self.current_plan, u0, j, t_attract_max, self.rtol, self.atol)

    def ballistic(self, beta_const: Optional[float] = None, T_on: Optional[float] = None, u0=None,
                  t_relax_max: Optional[float] = None) -> SwitchingReport:
        """
        Constant-current baseline; defaults match the planned CQL run
        (beta_const = beta_e, T_on = T_e + T_tr).
        """
        plan = self.current_plan
        beta_const = plan.expulsion.beta_e if beta_const is None else beta_const
        T_on = plan.total_control_time if T_on is None else T_on
        u0 = self.default_start() if u0 is None else u0
        return ballistic_baseline(u0, self.params, beta_const, T_on, t_relax_max, self.rtol, self.atol)

    def sweep(self, lambdas, t_attract_max: Optional[float] = None,
              workers: Optional[int] = None) -> List[SwitchingReport]:
        return sweep(self.raw, lambdas, t_attract_max=t_attract_max, workers=workers)
