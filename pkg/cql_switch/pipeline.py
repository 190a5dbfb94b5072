"""
Switching Pipeline for cql-switch

Plans the three stages, drives the controlled flow across
[-T_e, 0, T_tr], relaxes towards s_plus and reports the outcome.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from cql_switch import settings
from cql_switch.config import sweep_workers
from cql_switch.dynamics import applied_field, free_energy, scaled_rhs
from cql_switch.exceptions import CqlSwitchException, ParameterValidationError, PlanningError
from cql_switch.integrate import Trajectory, integrate, integrate_until
from cql_switch.params import DerivedParams, MaterialParams, derive_params, validate_admissibility
from cql_switch.stages.attraction import default_t_max
from cql_switch.stages.expulsion import ExpulsionPlan, plan_expulsion
from cql_switch.stages.transfer import (
    ControlWaveform,
    TransferPlan,
    cql_drift,
    latitudinal_closure,
    plan_transfer,
    synthesize_control,
)

logger = logging.getLogger(__name__)

__all__ = [
    "SwitchingPlan",
    "SwitchingReport",
    "plan_switching",
    "run_switching",
    "stress_test",
    "ballistic_baseline",
    "sweep",
    "cql_drift",
    "latitudinal_closure",
    "group_property_gap",
]


@dataclass(frozen=True, eq=False)
class SwitchingPlan:
    """Stage plans and the assembled control; unpacks as (expulsion, transfer, waveform)."""

    params: DerivedParams
    expulsion: ExpulsionPlan
    transfer: TransferPlan
    waveform: ControlWaveform

    def __iter__(self):
        return iter((self.expulsion, self.transfer, self.waveform))

    @property
    def total_control_time(self) -> float:
        return self.waveform.T_e + self.waveform.transfer_end

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": self.params.lam,
            "K": self.params.K,
            "gamma": self.params.gamma,
            "Omega": self.params.Omega,
            "expulsion": self.expulsion.to_dict(),
            "transfer": self.transfer.to_dict(),
            "jump_at_zero": self.waveform.jump_at_zero,
            "total_control_time": self.total_control_time,
        }


@dataclass(eq=False)
class SwitchingReport:
    """
    Outcome of one switching run.

    `stage_times` are the stage boundaries (-T_e, 0, T_tr); `u_at_stage_ends`
    the states at those times. `success` holds when the final distance to
    s_plus is at most `success_radius` = r / (2 gamma), r being the initial
    offset from s_minus (ZERO_RADIUS_TOL when r = 0).
    """

    stage_times: Tuple[float, float, float]
    u_at_stage_ends: List[np.ndarray]
    final_state: np.ndarray
    dist_to_s_plus: float
    psi_drift: float
    max_u3_plus_K_during_transfer: Optional[float]
    initial_radius: float
    success_radius: float
    success: bool
    converged: bool
    t_final: float
    energies: List[float]
    ringing: float
    kind: str = "cql"
    control_samples: Optional[str] = None
    trajectory: Optional[Trajectory] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": settings.REPORT_SCHEMA_VERSION,
            "kind": self.kind,
            "stage_times": [float(t) for t in self.stage_times],
            "u_at_stage_ends": [np.asarray(u, dtype=float).tolist() for u in self.u_at_stage_ends],
            "final_state": np.asarray(self.final_state, dtype=float).tolist(),
            "dist_to_s_plus": self.dist_to_s_plus,
            "psi_drift": self.psi_drift,
            "max_u3_plus_K_during_transfer": self.max_u3_plus_K_during_transfer,
            "initial_radius": self.initial_radius,
            "success_radius": self.success_radius,
            "success": self.success,
            "converged": self.converged,
            "t_final": self.t_final,
            "energies": list(self.energies),
            "ringing": self.ringing,
            "control_samples": self.control_samples,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SwitchingReport":
        return cls(
            stage_times=tuple(data["stage_times"]),
            u_at_stage_ends=[np.array(u) for u in data["u_at_stage_ends"]],
            final_state=np.array(data["final_state"]),
            dist_to_s_plus=data["dist_to_s_plus"],
            psi_drift=data["psi_drift"],
            max_u3_plus_K_during_transfer=data["max_u3_plus_K_during_transfer"],
            initial_radius=data["initial_radius"],
            success_radius=data["success_radius"],
            success=data["success"],
            converged=data["converged"],
            t_final=data["t_final"],
            energies=list(data["energies"]),
            ringing=data["ringing"],
            kind=data.get("kind", "cql"),
            control_samples=data.get("control_samples"),
        )


# =========================================================================
# Planning
# =========================================================================

def _planned(stage: str, planner: Callable, *args, **kwargs):
    try:
        return planner(*args, **kwargs)
    except CqlSwitchException as exc:
        raise PlanningError(exc.message, stage, exc.error_code, exc.details) from exc


def plan_switching(raw: MaterialParams, K: Optional[float] = None,
                   beta_e: Optional[float] = None) -> SwitchingPlan:
    """
    Plan expulsion, transfer and the control waveform.

    The transfer starts from w0 = u_c(T_e)[:2], the first-order expulsion
    end point.

    Args:
        raw: Raw parameters
        K: Target latitude override
        beta_e: Unscaled expulsion current; defaults to lam * beta_e_t

    Returns:
        SwitchingPlan

    Raises:
        ParameterValidationError: Raw parameters are invalid
        PlanningError: A stage planner failed, tagged with its stage
    """
    if K is not None:
        raw = replace(raw, K=K)
    p = derive_params(raw)
    validate_admissibility(p)

    expulsion = _planned(settings.STAGE_EXPULSION, plan_expulsion, p, beta_e)
    transfer = _planned(settings.STAGE_TRANSFER, plan_transfer, expulsion.u_end[:2], p)
    waveform = _planned(settings.STAGE_TRANSFER, synthesize_control, transfer, expulsion, p)
    plan = SwitchingPlan(params=p, expulsion=expulsion, transfer=transfer, waveform=waveform)
    logger.info("switching plan: T_e=%.4f T_tr=%.4f total=%.4f",
                expulsion.T_e, transfer.T_tr, plan.total_control_time)
    return plan


# =========================================================================
# Simulation
# =========================================================================

def _start_state(u0, p: DerivedParams) -> Tuple[np.ndarray, float]:
    """Projected start state and the unprojected offset radius from s_minus."""
    u0 = np.asarray(u0, dtype=float)
    norm = float(np.linalg.norm(u0))
    if norm == 0.0:
        raise ParameterValidationError("initial state must be non-zero")
    return u0 / norm, float(np.linalg.norm(u0 - p.s_minus))


def _relax(u_start, t_start: float, p: DerivedParams, t_max: float, rtol: float, atol: float,
           stage: str) -> Trajectory:
    def free_field(t, u):
        return scaled_rhs(u, 0.0, p)

    def settled(t, u):
        return np.linalg.norm(free_field(t, u)) < settings.CONVERGENCE_FIELD_TOL

    return integrate_until(free_field, u_start, settled, t_max, rtol, atol,
                           t0=t_start, sustain=settings.CONVERGENCE_STREAK, stage=stage)


def _peak_to_peak_u1(trajectory: Trajectory, t_start: float, dt: float) -> float:
    t_end = min(trajectory.final_time, t_start + settings.RINGING_WINDOW)
    if t_end <= t_start:
        return 0.0
    u1 = [trajectory.state_at(t)[0] for t in np.arange(t_start, t_end + 0.5 * dt, dt)]
    return float(np.max(u1) - np.min(u1))


def _energies(states: Iterable[np.ndarray], p: DerivedParams) -> List[float]:
    h_a = applied_field(p)
    return [float(free_energy(u, h_a, p)) for u in states]


def _success_radius(r: float, p: DerivedParams) -> float:
    if r == 0.0:
        return settings.ZERO_RADIUS_TOL
    return r / (2.0 * p.gamma)


def _controlled_field(waveform: ControlWaveform, p: DerivedParams):
    def field(t, u):
        return scaled_rhs(u, waveform(t), p)
    return field


def _controlled_run(u_start, waveform: ControlWaveform, p: DerivedParams, rtol: float,
                    atol: float) -> Trajectory:
    """Expulsion and transfer in one call, stepped separately on each side of every jump."""
    return integrate(
        _controlled_field(waveform, p), u_start, -waveform.T_e, waveform.transfer_end, rtol, atol,
        control=waveform, stage=waveform.stage, breakpoints=waveform.breakpoints,
    )


def run_switching(u0, plan: SwitchingPlan, t_attract_max: Optional[float] = None,
                  rtol: float = settings.DEFAULT_RTOL, atol: float = settings.DEFAULT_ATOL,
                  dt_export: float = settings.DEFAULT_DT_EXPORT) -> SwitchingReport:
    """
    Simulate a full switching under the planned waveform.

    Args:
        u0: Initial state near s_minus; projected on the unit sphere
        plan: Output of plan_switching
        t_attract_max: Attraction time budget; defaults to 50 / (alpha_t lam)
        rtol, atol: Integrator tolerances
        dt_export: Resolution of the ringing measurement

    Returns:
        SwitchingReport with the trajectory attached

    Raises:
        IntegrationError: Step-size underflow in any stage
    """
    p, waveform = plan.params, plan.waveform
    u_start, r = _start_state(u0, p)

    controlled = _controlled_run(u_start, waveform, p, rtol, atol)
    expulsion = controlled.window(-waveform.T_e, 0.0)
    transfer = controlled.window(0.0, waveform.transfer_end)
    t_max = default_t_max(p) if t_attract_max is None else t_attract_max
    attraction = _relax(controlled.final_state, waveform.transfer_end, p, t_max, rtol, atol,
                        settings.STAGE_ATTRACTION)
    if not attraction.limit_reached:
        logger.warning("attraction not converged after %g time units", t_max)

    trajectory = controlled.concat(attraction)
    final = trajectory.final_state
    dist = float(np.linalg.norm(final - p.s_plus))
    radius = _success_radius(r, p)
    stage_ends = [expulsion.states[0], expulsion.final_state, transfer.final_state]

    report = SwitchingReport(
        stage_times=(-waveform.T_e, 0.0, waveform.transfer_end),
        u_at_stage_ends=stage_ends,
        final_state=final,
        dist_to_s_plus=dist,
        psi_drift=trajectory.psi_drift,
        max_u3_plus_K_during_transfer=float(np.max(np.abs(transfer.states[:, 2] + p.K))),
        initial_radius=r,
        success_radius=radius,
        success=bool(dist <= radius),
        converged=attraction.limit_reached,
        t_final=trajectory.final_time,
        energies=_energies(stage_ends + [final], p),
        ringing=_peak_to_peak_u1(trajectory, waveform.transfer_end, dt_export),
        trajectory=trajectory,
    )
    logger.info("switching %s: dist=%.3e radius=%.3e psi drift=%.2e",
                "succeeded" if report.success else "failed", dist, radius, report.psi_drift)
    return report


def stress_test(plan: SwitchingPlan, u0, j: float, t_attract_max: Optional[float] = None,
                rtol: float = settings.DEFAULT_RTOL,
                atol: float = settings.DEFAULT_ATOL) -> Tuple[SwitchingReport, SwitchingReport]:
    """
    Re-simulate under a mistimed control.

    Variant A stretches the expulsion to j * T_e at unchanged beta_e;
    variant B replays the transfer current on the clock j * t.

    Returns:
        (report_A, report_B)
    """
    p = plan.params
    stretched = synthesize_control(plan.transfer, plan.expulsion, p, T_e=j * plan.expulsion.T_e)
    dilated = synthesize_control(plan.transfer, plan.expulsion, p, clock=j)

    reports = []
    for mode, waveform in ((settings.STRESS_EXPULSION, stretched), (settings.STRESS_TRANSFER, dilated)):
        report = run_switching(u0, replace(plan, waveform=waveform), t_attract_max, rtol, atol)
        logger.info("stress %s j=%.3f: success=%s dist=%.3e", mode, j, report.success, report.dist_to_s_plus)
        reports.append(report)
    return reports[0], reports[1]


def ballistic_baseline(u0, p: DerivedParams, beta_const: float, T_on: float,
                       t_relax_max: Optional[float] = None,
                       rtol: float = settings.DEFAULT_RTOL, atol: float = settings.DEFAULT_ATOL,
                       dt_export: float = settings.DEFAULT_DT_EXPORT) -> SwitchingReport:
    """
    Constant unscaled current beta_const on [0, T_on], then free relaxation.

    The report's `ringing` is the u1 peak-to-peak over RINGING_WINDOW
    after switch-off.

    Raises:
        ParameterValidationError: beta_const or T_on negative
    """
    if beta_const < 0.0 or T_on < 0.0:
        raise ParameterValidationError(
            f"beta_const >= 0 and T_on >= 0 required (beta_const={beta_const}, T_on={T_on})", "CQ201"
        )
    u_start, r = _start_state(u0, p)
    beta_t = beta_const / p.lam

    pulse = integrate(
        lambda t, u: scaled_rhs(u, beta_t, p), u_start, 0.0, T_on, rtol, atol,
        control=lambda t: beta_t, stage=settings.STAGE_BALLISTIC,
    )
    t_max = default_t_max(p) if t_relax_max is None else t_relax_max
    relax = _relax(pulse.final_state, T_on, p, t_max, rtol, atol, settings.STAGE_FREE)

    trajectory = pulse.concat(relax)
    final = trajectory.final_state
    dist = float(np.linalg.norm(final - p.s_plus))
    radius = _success_radius(r, p)
    stage_ends = [pulse.states[0], pulse.final_state, pulse.final_state]
    return SwitchingReport(
        stage_times=(0.0, T_on, T_on),
        u_at_stage_ends=stage_ends,
        final_state=final,
        dist_to_s_plus=dist,
        psi_drift=trajectory.psi_drift,
        max_u3_plus_K_during_transfer=None,
        initial_radius=r,
        success_radius=radius,
        success=bool(dist <= radius),
        converged=relax.limit_reached,
        t_final=trajectory.final_time,
        energies=_energies(stage_ends + [final], p),
        ringing=_peak_to_peak_u1(trajectory, T_on, dt_export),
        kind="ballistic",
        trajectory=trajectory,
    )


# =========================================================================
# Sweeps
# =========================================================================

def _rescaled(raw: MaterialParams, lam: float) -> MaterialParams:
    """Same scaled constants at another lambda; D2 - D1 scales with lambda."""
    return replace(raw, lam=lam, D2=raw.D1 + (raw.D2 - raw.D1) * lam / raw.lam)


def _sweep_one(raw: MaterialParams, lam: float, offset: Sequence[float],
               t_attract_max: Optional[float]) -> Dict[str, Any]:
    scaled = _rescaled(raw, lam)
    plan = plan_switching(scaled)
    u0 = plan.params.s_minus + lam * np.asarray(offset, dtype=float)
    return run_switching(u0, plan, t_attract_max).to_dict()


def sweep(raw: MaterialParams, lambdas: Sequence[float], offset: Sequence[float] = settings.DEFAULT_OFFSET,
          t_attract_max: Optional[float] = None, workers: Optional[int] = None) -> List[SwitchingReport]:
    """
    Run independent switchings over several lambdas in a process pool.

    Args:
        raw: Base parameters; D2 - D1 is rescaled with lambda
        lambdas: Values to run
        offset: u0 = s_minus + lambda * offset
        t_attract_max: Attraction budget per run
        workers: Pool size; defaults to CQL_SWITCH_THREADS or the CPU count

    Returns:
        Reports in the order of `lambdas`, without trajectories
    """
    workers = workers or sweep_workers()
    lambdas = list(lambdas)
    if workers == 1 or len(lambdas) <= 1:
        results = [_sweep_one(raw, lam, offset, t_attract_max) for lam in lambdas]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(lambdas))) as pool:
            futures = [pool.submit(_sweep_one, raw, lam, offset, t_attract_max) for lam in lambdas]
            results = [future.result() for future in futures]
    logger.info("sweep over %d lambdas finished", len(lambdas))
    return [SwitchingReport.from_dict(data) for data in results]


def group_property_gap(plan: SwitchingPlan, u0, rtol: float = settings.DEFAULT_RTOL,
                       atol: float = settings.DEFAULT_ATOL) -> float:
    """
    End-point difference between the controlled flow over [-T_e, T_tr] in
    one call and the expulsion and transfer flows chained at t = 0.
    """
    p, waveform = plan.params, plan.waveform
    field = _controlled_field(waveform, p)
    start, _ = _start_state(u0, p)

    whole = _controlled_run(start, waveform, p, rtol, atol).final_state
    expelled = integrate(field, start, -waveform.T_e, 0.0, rtol, atol)
    chained = integrate(field, expelled.final_state, 0.0, waveform.transfer_end, rtol, atol).final_state
    return float(np.linalg.norm(whole - chained))
