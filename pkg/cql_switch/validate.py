"""
Figure Reproduction and Acceptance Suite for cql-switch

Each check returns a Check; `run_suite` writes the figure CSVs under an
output directory and collects every check.
"""

import logging
import math
import os
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.linalg import expm

from cql_switch import settings
from cql_switch.dynamics import (
    applied_field,
    fr_fields,
    latitude_fr_fields,
    lls_rhs,
    reduced_rhs,
    scaled_jacobian,
    scaled_rhs,
)
from cql_switch.exceptions import CqlSwitchException
from cql_switch.params import derive_params, preset, with_lambda
from cql_switch.pipeline import ballistic_baseline, plan_switching, run_switching, stress_test
from cql_switch.report import export_control, export_report, write_frame
from cql_switch.sampling import polydisc_points
from cql_switch.stages.attraction import (
    boundary_points,
    default_t_max,
    predicted_limit,
    run_attraction,
)
from cql_switch.stages.expulsion import (
    closed_form_jacobian_V,
    expm_L,
    expulsion_error_series,
    expulsion_time,
    jacobian_V,
    jacobian_table_mismatches,
    lemma1_thresholds,
    plan_expulsion,
    residual_field_V,
)
from cql_switch.stages.transfer import (
    closed_form_residuals,
    cql_drift,
    homological_residual,
    latitudinal_closure,
    normal_form_coefficients,
    normal_form_residual,
    plan_transfer,
)

logger = logging.getLogger(__name__)


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    detail: str = ""


def _check(name: str, passed: bool, value: float, detail: str = "") -> Check:
    check = Check(name=name, passed=bool(passed), value=float(value), detail=detail)
    level = logging.INFO if check.passed else logging.ERROR
    logger.log(level, "%s: %s (%s) %s", name, "ok" if check.passed else "FAILED", value, detail)
    return check


def _unit_states(n: int, seed: int = 0) -> np.ndarray:
    u = np.random.default_rng(seed).normal(size=(3, n))
    return u / np.linalg.norm(u, axis=0)


# ==================== Identities ====================

def check_expulsion_time() -> Check:
    T_e = expulsion_time(0.07, settings.REFERENCE_BETA_E)
    return _check("expulsion_time", abs(T_e - settings.REFERENCE_T_E[settings.FIG2]) < 1e-3, T_e)


def check_matrix_exponential(n: int = 200, seed: int = 0) -> Check:
    p = derive_params(preset(settings.FIG2))
    plan = plan_expulsion(p, settings.REFERENCE_BETA_E)
    taus = np.random.default_rng(seed).uniform(-100.0, 100.0, n)
    worst = max(float(np.max(np.abs(expm_L(t, plan) - expm(plan.L * t)))) for t in taus)
    semigroup = max(
        float(np.max(np.abs(expm_L(a + b, plan) - expm_L(a, plan) @ expm_L(b, plan))))
        for a, b in zip(taus[: n // 2], taus[n // 2:])
    )
    return _check("matrix_exponential", worst < 1e-12 and semigroup < 1e-11, max(worst, semigroup))


def check_homological_identity(n: int = 100) -> Check:
    p = derive_params(preset(settings.FIG3))
    points = polydisc_points(n)
    residual = homological_residual(normal_form_coefficients(p), p, points)
    tables = closed_form_residuals(p, points)
    detail = " ".join(f"{name}={value:.2e}" for name, value in tables.items())
    return _check("homological_identity", residual < 1e-12 and tables["corrected"] < 1e-12, residual, detail)


def check_consistency_chain(n: int = 1000) -> Check:
    p = derive_params(preset(settings.FIG6))
    u = _unit_states(n)
    beta_t = 2.5
    beta = p.lam * beta_t
    full = np.array([
        lls_rhs(m, applied_field(p), p.alpha, beta, np.array([0.0, 0.0, 1.0]), p) for m in u.T
    ]).T
    reduced = reduced_rhs(u, beta, p)
    scaled = scaled_rhs(u, beta_t, p)
    chain = max(float(np.max(np.abs(full - reduced))), float(np.max(np.abs(reduced - scaled))))

    # latitude forms against the general fields at v3 = -K
    angles = np.linspace(0.0, 2.0 * np.pi, 97)[1:]
    radius = math.sqrt(1.0 - p.K ** 2)
    v = np.array([radius * np.cos(angles), radius * np.sin(angles), -p.K * np.ones_like(angles)])
    F, R = fr_fields(v, v, p)
    F_lat, R_lat = latitude_fr_fields(v, p)
    latitude = float(np.max(np.abs(p.lam * (F - F_lat) + p.lam ** 2 * (R - R_lat))))

    h = 1e-6
    jac_error = 0.0
    for state in u[:, :20].T:
        J = scaled_jacobian(state, beta_t, p)
        for k in range(3):
            step = np.zeros(3)
            step[k] = h
            fd = (scaled_rhs(state + step, beta_t, p) - scaled_rhs(state - step, beta_t, p)) / (2.0 * h)
            jac_error = max(jac_error, float(np.max(np.abs(fd - J[:, k]))))

    # expulsion remainder: finite differences, expanded entries, published entries
    beta_e = settings.REFERENCE_BETA_E
    xi = np.random.default_rng(1).uniform(-5.0, 5.0, size=(3, 20))
    exact = jacobian_V(xi, p, beta_e)
    expanded = float(np.max(np.abs(closed_form_jacobian_V(xi, p, beta_e) - exact)))
    h_xi = 1e-3
    dv_error = 0.0
    for point, J in zip(xi.T, np.moveaxis(exact, 2, 0)):
        for k in range(3):
            step = np.zeros(3)
            step[k] = h_xi
            fd = (residual_field_V(point + step, p, beta_e) - residual_field_V(point - step, p, beta_e)) / (2.0 * h_xi)
            dv_error = max(dv_error, float(np.max(np.abs(fd - J[:, k]))) / max(1.0, float(np.max(np.abs(J)))))
    published = sorted(jacobian_table_mismatches(xi[:, 0], p, beta_e))

    passed = chain < 1e-13 and latitude < 1e-13 and jac_error < 1e-6 and expanded < 1e-9 and dv_error < 1e-5
    return _check("consistency_chain", passed, max(chain, latitude),
                  f"chain={chain:.2e} latitude={latitude:.2e} jacobian={jac_error:.2e} "
                  f"dv={dv_error:.2e} dv_expanded={expanded:.2e} dv_published_mismatches={published}")


# ==================== Figures ====================

def figure_expulsion(out_dir: str) -> List[Check]:
    """Expulsion error at the reference lambdas and fixed beta_e."""
    end_errors, dominated = [], True
    for lam in settings.REFERENCE_LAMBDAS[settings.FIG2]:
        p = derive_params(preset(settings.FIG2, lam))
        plan = lemma1_thresholds(p, p.K, settings.REFERENCE_BETA_E)
        frame = expulsion_error_series(plan, p)
        write_frame(frame, os.path.join(out_dir, f"fig2_lambda_{lam:g}.csv"))
        end_errors.append(float(frame["delta"].iloc[-1]))
        dominated &= bool(np.all(frame["delta"] <= frame["envelope"]))
    monotone = all(a >= b for a, b in zip(end_errors, end_errors[1:]))
    return [
        _check("expulsion_error_monotone", monotone, end_errors[-1], f"end errors {end_errors}"),
        _check("expulsion_envelope", dominated, 0.0),
    ]


def figure_transfer(out_dir: str) -> List[Check]:
    """Drift from the latitude under the synthesized control at lam, lam/2, lam/4."""
    base = derive_params(preset(settings.FIG3))
    w0 = plan_expulsion(base).u_end[:2]
    rows = []
    for lam in (base.lam, base.lam / 2.0, base.lam / 4.0):
        p = with_lambda(base, lam)
        plan = plan_transfer(plan_expulsion(p).u_end[:2], p)
        # same start and scaled constants, only the perturbation size changes
        frozen = replace(base, lam=lam)
        rows.append({
            "lambda": lam,
            "T_tr": plan.T_tr,
            "drift": cql_drift(plan, p),
            "closure": latitudinal_closure(plan, p),
            "residual": normal_form_residual(plan_transfer(w0, frozen), frozen),
        })
    frame = pd.DataFrame(rows)
    write_frame(frame, os.path.join(out_dir, "fig3_drift.csv"))

    drift_ratios = (frame["drift"].values[1:] / frame["drift"].values[:-1]).tolist()
    residual_ratios = (frame["residual"].values[:-1] / frame["residual"].values[1:]).tolist()
    return [
        _check("latitudinal_closure", frame["closure"].max() < 1e-8, frame["closure"].max()),
        _check("cql_first_order_scaling", all(0.3 <= r <= 0.7 for r in drift_ratios),
               drift_ratios[0], f"ratios {drift_ratios}"),
        _check("normal_form_residual_order", all(3.0 <= r <= 5.0 for r in residual_ratios),
               residual_ratios[0], f"ratios {residual_ratios}"),
    ]


def figure_attraction(out_dir: str, n_points: int = 20) -> List[Check]:
    """Relaxation from the basin boundary at delta_a = 0 and 0.1."""
    p = derive_params(preset(settings.FIG4))
    t_max = 2.0 * default_t_max(p)
    checks = []
    for delta_a in (0.0, 0.1):
        target = predicted_limit(delta_a, p)
        worst, converged, ok = 0.0, True, True
        for idx, U0 in enumerate(boundary_points(delta_a, p, n_points)):
            try:
                result = run_attraction(U0, p, t_max)
            except CqlSwitchException as exc:
                logger.error("attraction from %s failed: %s", U0, exc)
                ok = False
                continue
            worst = max(worst, float(np.linalg.norm(result.U_infinity - target)))
            converged &= result.converged
            if idx == 0:
                frame = pd.DataFrame({"t": result.times, "W": result.W_series})
                write_frame(frame, os.path.join(out_dir, f"fig4_delta_{delta_a:g}.csv"))
        bound = np.linalg.norm(target) <= abs(delta_a) / (2.0 * p.gamma) + 1e-15
        checks.append(_check(f"attraction_limit_delta_{delta_a:g}", ok and converged and worst < 1e-6 and bound,
                             worst))
    return checks


def figure_ballistic(out_dir: str) -> List[Check]:
    """Post-switch-off ringing of the CQL run against a constant current of the same length."""
    raw = preset(settings.FIG5)
    plan = plan_switching(raw)
    p = plan.params
    u0 = p.s_minus + p.lam * np.asarray(settings.DEFAULT_OFFSET)
    cql = run_switching(u0, plan, t_attract_max=2.0 * settings.RINGING_WINDOW)
    ballistic = ballistic_baseline(u0, p, plan.expulsion.beta_e, plan.total_control_time,
                                   t_relax_max=2.0 * settings.RINGING_WINDOW)
    export_report(cql, settings.EXPORT_CSV, os.path.join(out_dir, "fig5_cql.csv"))
    export_report(ballistic, settings.EXPORT_CSV, os.path.join(out_dir, "fig5_ballistic.csv"))
    return [_check("ringing_ordering", cql.ringing < ballistic.ringing, cql.ringing,
                   f"cql={cql.ringing:.4g} ballistic={ballistic.ringing:.4g}")]


def figure_switching(out_dir: str) -> List[Check]:
    """Full switching at the reference lambda and beta_e."""
    lam = settings.REFERENCE_LAMBDAS[settings.FIG6][0]
    plan = plan_switching(preset(settings.FIG6, lam), beta_e=settings.REFERENCE_BETA_E)
    p = plan.params
    u0 = p.s_minus + lam * np.asarray(settings.DEFAULT_OFFSET)
    report = run_switching(u0, plan)
    export_control(plan.waveform, os.path.join(out_dir, "fig6_control.csv"), report=report)
    export_report(report, settings.EXPORT_CSV, os.path.join(out_dir, "fig6_trajectory.csv"))
    export_report(report, settings.EXPORT_JSON, os.path.join(out_dir, "fig6_report.json"))
    logger.info("total control time %.4f", plan.total_control_time)
    return [
        _check("switching_T_e", abs(plan.expulsion.T_e - settings.REFERENCE_T_E[settings.FIG6]) < 1e-3,
               plan.expulsion.T_e),
        _check("switching_success", report.success, report.dist_to_s_plus,
               f"radius {report.success_radius:.3e}"),
        _check("switching_psi_drift", report.psi_drift < 1e-8, report.psi_drift),
    ]


def figure_stress(out_dir: str) -> List[Check]:
    """Expulsion-time errors j T_e for j in STRESS_FACTORS."""
    plan = plan_switching(preset(settings.FIG7))
    p = plan.params
    u0 = p.s_minus + p.lam * np.asarray(settings.DEFAULT_OFFSET)
    checks = []
    for j in settings.STRESS_FACTORS:
        stretched, dilated = stress_test(plan, u0, j)
        export_report(stretched, settings.EXPORT_CSV, os.path.join(out_dir, f"fig7_expulsion_{j:g}.csv"))
        export_report(dilated, settings.EXPORT_CSV, os.path.join(out_dir, f"fig7_transfer_{j:g}.csv"))
        checks.append(_check(f"stress_expulsion_{j:g}", stretched.success, stretched.dist_to_s_plus))
    return checks


def run_suite(out_dir: str, only: Optional[List[str]] = None) -> List[Check]:
    """
    Run the identity checks and the figure runs.

    Args:
        out_dir: Directory for the figure CSVs
        only: Optional subset of figure ids

    Returns:
        Every check, in order
    """
    os.makedirs(out_dir, exist_ok=True)
    figures: List[tuple] = [
        (settings.FIG2, figure_expulsion),
        (settings.FIG3, figure_transfer),
        (settings.FIG4, figure_attraction),
        (settings.FIG5, figure_ballistic),
        (settings.FIG6, figure_switching),
        (settings.FIG7, figure_stress),
    ]
    checks = [
        check_expulsion_time(),
        check_matrix_exponential(),
        check_homological_identity(),
        check_consistency_chain(),
    ]
    selected = {f.upper() for f in only} if only else None
    for figure_id, runner in figures:
        if selected is None or figure_id in selected:
            checks.extend(runner(out_dir))

    frame = pd.DataFrame([vars(c) for c in checks])
    write_frame(frame, os.path.join(out_dir, "checks.csv"))
    return checks
