"""
Tests for planning, full switching, stress and ballistic runs, sweeps.
"""

import numpy as np
import pytest

from cql_switch import settings
from cql_switch.exceptions import ParameterValidationError, PlanningError
from cql_switch.params import preset
from cql_switch.pipeline import (
    SwitchingReport,
    ballistic_baseline,
    group_property_gap,
    plan_switching,
    run_switching,
    stress_test,
    sweep,
)

SHORT = 40.0


def _start(plan):
    return plan.params.s_minus + plan.params.lam * np.asarray(settings.DEFAULT_OFFSET)


@pytest.fixture(scope="module")
def fig6_report(fig6_plan):
    return run_switching(_start(fig6_plan), fig6_plan)


def test_plan_contents(fig6_plan):
    expulsion, transfer, waveform = fig6_plan
    assert expulsion.T_e == pytest.approx(1.0270, abs=1e-3)
    assert expulsion.beta_e == settings.REFERENCE_BETA_E
    assert transfer.w0[0] < 0.0
    np.testing.assert_allclose(transfer.w0, expulsion.u_end[:2])
    assert fig6_plan.total_control_time == pytest.approx(expulsion.T_e + transfer.T_tr)
    assert waveform.beta_e_t == pytest.approx(settings.REFERENCE_BETA_E / 0.002)

    data = fig6_plan.to_dict()
    assert data["lambda"] == 0.002
    assert data["transfer"]["T_tr"] == transfer.T_tr
    assert "c1_20" in data["transfer"]["coefficients"]


def test_zero_latitude_fails_in_transfer():
    with pytest.raises(PlanningError) as exc:
        plan_switching(preset(settings.FIG6, lam=0.002), K=0.0, beta_e=settings.REFERENCE_BETA_E)
    assert exc.value.stage == settings.STAGE_TRANSFER
    assert exc.value.error_code == "CQ302"
    assert "stage=TRANSFER" in str(exc.value)


def test_missing_current_fails_in_expulsion():
    with pytest.raises(PlanningError) as exc:
        plan_switching(preset(settings.FIG4))
    assert exc.value.stage == settings.STAGE_EXPULSION


def test_full_switching_succeeds(fig6_plan, fig6_report):
    report = fig6_report
    assert report.converged
    assert report.success
    assert report.dist_to_s_plus <= report.success_radius
    assert report.psi_drift < 1e-8
    assert report.initial_radius == pytest.approx(0.002 * np.linalg.norm(settings.DEFAULT_OFFSET))
    assert report.success_radius == pytest.approx(report.initial_radius / (2.0 * fig6_plan.params.gamma))
    assert report.stage_times == (-fig6_plan.expulsion.T_e, 0.0, fig6_plan.transfer.T_tr)
    assert report.max_u3_plus_K_during_transfer < 0.5 * fig6_plan.params.K
    assert len(report.energies) == 4
    assert report.ringing >= 0.0


def test_stage_tags_follow_time(fig6_report):
    tags = fig6_report.trajectory.stage_tags
    order = [tags[0]] + [b for a, b in zip(tags, tags[1:]) if a != b]
    assert order == [settings.STAGE_EXPULSION, settings.STAGE_TRANSFER, settings.STAGE_ATTRACTION]
    assert np.all(np.diff(fig6_report.trajectory.times) > 0)


def test_start_state_is_projected(fig6_plan):
    u0 = 3.0 * _start(fig6_plan)
    report = run_switching(u0, fig6_plan, t_attract_max=SHORT)
    np.testing.assert_allclose(report.u_at_stage_ends[0], u0 / np.linalg.norm(u0))


def test_start_at_s_minus_uses_zero_radius_tolerance(fig6_plan):
    report = run_switching(fig6_plan.params.s_minus, fig6_plan, t_attract_max=SHORT)
    assert report.initial_radius == 0.0
    assert report.success_radius == settings.ZERO_RADIUS_TOL


def test_zero_start_is_rejected(fig6_plan):
    with pytest.raises(ParameterValidationError):
        run_switching(np.zeros(3), fig6_plan, t_attract_max=SHORT)


def test_unit_stress_factor_reproduces_nominal_run(fig6_plan):
    u0 = _start(fig6_plan)
    nominal = run_switching(u0, fig6_plan, t_attract_max=SHORT).to_dict()
    stretched, dilated = stress_test(fig6_plan, u0, 1.0, t_attract_max=SHORT)
    assert stretched.to_dict() == nominal
    assert dilated.to_dict() == nominal


def test_stress_variants_change_timing(fig6_plan):
    stretched, dilated = stress_test(fig6_plan, _start(fig6_plan), 1.02, t_attract_max=SHORT)
    assert stretched.stage_times[0] == pytest.approx(-1.02 * fig6_plan.expulsion.T_e)
    assert dilated.stage_times[2] == pytest.approx(fig6_plan.transfer.T_tr / 1.02)


def test_ballistic_without_pulse_relaxes_near_s_minus(fig6_plan):
    p = fig6_plan.params
    report = ballistic_baseline(_start(fig6_plan), p, beta_const=0.03, T_on=0.0, t_relax_max=SHORT)
    assert report.kind == "ballistic"
    assert report.stage_times == (0.0, 0.0, 0.0)
    assert report.max_u3_plus_K_during_transfer is None
    assert not report.success
    assert np.linalg.norm(report.final_state - p.s_minus) < 0.01
    assert set(report.trajectory.stage_tags) <= {settings.STAGE_BALLISTIC, settings.STAGE_FREE}


def test_ballistic_pulse_tags(fig6_plan):
    p = fig6_plan.params
    report = ballistic_baseline(_start(fig6_plan), p, beta_const=0.03, T_on=5.0, t_relax_max=SHORT)
    tags = report.trajectory.stage_tags
    assert tags[0] == settings.STAGE_BALLISTIC
    assert tags[-1] == settings.STAGE_FREE
    assert report.stage_times == (0.0, 5.0, 5.0)


def test_ballistic_rejects_negative_inputs(fig6_plan):
    with pytest.raises(ParameterValidationError):
        ballistic_baseline(_start(fig6_plan), fig6_plan.params, beta_const=-0.01, T_on=1.0)
    with pytest.raises(ParameterValidationError):
        ballistic_baseline(_start(fig6_plan), fig6_plan.params, beta_const=0.01, T_on=-1.0)


def test_sweep_in_process(fig6_plan):
    raw = preset(settings.FIG6, lam=0.004)
    reports = sweep(raw, [0.004, 0.002], t_attract_max=SHORT, workers=1)
    assert len(reports) == 2
    assert all(isinstance(report, SwitchingReport) for report in reports)
    assert all(report.trajectory is None for report in reports)
    # T_e scales as 1 / (lam beta_e_t)
    assert reports[0].stage_times[0] == pytest.approx(0.5 * reports[1].stage_times[0])


def test_controlled_flow_group_property(fig6_plan):
    assert fig6_plan.waveform.breakpoints == (-fig6_plan.expulsion.T_e, 0.0, fig6_plan.transfer.T_tr)
    assert group_property_gap(fig6_plan, _start(fig6_plan)) < 10.0 * settings.DEFAULT_RTOL
