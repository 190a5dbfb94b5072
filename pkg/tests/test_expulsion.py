"""
Tests for the expulsion stage: time, closed-form exponential, first-order approximation.
"""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from cql_switch import settings
from cql_switch.exceptions import CqlSwitchException, TargetUnreachableError
from cql_switch.stages.expulsion import (
    approx_expulsion,
    closed_form_jacobian_V,
    eigenbasis,
    expm_L,
    expulsion_error_series,
    expulsion_system,
    expulsion_time,
    gronwall_envelope,
    jacobian_V,
    jacobian_table_mismatches,
    lemma1_thresholds,
    plan_expulsion,
    printed_jacobian_V,
    r_star,
    residual_field_V,
    simulate_expulsion,
)

BETA_E = settings.REFERENCE_BETA_E


@pytest.fixture(scope="module")
def plan(fig2):
    return plan_expulsion(fig2, beta_e=BETA_E)


def test_expulsion_time_reference_values():
    assert expulsion_time(0.07, BETA_E) == pytest.approx(2.3372, abs=1e-3)
    assert expulsion_time(0.0308, BETA_E) == pytest.approx(1.0270, abs=1e-3)


def test_expulsion_time_rejects_unreachable_target():
    with pytest.raises(TargetUnreachableError) as exc:
        expulsion_time(0.8, BETA_E)
    assert exc.value.error_code == "CQ202"


def test_expulsion_time_at_reachability_edge():
    assert expulsion_time(1.0 / math.sqrt(2.0), BETA_E) == pytest.approx(math.pi / (2.0 * math.sqrt(2.0) * BETA_E))


@pytest.mark.parametrize("beta_e", [0.0, -0.01])
def test_non_positive_current_is_rejected(fig2, beta_e):
    with pytest.raises(CqlSwitchException) as exc:
        expulsion_system(fig2, beta_e)
    assert exc.value.error_code == "CQ201"


def test_missing_current_is_rejected(fig4):
    with pytest.raises(CqlSwitchException) as exc:
        plan_expulsion(fig4)
    assert exc.value.error_code == "CQ201"


def test_abar_bbar(plan, fig2):
    assert plan.a_bar == pytest.approx(-0.0799554, abs=1e-6)
    assert plan.b_bar == pytest.approx(0.7362793, abs=1e-6)
    assert plan.a_bar * fig2.gamma + plan.b_bar * fig2.Omega == pytest.approx(-BETA_E, abs=1e-15)


def test_closed_form_exponential_matches_scipy(plan):
    for tau in (0.0, 0.3, plan.T_e, 17.0):
        np.testing.assert_allclose(expm_L(tau, plan), expm(plan.L * tau), atol=1e-10)


def test_exponential_semigroup_and_third_diagonal(plan):
    s, t = 0.7, 1.9
    np.testing.assert_allclose(expm_L(s + t, plan), expm_L(s, plan) @ expm_L(t, plan), atol=1e-12)
    assert expm_L(t, plan)[2, 2] == pytest.approx(math.cos(plan.k * t))


def test_eigenbasis_diagonalizes(plan):
    S = eigenbasis(plan)
    diag = np.linalg.solve(S, plan.L @ S)
    np.testing.assert_allclose(diag, np.diag([1j * plan.k, -1j * plan.k, 0.0]), atol=1e-12)


def test_end_point_reaches_latitude(plan, fig2):
    assert plan.u_end[2] == pytest.approx(-fig2.K, abs=1e-14)
    np.testing.assert_allclose(approx_expulsion(plan.T_e, plan), plan.xi_end, rtol=1e-12)
    np.testing.assert_allclose(approx_expulsion(0.0, plan), np.zeros(3), atol=1e-15)


def test_approximation_solves_linear_system(plan):
    tau = np.linspace(0.0, plan.T_e, 7)
    h = 1e-6
    rate = (approx_expulsion(tau + h, plan) - approx_expulsion(tau - h, plan)) / (2.0 * h)
    expected = plan.L @ approx_expulsion(tau, plan) + plan.f[:, None]
    np.testing.assert_allclose(rate, expected, rtol=1e-6, atol=1e-6)


def test_r_star_encloses_approximation(plan, fig2):
    assert r_star(fig2, 0.0, BETA_E) == 0.0
    tau = np.linspace(0.0, plan.T_e, 50)
    assert np.max(np.linalg.norm(approx_expulsion(tau, plan), axis=0)) <= plan.r_star * (1.0 + 1e-12)


def test_expm_bound_at_least_one(plan):
    assert plan.M_e >= 1.0
    for tau in np.linspace(0.0, 2.0 * math.pi / plan.k, 37):
        assert np.linalg.norm(expm_L(tau, plan), 2) <= plan.M_e


def test_residual_jacobian_matches_finite_differences(fig2):
    xi = np.array([3.0, -5.0, 2.0])
    J = jacobian_V(xi, fig2, BETA_E)
    h = 1e-3
    for k in range(3):
        step = np.zeros(3)
        step[k] = h
        fd = (residual_field_V(xi + step, fig2, BETA_E) - residual_field_V(xi - step, fig2, BETA_E)) / (2.0 * h)
        assert np.max(np.abs(J[:, k] - fd)) < 1e-5 * max(1.0, np.max(np.abs(J)))


def test_closed_form_jacobian_matches_exact(fig2, rng):
    xi = rng.uniform(-5.0, 5.0, size=(3, 50))
    np.testing.assert_allclose(closed_form_jacobian_V(xi, fig2, BETA_E), jacobian_V(xi, fig2, BETA_E),
                               rtol=1e-9, atol=1e-9)


def test_published_jacobian_table_differs_on_every_entry(fig2):
    xi = np.array([0.3, -0.4, 0.5])
    mismatches = jacobian_table_mismatches(xi, fig2, BETA_E)
    assert set(mismatches) == {(i, j) for i in (1, 2, 3) for j in (1, 2, 3)}
    exact, printed = mismatches[(2, 1)]
    # the published entry carries h2_t where the exact one carries -gamma
    lam, a, d = fig2.lam, fig2.alpha_t, fig2.D21_t
    assert printed - exact == pytest.approx(2.0 * a * d * xi[1] * (fig2.h2_t - fig2.gamma) * lam ** 2, rel=1e-6)


def test_published_jacobian_table_at_origin(fig2):
    printed = printed_jacobian_V(np.zeros(3), fig2, BETA_E)
    exact = jacobian_V(np.zeros(3), fig2, BETA_E)
    # first column vanishes at xi = 0 in both tables
    np.testing.assert_array_equal(printed[:, 0], np.zeros(3))
    np.testing.assert_allclose(exact[:, 0], np.zeros(3), atol=1e-12)
    assert abs(printed[0, 2] - exact[0, 2]) > 0.1


def test_residual_field_is_vectorized(fig2, rng):
    xi = rng.uniform(-10.0, 10.0, size=(3, 4))
    batch = residual_field_V(xi, fig2, BETA_E)
    np.testing.assert_allclose(batch[:, 1], residual_field_V(xi[:, 1], fig2, BETA_E))


def test_nonlinear_flow_lands_near_planned_point(plan, fig2):
    trajectory = simulate_expulsion(plan, fig2)
    assert trajectory.final_time == pytest.approx(plan.T_e)
    assert set(trajectory.stage_tags) == {settings.STAGE_EXPULSION}
    assert np.linalg.norm(trajectory.final_state - plan.u_end) < fig2.K


def test_thresholds_and_envelope(fig2):
    plan = lemma1_thresholds(fig2, fig2.K, BETA_E, rho_e=1.0, log2=10)
    assert plan.M1 > 0.0 and plan.M2 > 0.0
    expected = min(1.0 / (4.0 * plan.M1), math.log(2.0) / plan.M2) / (plan.T_e * plan.M_e)
    assert plan.lambda_e == pytest.approx(expected)
    assert gronwall_envelope(0.0, 0.25, plan) == pytest.approx(0.25 * plan.M_e)

    frame = expulsion_error_series(plan, fig2, dt=0.1)
    assert list(frame.columns[:8]) == ["tau", "xi1", "xi2", "xi3", "xip1", "xip2", "xip3", "delta"]
    assert "envelope" in frame.columns
    assert frame["delta"].iloc[0] == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.diff(frame["envelope"]) > 0)


def test_envelope_needs_thresholds(plan):
    with pytest.raises(ValueError):
        gronwall_envelope(1.0, 0.0, plan)


def test_threshold_radius_must_be_positive(fig2):
    with pytest.raises(CqlSwitchException) as exc:
        lemma1_thresholds(fig2, fig2.K, BETA_E, rho_e=0.0)
    assert exc.value.error_code == "CQ203"
