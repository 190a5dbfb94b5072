"""
Tests for the vector fields: LLS, reduced and scaled forms, latitudinal control.
"""

import numpy as np
import pytest

from cql_switch.dynamics import (
    applied_field,
    beta_lat,
    fr_fields,
    fr_jacobian,
    free_energy,
    latitude_fr_fields,
    latitudinal_rhs,
    linear_part,
    lls_rhs,
    psi,
    reduced_rhs,
    scaled_jacobian,
    scaled_rhs,
    stereographic,
)
from cql_switch.exceptions import PoleError

E3 = np.array([0.0, 0.0, 1.0])


def test_lls_matches_reduced_on_sphere(fig2, unit_states):
    u = unit_states(1000)
    beta = 0.021
    full = np.array([lls_rhs(m, applied_field(fig2), fig2.alpha, beta, E3, fig2) for m in u.T]).T
    assert np.max(np.abs(full - reduced_rhs(u, beta, fig2))) < 1e-13


def test_lls_is_tangent(fig6, unit_states):
    u = unit_states(200)
    for m in u.T:
        assert abs(np.dot(m, lls_rhs(m, applied_field(fig6), fig6.alpha, 0.05, E3, fig6))) < 1e-14


def test_reduced_conserves_psi_off_sphere(fig2, rng):
    u = rng.uniform(-2.0, 2.0, size=(3, 500))
    assert np.max(np.abs(np.sum(u * reduced_rhs(u, 0.3, fig2), axis=0))) < 1e-13


def test_scaled_is_regrouped_reduced(fig2, rng):
    u = rng.uniform(-1.5, 1.5, size=(3, 1000))
    beta_t = 3.0
    diff = scaled_rhs(u, beta_t, fig2) - reduced_rhs(u, fig2.lam * beta_t, fig2)
    assert np.max(np.abs(diff)) < 1e-13


def test_reduced_at_hard_axis_pole(fig2):
    np.testing.assert_allclose(reduced_rhs(E3, 0.0, fig2), [fig2.h2, fig2.alpha * fig2.h2, 0.0], atol=1e-15)


def test_equilibria_are_fixed_points(fig6):
    for s in (fig6.s_minus, fig6.s_plus):
        assert np.max(np.abs(reduced_rhs(s, 0.0, fig6))) < 1e-15


def test_scaled_jacobian_matches_finite_differences(fig3, unit_states):
    h = 1e-6
    for state in unit_states(20).T:
        J = scaled_jacobian(state, 2.0, fig3)
        for k in range(3):
            step = np.zeros(3)
            step[k] = h
            fd = (scaled_rhs(state + step, 2.0, fig3) - scaled_rhs(state - step, 2.0, fig3)) / (2.0 * h)
            assert np.max(np.abs(fd - J[:, k])) < 1e-6


def test_scaled_jacobian_vectorized(fig3, unit_states):
    u = unit_states(5)
    batch = scaled_jacobian(u, 1.0, fig3)
    assert batch.shape == (3, 3, 5)
    np.testing.assert_allclose(batch[:, :, 2], scaled_jacobian(u[:, 2], 1.0, fig3))


def test_latitudinal_rhs_keeps_latitude(fig3, rng):
    angles = rng.uniform(0.0, 2.0 * np.pi, 300)
    radii = rng.uniform(0.1, 1.0, 300)
    v = np.array([radii * np.cos(angles), radii * np.sin(angles), -fig3.K * np.ones(300)])
    assert np.max(np.abs(latitudinal_rhs(v, fig3)[2])) < 1e-15


def test_beta_lat_pole():
    from cql_switch.params import derive_params, preset

    p = derive_params(preset("FIG3"))
    with pytest.raises(PoleError) as exc:
        beta_lat(np.array([0.0, 0.0, -p.K]), p)
    assert exc.value.error_code == "CQ301"


def test_fr_decomposition_is_exact(fig3, rng):
    u = rng.uniform(-1.0, 1.0, size=(3, 400))
    v = np.array([0.6, -0.7, -fig3.K])
    F, R = fr_fields(u, v, fig3)
    lhs = scaled_rhs(u, beta_lat(v, fig3), fig3) - linear_part(u, fig3)
    assert np.max(np.abs(lhs - fig3.lam * F - fig3.lam ** 2 * R)) < 1e-13


def test_fr_jacobian_matches_finite_differences(fig3):
    u = np.array([0.3, -0.5, 0.2])
    v = np.array([-0.9, -0.1, -fig3.K])
    J = fr_jacobian(u, v, fig3)
    h = 1e-6
    for k in range(3):
        step = np.zeros(3)
        step[k] = h
        fd = (fr_fields(u + step, v, fig3)[0] - fr_fields(u - step, v, fig3)[0]) / (2.0 * h)
        np.testing.assert_allclose(J[:, k], fd, atol=1e-7)


def test_latitude_forms_agree_in_total(fig3):
    angles = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
    r = np.sqrt(1.0 - fig3.K ** 2)
    v = np.array([r * np.cos(angles), r * np.sin(angles), -fig3.K * np.ones(64)])
    F, R = fr_fields(v, v, fig3)
    F_lat, R_lat = latitude_fr_fields(v, fig3)
    total = fig3.lam * (F - F_lat) + fig3.lam ** 2 * (R - R_lat)
    assert np.max(np.abs(total)) < 1e-13

    # individually they differ by lam X and -X
    X = fig3.alpha_t * fig3.rho * fig3.K ** 2 * fig3.D21_t * np.array([v[0] * v[1] ** 2, -v[0] ** 2 * v[1]])
    np.testing.assert_allclose(F[:2] - F_lat[:2], fig3.lam * X, atol=1e-12)


def test_free_energy_lower_at_equilibria_than_hard_axis(fig6):
    h_a = applied_field(fig6)
    assert free_energy(fig6.s_minus, h_a, fig6) == pytest.approx(free_energy(fig6.s_plus, h_a, fig6))
    assert free_energy(fig6.s_plus, h_a, fig6) < free_energy(E3, h_a, fig6)


def test_psi_and_stereographic():
    u = np.array([0.6, 0.0, 0.8])
    assert psi(u) == pytest.approx(1.0)
    np.testing.assert_allclose(stereographic(u), [0.6 / 1.8, 0.0])
