"""
Tests for raw/derived parameters, presets and admissibility diagnostics.
"""

import logging
import math
from dataclasses import replace

import numpy as np
import pytest

from cql_switch import settings
from cql_switch.exceptions import ParameterValidationError
from cql_switch.params import MaterialParams, derive_params, preset, validate_admissibility, with_lambda


def _raw(**overrides):
    base = dict(D1=0.0411, D2=0.1127, D3=0.8527, alpha_t=2.0, lam=0.011, K=0.07, Omega=0.0676, beta_e_t=3.0)
    base.update(overrides)
    return MaterialParams(**base)


def test_preset_lambda_back_solved_from_d2():
    assert preset("FIG2").lam == pytest.approx(0.0716 / 6.51, rel=1e-12)
    assert preset("fig6").lam == pytest.approx(0.0391 / 6.51, rel=1e-12)


def test_preset_lambda_override_moves_d2():
    raw = preset(settings.FIG6, lam=0.002)
    assert raw.lam == 0.002
    assert raw.D2 == pytest.approx(settings.PRESET_D1 + 6.51 * 0.002)
    assert raw.K == 0.0308


def test_unknown_preset():
    with pytest.raises(ParameterValidationError) as exc:
        preset("FIG9")
    assert exc.value.error_code == "CQ109"


def test_derived_quantities(fig2):
    assert fig2.D21 == pytest.approx(0.0716)
    assert fig2.D31 == pytest.approx(0.8116)
    assert fig2.D32 == pytest.approx(0.74)
    assert fig2.D21_t == pytest.approx(6.51)
    assert fig2.gamma == pytest.approx(math.sqrt(1.0 - 0.0676 ** 2))
    assert fig2.sigma == pytest.approx(math.sqrt(0.74 / 0.8116))
    assert fig2.omega == pytest.approx(0.07 * math.sqrt(0.74 * 0.8116))
    assert fig2.rho == pytest.approx(1.0 / (1.0 - 0.07 ** 2))
    assert fig2.h2_t == pytest.approx(-6.51 * 0.0676)
    assert fig2.alpha == pytest.approx(fig2.lam * 2.0)
    assert fig2.beta_e == pytest.approx(fig2.lam * 3.0)


def test_equilibria_are_unit_and_mirrored(fig2):
    assert np.linalg.norm(fig2.s_minus) == pytest.approx(1.0)
    assert np.linalg.norm(fig2.s_plus) == pytest.approx(1.0)
    np.testing.assert_allclose(fig2.s_minus, [-fig2.gamma, -fig2.Omega, 0.0])
    np.testing.assert_allclose(fig2.s_plus, [fig2.gamma, -fig2.Omega, 0.0])


def test_h2_t_parametrization_recovers_omega():
    p = derive_params(_raw(Omega=None, h2_t=-0.44, lam=0.0716 / 6.51))
    assert p.Omega == pytest.approx(0.44 / 6.51)


@pytest.mark.parametrize("overrides, code", [
    (dict(D2=0.9), "CQ101"),
    (dict(D1=0.0), "CQ101"),
    (dict(lam=0.0), "CQ102"),
    (dict(alpha_t=-1.0), "CQ103"),
    (dict(K=0.75), "CQ104"),
    (dict(K=-0.01), "CQ104"),
    (dict(h2_t=-0.44), "CQ105"),
    (dict(Omega=1.0), "CQ106"),
])
def test_invalid_parameters(overrides, code):
    with pytest.raises(ParameterValidationError) as exc:
        derive_params(_raw(**overrides))
    assert exc.value.error_code == code
    assert code in str(exc.value)


def test_k_at_reachability_edge_is_accepted():
    p = derive_params(_raw(K=1.0 / math.sqrt(2.0)))
    assert p.K == pytest.approx(0.70710678)


def test_with_lambda_keeps_scaled_constants(fig2):
    half = with_lambda(fig2, fig2.lam / 2.0)
    assert half.D21_t == pytest.approx(fig2.D21_t)
    assert half.D21 == pytest.approx(fig2.D21 / 2.0)
    assert half.Omega == fig2.Omega
    assert half.h2_t == pytest.approx(fig2.h2_t)
    assert half.beta_e_t == fig2.beta_e_t


def test_admissibility_reports_all_conditions(fig4, caplog):
    with caplog.at_level(logging.WARNING, logger="cql_switch.params"):
        diagnostics = validate_admissibility(fig4)
    assert len(diagnostics) == 4
    by_name = {d.name: d for d in diagnostics}
    assert by_name["sqrt(2)*K <= 1"].passed
    # basin-size condition fails at every preset
    assert not by_name["16*sqrt(D21/D31) <= gamma"].passed
    assert "16*sqrt(D21/D31) <= gamma" in caplog.text
    for diag in diagnostics:
        assert diag.margin == pytest.approx(diag.bound - diag.value)


def test_admissibility_semi_minor_axis(fig4):
    r_sm = fig4.gamma * fig4.D21 / (4.0 * fig4.Omega * fig4.D31)
    diag = validate_admissibility(fig4)[3]
    assert diag.bound == pytest.approx(r_sm)
    assert diag.passed == (1.25 * fig4.K <= r_sm)


def test_derived_params_are_frozen(fig2):
    with pytest.raises(Exception):
        fig2.lam = 1.0
    assert replace(fig2, K=0.05).K == 0.05
