"""
Tests for configuration layering, environment settings and the command line.
"""

import json
import os

import pandas as pd
import pytest

from cql_switch import settings
from cql_switch.cli import build_parser, main
from cql_switch.config import build_params, load_config_file, parse_overrides, sweep_workers
from cql_switch.exceptions import ParameterValidationError

CONFIG = """\
# FIG6 row at the reference lambda
d1=0.0411
d2=0.05412
d3=0.8527
alpha_t=2
lambda=0.002
omega_cap=0.1036
beta_e_t=15
k_target=0.0308
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "fig6.cfg"
    path.write_text(CONFIG)
    return str(path)


def test_config_file_values(config_file):
    values = load_config_file(config_file)
    assert values["lambda"] == 0.002
    assert values["beta_e_t"] == 15.0
    raw = build_params(config_file=config_file)
    assert raw.lam == 0.002
    assert raw.Omega == 0.1036
    assert raw.h2_t is None


def test_unknown_key_in_file(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("d1=0.0411\ncolour=blue\n")
    with pytest.raises(ParameterValidationError) as exc:
        load_config_file(str(path))
    assert exc.value.error_code == "CQ107"


def test_non_numeric_value(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("d1=small\n")
    with pytest.raises(ParameterValidationError) as exc:
        load_config_file(str(path))
    assert exc.value.error_code == "CQ108"


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_config_file("/nonexistent/params.cfg")


def test_overrides_parse_and_reject():
    assert parse_overrides(["K_TARGET=0.03", "alpha_t=4"]) == {"k_target": 0.03, "alpha_t": 4.0}
    with pytest.raises(ParameterValidationError):
        parse_overrides(["alpha_t"])


def test_layers_apply_in_order(config_file):
    raw = build_params(settings.FIG6, config_file, ["alpha_t=4"], K=0.02)
    assert raw.alpha_t == 4.0
    assert raw.lam == 0.002
    assert raw.beta_e_t == 15.0
    assert raw.K == 0.02


def test_field_parametrization_swaps():
    raw = build_params(settings.FIG6, overrides=["h2_t=-0.6741"])
    assert raw.h2_t == -0.6741
    assert raw.Omega is None


def test_missing_required_keys(tmp_path):
    path = tmp_path / "partial.cfg"
    path.write_text("d1=0.0411\nd2=0.0802\n")
    with pytest.raises(ParameterValidationError) as exc:
        build_params(config_file=str(path))
    assert exc.value.error_code == "CQ107"
    assert "d3" in exc.value.details["missing"]


def test_lambda_flag_moves_d2_of_preset():
    raw = build_params(settings.FIG6, lam=0.002)
    assert raw.D2 == pytest.approx(settings.PRESET_D1 + settings.PRESET_D21_T * 0.002)


def test_sweep_workers_from_environment(monkeypatch):
    monkeypatch.setenv(settings.THREADS_ENV_VAR, "3")
    assert sweep_workers() == 3
    monkeypatch.setenv(settings.THREADS_ENV_VAR, "0")
    assert sweep_workers() == 1
    monkeypatch.setenv(settings.THREADS_ENV_VAR, "many")
    assert sweep_workers() >= 1


def test_parser_subcommands():
    args = build_parser().parse_args(["switch", "--preset", "FIG6", "--lambda", "0.002", "--set", "alpha_t=2"])
    assert args.command == "switch"
    assert args.lam == 0.002
    assert args.overrides == ["alpha_t=2"]


def test_cli_plan_writes_outputs(tmp_path):
    out = str(tmp_path / "run")
    code = main(["plan", "--preset", "FIG6", "--lambda", "0.002", "--beta-e", "0.03", "--out", out])
    assert code == 0
    with open(os.path.join(out, "plan.json")) as handle:
        plan = json.load(handle)
    assert plan["expulsion"]["T_e"] == pytest.approx(1.0270, abs=1e-3)
    assert os.path.isfile(os.path.join(out, "control.csv"))


def test_cli_expel_uses_rho_e(tmp_path):
    out = str(tmp_path / "expel")
    code = main(["expel", "--preset", "FIG6", "--lambda", "0.002", "--beta-e", "0.03",
                 "--rho-e", "0.5", "--out", out])
    assert code == 0
    with open(os.path.join(out, "expulsion.json")) as handle:
        expulsion = json.load(handle)
    assert expulsion["rho_e"] == 0.5
    assert expulsion["lambda_e"] > 0.0
    assert os.path.isfile(os.path.join(out, "expulsion.csv"))


def test_cli_transfer_writes_control(tmp_path):
    out = str(tmp_path / "transfer")
    code = main(["transfer", "--preset", "FIG6", "--lambda", "0.002", "--beta-e", "0.03", "--out", out])
    assert code == 0
    control = pd.read_csv(os.path.join(out, "control.csv"))
    assert list(control.columns) == settings.CONTROL_COLUMNS
    with open(os.path.join(out, "transfer.json")) as handle:
        transfer = json.load(handle)
    assert control["t"].iloc[-1] == pytest.approx(transfer["T_tr"], abs=settings.DEFAULT_DT_EXPORT)


def test_cli_attract_writes_trajectories_and_lyapunov_series(tmp_path):
    out = str(tmp_path / "attract")
    code = main(["attract", "--preset", "FIG4", "--boundary-samples", "3", "--t-max", "4000", "--out", out])
    assert code == 0
    for i in range(3):
        frame = pd.read_csv(os.path.join(out, f"attraction_{i}.csv"))
        assert {"t", "u1", "u2", "u3", "W"} <= set(frame.columns)
        assert frame["W"].iloc[-1] < frame["W"].iloc[0]
    series = pd.read_csv(os.path.join(out, "attraction_W.csv"))
    assert list(series.columns) == ["point", "t", "W"]
    assert set(series["point"]) == {0, 1, 2}


def test_cli_reports_errors(tmp_path, capsys):
    code = main(["plan", "--preset", "FIG4", "--out", str(tmp_path)])
    assert code == 2
    assert "CQ201" in capsys.readouterr().err
