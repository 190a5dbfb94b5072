"""
Tests for report and control export.
"""

import json
import logging

import numpy as np
import pandas as pd
import pytest

from cql_switch import settings
from cql_switch.exceptions import CqlSwitchException
from cql_switch.pipeline import run_switching
from cql_switch.report import export_control, export_report, load_report, trajectory_frame


@pytest.fixture(scope="module")
def short_report(fig6_plan):
    u0 = fig6_plan.params.s_minus + fig6_plan.params.lam * np.asarray(settings.DEFAULT_OFFSET)
    return run_switching(u0, fig6_plan, t_attract_max=30.0)


def test_json_round_trip(short_report, tmp_path):
    path = export_report(short_report, "json", str(tmp_path / "out" / "switch.json"))
    with open(path) as handle:
        data = json.load(handle)
    assert data["schema_version"] == settings.REPORT_SCHEMA_VERSION
    assert data["kind"] == "cql"

    loaded = load_report(path)
    assert loaded.to_dict() == short_report.to_dict()
    assert loaded.trajectory is None


def test_csv_has_uniform_grid(short_report, tmp_path):
    dt = 0.5
    path = export_report(short_report, settings.EXPORT_CSV, str(tmp_path / "switch.csv"), dt)
    frame = pd.read_csv(path)
    assert list(frame.columns) == settings.CSV_COLUMNS
    t0, t1 = short_report.stage_times[0], short_report.t_final
    assert frame["t"].iloc[0] == pytest.approx(t0)
    assert frame["t"].iloc[-1] == pytest.approx(t1)
    assert len(frame) in (int(np.floor((t1 - t0) / dt)) + 1, int(np.floor((t1 - t0) / dt)) + 2)


def test_csv_stage_transitions_appear_once(short_report):
    frame = trajectory_frame(short_report, 0.05)
    changes = frame["stage"] != frame["stage"].shift()
    assert list(frame.loc[changes, "stage"]) == [
        settings.STAGE_EXPULSION, settings.STAGE_TRANSFER, settings.STAGE_ATTRACTION,
    ]
    first_transfer = frame.loc[frame["stage"] == settings.STAGE_TRANSFER, "t"].iloc[0]
    assert first_transfer >= 0.0


def test_unknown_format(short_report, tmp_path):
    with pytest.raises(CqlSwitchException) as exc:
        export_report(short_report, "xml", str(tmp_path / "switch.xml"))
    assert exc.value.error_code == "CQ504"


def test_csv_needs_trajectory(short_report, tmp_path):
    path = export_report(short_report, "JSON", str(tmp_path / "switch.json"))
    with pytest.raises(CqlSwitchException):
        export_report(load_report(path), "CSV", str(tmp_path / "switch.csv"))


def test_schema_mismatch_warns(short_report, tmp_path, caplog):
    data = short_report.to_dict()
    data["schema_version"] = "0.1"
    path = tmp_path / "old.json"
    path.write_text(json.dumps(data))
    with caplog.at_level(logging.WARNING, logger="cql_switch.report"):
        load_report(str(path))
    assert "schema" in caplog.text


def test_control_export_records_path(fig6_plan, short_report, tmp_path):
    path = export_control(fig6_plan.waveform, str(tmp_path / "control.csv"), 0.25, short_report)
    frame = pd.read_csv(path)
    assert list(frame.columns) == settings.CONTROL_COLUMNS
    assert frame["beta_t"].iloc[0] == pytest.approx(fig6_plan.waveform.beta_e_t)
    assert short_report.control_samples == path
