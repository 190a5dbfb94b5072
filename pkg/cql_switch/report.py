"""
Report export for cql-switch

JSON carries the versioned report dictionary; CSV carries the resampled
trajectory with columns t, u1, u2, u3, beta, stage.
"""

import json
import logging
import os
from typing import Optional

import pandas as pd

from cql_switch import settings
from cql_switch.exceptions import CqlSwitchException, raise_from_code
from cql_switch.pipeline import SwitchingReport
from cql_switch.stages.transfer import ControlWaveform

logger = logging.getLogger(__name__)


def trajectory_frame(report: SwitchingReport, dt: float = settings.DEFAULT_DT_EXPORT) -> pd.DataFrame:
    """Resampled trajectory of a report as a DataFrame."""
    if report.trajectory is None:
        raise CqlSwitchException("report carries no trajectory", "CQ504")
    return report.trajectory.sample(dt).to_frame()[settings.CSV_COLUMNS]


def export_report(report: SwitchingReport, fmt: str, path: str,
                  dt: float = settings.DEFAULT_DT_EXPORT) -> str:
    """
    Write a report to `path`.

    Args:
        report: Switching report
        fmt: "JSON" or "CSV" (case-insensitive)
        path: Output file
        dt: CSV sampling step

    Returns:
        The written path

    Raises:
        CqlSwitchException: Unsupported format or no trajectory for CSV
    """
    fmt = fmt.upper()
    if fmt not in settings.EXPORT_FORMATS:
        raise_from_code("CQ504", f"unsupported export format '{fmt}'")
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    if fmt == settings.EXPORT_JSON:
        with open(path, "w") as handle:
            json.dump(report.to_dict(), handle, indent=2, sort_keys=True)
    else:
        trajectory_frame(report, dt).to_csv(path, index=False, float_format="%.12g")
    logger.info("wrote %s report to %s", fmt, path)
    return path


def load_report(path: str) -> SwitchingReport:
    """Read a JSON report written by export_report."""
    with open(path) as handle:
        data = json.load(handle)
    version = data.get("schema_version")
    if version != settings.REPORT_SCHEMA_VERSION:
        logger.warning("report schema %s differs from %s", version, settings.REPORT_SCHEMA_VERSION)
    return SwitchingReport.from_dict(data)


def export_control(waveform: ControlWaveform, path: str, dt: float = settings.DEFAULT_DT_EXPORT,
                   report: Optional[SwitchingReport] = None) -> str:
    """
    Write the sampled control (t, beta_t) as CSV; the path is recorded in
    `report.control_samples` when a report is given.
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    waveform.sample(dt)[settings.CONTROL_COLUMNS].to_csv(path, index=False, float_format="%.12g")
    if report is not None:
        report.control_samples = path
    return path


def write_frame(frame: pd.DataFrame, path: str) -> str:
    """CSV writer shared by the figure runs."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.12g")
    logger.info("wrote %d rows to %s", len(frame), path)
    return path
