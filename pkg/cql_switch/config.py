"""
Configuration for cql-switch

Parameter sets come from a preset row, a flat key=value file, `--set`
overrides and the explicit `--lambda` / `--k-target` flags, applied in
that order.

Example file::

    d1=0.0411
    d2=0.0802
    d3=0.8527
    alpha_t=2
    lambda=0.002
    omega_cap=0.1036
    beta_e_t=3
    k_target=0.0308
"""

import logging
import os
from typing import Dict, Iterable, Optional

from dotenv import dotenv_values, load_dotenv

from cql_switch import settings
from cql_switch.exceptions import ParameterValidationError, raise_from_code
from cql_switch.params import MaterialParams, preset

logger = logging.getLogger(__name__)

# config key -> MaterialParams field
_FIELDS = {
    "d1": "D1",
    "d2": "D2",
    "d3": "D3",
    "alpha_t": "alpha_t",
    "lambda": "lam",
    "omega_cap": "Omega",
    "h2_t": "h2_t",
    "beta_e_t": "beta_e_t",
    "k_target": "K",
}
_REQUIRED = ["d1", "d2", "d3", "alpha_t", "lambda", "k_target"]


def _parse_value(key: str, raw) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise_from_code("CQ108", f"value of '{key}' is not a number: {raw!r}", {"key": key})


def _normalize(values: Dict[str, object], source: str) -> Dict[str, float]:
    parsed = {}
    for key, raw in values.items():
        key = key.strip().lower()
        if key not in settings.CONFIG_KEYS:
            raise_from_code("CQ107", f"unknown key '{key}' in {source}", {"key": key})
        parsed[key] = _parse_value(key, raw)
    return parsed


def load_config_file(path: str) -> Dict[str, float]:
    """
    Read a flat key=value parameter file.

    Raises:
        ParameterValidationError: Unknown key or non-numeric value
        FileNotFoundError: Missing file
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    return _normalize(dotenv_values(path), path)


def parse_overrides(items: Optional[Iterable[str]]) -> Dict[str, float]:
    """Parse `--set k=v` items."""
    values = {}
    for item in items or []:
        if "=" not in item:
            raise ParameterValidationError(f"override '{item}' is not of the form key=value", "CQ107")
        key, raw = item.split("=", 1)
        values[key] = raw
    return _normalize(values, "--set")


def _merge(base: Dict[str, float], layer: Dict[str, float]) -> Dict[str, float]:
    merged = dict(base)
    # a layer naming one of the field parametrizations replaces the other
    if "omega_cap" in layer:
        merged.pop("h2_t", None)
    if "h2_t" in layer:
        merged.pop("omega_cap", None)
    merged.update(layer)
    return merged


def _preset_values(figure_id: str, lam: Optional[float]) -> Dict[str, float]:
    raw = preset(figure_id, lam)
    values = {key: getattr(raw, name) for key, name in _FIELDS.items()}
    return {key: value for key, value in values.items() if value is not None}


def build_params(preset_id: Optional[str] = None, config_file: Optional[str] = None,
                 overrides: Optional[Iterable[str]] = None, lam: Optional[float] = None,
                 K: Optional[float] = None) -> MaterialParams:
    """
    Assemble raw parameters from the configuration layers.

    A `lam` flag on top of a preset moves D2 along D2 = D1 + 6.51 lambda
    unless a later layer sets d2 itself.

    Returns:
        MaterialParams

    Raises:
        ParameterValidationError: Unknown key, bad value or missing keys
    """
    values: Dict[str, float] = {}
    if preset_id:
        values = _preset_values(preset_id, lam)
    if config_file:
        values = _merge(values, load_config_file(config_file))
    values = _merge(values, parse_overrides(overrides))
    if lam is not None:
        values["lambda"] = lam
    if K is not None:
        values["k_target"] = K

    missing = [key for key in _REQUIRED if key not in values]
    if missing:
        raise ParameterValidationError(f"missing parameters: {', '.join(missing)}", "CQ107",
                                       {"missing": missing})
    if ("omega_cap" in values) == ("h2_t" in values):
        raise_from_code("CQ105")

    params = MaterialParams(**{_FIELDS[key]: value for key, value in values.items()})
    logger.debug("configured parameters: %s", params)
    return params


def sweep_workers() -> int:
    """Process pool size: CQL_SWITCH_THREADS (after loading .env) or the CPU count."""
    load_dotenv()
    raw = os.getenv(settings.THREADS_ENV_VAR)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning("ignoring %s=%r", settings.THREADS_ENV_VAR, raw)
    return max(1, os.cpu_count() or 1)
