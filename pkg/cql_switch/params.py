"""
Material and Derived Parameters for cql-switch

Raw anisotropy, damping and field constants, every derived symbol,
the two equilibria and the admissibility diagnostics.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from cql_switch import settings
from cql_switch.exceptions import ParameterValidationError, raise_from_code

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MaterialParams:
    """
    Raw parameters of one experiment.

    Exactly one of `Omega` and `h2_t` is given; the other follows from
    h2_t = -D21_t * Omega. `beta_e_t` may be None when the run has no
    expulsion stage (attraction-only presets).
    """

    D1: float
    D2: float
    D3: float
    alpha_t: float
    lam: float
    K: float
    Omega: Optional[float] = None
    h2_t: Optional[float] = None
    beta_e_t: Optional[float] = None


@dataclass(frozen=True, eq=False)
class DerivedParams:
    """All derived quantities of a parameter set; immutable once built."""

    D1: float
    D2: float
    D3: float
    D21: float
    D31: float
    D32: float
    D21_t: float
    lam: float
    alpha_t: float
    alpha: float
    h2_t: float
    h2: float
    Omega: float
    gamma: float
    sigma: float
    omega: float
    rho: float
    K: float
    beta_e_t: Optional[float]
    s_minus: np.ndarray = field(repr=False)
    s_plus: np.ndarray = field(repr=False)

    @property
    def beta_e(self) -> Optional[float]:
        """Unscaled expulsion current lambda * beta_e_t."""
        if self.beta_e_t is None:
            return None
        return self.lam * self.beta_e_t


@dataclass(frozen=True)
class Diagnostic:
    """One admissibility check: passed iff value <= bound (margin = bound - value)."""

    name: str
    passed: bool
    value: float
    bound: float
    margin: float


def _check_raw(raw: MaterialParams):
    if not (0.0 < raw.D1 < raw.D2 < raw.D3):
        raise_from_code(
            "CQ101",
            f"0 < D1 < D2 < D3 violated (D1={raw.D1}, D2={raw.D2}, D3={raw.D3})",
            {"D1": raw.D1, "D2": raw.D2, "D3": raw.D3},
        )
    if not raw.lam > 0.0:
        raise_from_code("CQ102", f"lambda > 0 violated (lambda={raw.lam})")
    if not raw.alpha_t > 0.0:
        raise_from_code("CQ103", f"alpha_t > 0 violated (alpha_t={raw.alpha_t})")
    if raw.K < 0.0 or math.sqrt(2.0) * raw.K > 1.0:
        raise_from_code("CQ104", f"0 <= sqrt(2) K <= 1 violated (K={raw.K})")
    if (raw.Omega is None) == (raw.h2_t is None):
        raise_from_code("CQ105")


def derive_params(raw: MaterialParams) -> DerivedParams:
    """
    Compute every derived symbol of a raw parameter set.

    Args:
        raw: Raw parameters

    Returns:
        DerivedParams with D_ij, sigma, omega, gamma, rho and s_plus/s_minus

    Raises:
        ParameterValidationError: Naming the violated inequality
    """
    _check_raw(raw)

    D21 = raw.D2 - raw.D1
    D31 = raw.D3 - raw.D1
    D32 = raw.D3 - raw.D2
    D21_t = D21 / raw.lam

    if raw.Omega is not None:
        Omega = raw.Omega
        h2_t = -D21_t * Omega
    else:
        h2_t = raw.h2_t
        Omega = -h2_t / D21_t
    if abs(Omega) >= 1.0:
        raise_from_code("CQ106", f"|Omega| < 1 violated (Omega={Omega})")

    gamma = math.sqrt(1.0 - Omega ** 2)
    K = raw.K

    p = DerivedParams(
        D1=raw.D1,
        D2=raw.D2,
        D3=raw.D3,
        D21=D21,
        D31=D31,
        D32=D32,
        D21_t=D21_t,
        lam=raw.lam,
        alpha_t=raw.alpha_t,
        alpha=raw.lam * raw.alpha_t,
        h2_t=h2_t,
        h2=raw.lam * h2_t,
        Omega=Omega,
        gamma=gamma,
        sigma=math.sqrt(D32 / D31),
        omega=K * math.sqrt(D32 * D31),
        rho=1.0 / (1.0 - K ** 2),
        K=K,
        beta_e_t=raw.beta_e_t,
        s_minus=np.array([-gamma, -Omega, 0.0]),
        s_plus=np.array([gamma, -Omega, 0.0]),
    )
    logger.debug("derived params: %s", p)
    return p


def with_lambda(p: DerivedParams, lam: float) -> DerivedParams:
    """
    Re-derive a parameter set at another lambda keeping D1, D3, the scaled
    constants (D21_t, alpha_t, Omega, beta_e_t) and K fixed.
    """
    raw = MaterialParams(
        D1=p.D1,
        D2=p.D1 + p.D21_t * lam,
        D3=p.D3,
        alpha_t=p.alpha_t,
        lam=lam,
        K=p.K,
        Omega=p.Omega,
        beta_e_t=p.beta_e_t,
    )
    return derive_params(raw)


def _diagnostic(name: str, value: float, bound: float) -> Diagnostic:
    margin = bound - value
    return Diagnostic(name=name, passed=bool(margin >= 0.0), value=value, bound=bound, margin=margin)


def validate_admissibility(p: DerivedParams) -> List[Diagnostic]:
    """
    Evaluate the sufficient conditions of the switching construction.

    Failures are logged, never raised: the preset experiments violate
    the basin-size condition and still switch.

    Returns:
        Diagnostics for: target reachable, Omega lower bound,
        basin-size condition and semi-minor axis vs 5K/4
    """
    ratio = p.D21 / p.D31
    r_sm = p.gamma * p.D21 / (4.0 * abs(p.Omega) * p.D31) if p.Omega else math.inf

    diagnostics = [
        _diagnostic("sqrt(2)*K <= 1", math.sqrt(2.0) * p.K, 1.0),
        # 3 Omega^2 >= 2 D21/D31 written as value <= bound
        _diagnostic("2*D21/D31 <= 3*Omega^2", 2.0 * ratio, 3.0 * p.Omega ** 2),
        _diagnostic("16*sqrt(D21/D31) <= gamma", 16.0 * math.sqrt(ratio), p.gamma),
        _diagnostic("5K/4 <= r_sm", 1.25 * p.K, r_sm),
    ]
    for diag in diagnostics:
        if not diag.passed:
            logger.warning("admissibility check failed: %s (margin %.3e)", diag.name, diag.margin)
    return diagnostics


def preset(figure_id: str, lam: Optional[float] = None) -> MaterialParams:
    """
    Load a row of the experiment parameter table.

    lambda is back-solved from the table's D2 through D2 = D1 + 6.51 lambda.
    A `lam` override (the reference runs use other values) moves D2 along
    the same line, keeping h2_t = -6.51 Omega consistent.

    Args:
        figure_id: One of settings.FIGURES (case-insensitive)
        lam: Optional lambda override

    Returns:
        MaterialParams for the row

    Example:
        >>> preset("FIG2").lam
        0.010998...
    """
    key = figure_id.upper()
    if key not in settings.PRESET_TABLE:
        raise ParameterValidationError(f"Unknown preset '{figure_id}'", "CQ109")
    row = settings.PRESET_TABLE[key]

    if lam is None:
        lam = (row["D2"] - settings.PRESET_D1) / settings.PRESET_D21_T
        D2 = row["D2"]
    else:
        D2 = settings.PRESET_D1 + settings.PRESET_D21_T * lam

    return MaterialParams(
        D1=settings.PRESET_D1,
        D2=D2,
        D3=settings.PRESET_D3,
        alpha_t=row["alpha_t"],
        lam=lam,
        K=row["K"],
        Omega=row["Omega"],
        beta_e_t=row["beta_e_t"],
    )
