"""
Attraction Stage for cql-switch

Free relaxation (beta = 0) towards s_plus, studied in U = u - s_plus with
the quadratic Lyapunov function W(U2, U3) = (D21 U2^2 + D31 U3^2) / 2.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from cql_switch import settings
from cql_switch.exceptions import RecipeInconsistencyError, raise_from_code
from cql_switch.integrate import Trajectory, integrate_until
from cql_switch.params import DerivedParams, MaterialParams, derive_params

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BasinSpec:
    """Sublevel set {|U1| <= u1_cap, W <= W_star} on the energy level 1 + delta_a."""

    W_star: float
    r_sm: float
    delta_a_max: float
    u1_cap: float


@dataclass
class AttractionResult:
    """Outcome of a free relaxation run."""

    U_infinity: np.ndarray
    converged: bool
    t_converged: float
    W_series: np.ndarray
    trajectory: Trajectory

    @property
    def times(self) -> np.ndarray:
        return self.trajectory.times


def basin_spec(p: DerivedParams) -> BasinSpec:
    return BasinSpec(
        W_star=(p.D21 * p.gamma) ** 2 / (32.0 * p.D31 * p.Omega ** 2),
        r_sm=p.gamma * p.D21 / (4.0 * abs(p.Omega) * p.D31),
        delta_a_max=(p.gamma / 4.0) ** 2,
        u1_cap=p.gamma / 4.0,
    )


def lyapunov_W(U2, U3, p: DerivedParams):
    return 0.5 * (p.D21 * U2 ** 2 + p.D31 * U3 ** 2)


def attraction_fields(U, p: DerivedParams):
    """
    (G1, G2) of the translated system U' = G1(U) + alpha G2(U).

    G1 is the undamped part; grad W . G1 = 0 identically.
    """
    U1, U2, U3 = np.asarray(U, dtype=float)
    g, Om, D21, D31, D32 = p.gamma, p.Omega, p.D21, p.D31, p.D32
    a1 = g + U1
    a2 = U2 - Om
    G1 = np.array([
        U3 * (D32 * U2 - D31 * Om),
        -D31 * U3 * a1,
        D21 * U2 * a1,
    ])
    G2 = np.array([
        a1 * (D31 * U3 ** 2 + D21 * a2 * U2),
        a2 * D32 * U3 ** 2 - D21 * a1 ** 2 * U2 - D21 * Om * U3 ** 2,
        -U3 * (D32 * a2 ** 2 + D31 * a1 ** 2 - D21 * Om * a2),
    ])
    return G1, G2


def attraction_rhs(U, p: DerivedParams) -> np.ndarray:
    """Reduced field at beta = 0 translated to s_plus."""
    G1, G2 = attraction_fields(U, p)
    return G1 + p.alpha * G2


def lyapunov_rate(U, p: DerivedParams):
    """dW/dt along attraction_rhs."""
    U = np.asarray(U, dtype=float)
    dU = attraction_rhs(U, p)
    return p.D21 * U[1] * dU[1] + p.D31 * U[2] * dU[2]


def _check_delta_a(delta_a: float, p: DerivedParams, strict: bool = True):
    if abs(delta_a) <= (p.gamma / 4.0) ** 2:
        return
    if strict or p.gamma ** 2 + delta_a < 0.0:
        raise_from_code("CQ401", f"|delta_a| <= (gamma/4)^2 violated (delta_a={delta_a})")
    logger.warning("delta_a=%g lies outside the certified range |delta_a| <= %.4g", delta_a, (p.gamma / 4.0) ** 2)


def energy_offset(U, p: DerivedParams) -> float:
    """delta_a = Psi(U + s_plus) - 1."""
    return float(np.sum((np.asarray(U, dtype=float) + p.s_plus) ** 2) - 1.0)


def basin_contains(U, delta_a: float, p: DerivedParams) -> bool:
    """
    Membership of the Lyapunov basin on the level Psi = 1 + delta_a.

    Raises:
        DeltaRangeError: |delta_a| > (gamma/4)^2
    """
    _check_delta_a(delta_a, p)
    U = np.asarray(U, dtype=float)
    spec = basin_spec(p)
    return bool(
        abs(U[0]) <= spec.u1_cap
        and lyapunov_W(U[1], U[2], p) <= spec.W_star
        and abs(energy_offset(U, p) - delta_a) < 1e-9
    )


def graph_u1(U2, U3, delta_a: float, p: DerivedParams):
    """U1 on the level Psi = 1 + delta_a near s_plus."""
    return -p.gamma + np.sqrt(1.0 + delta_a - (U2 - p.Omega) ** 2 - U3 ** 2)


def predicted_limit(delta_a: float, p: DerivedParams) -> np.ndarray:
    """(-gamma + sqrt(gamma^2 + delta_a), 0, 0); for delta_a >= 0 its norm is at most delta_a / (2 gamma)."""
    _check_delta_a(delta_a, p, strict=False)
    return np.array([-p.gamma + math.sqrt(p.gamma ** 2 + delta_a), 0.0, 0.0])


def boundary_points(delta_a: float, p: DerivedParams, n: int) -> np.ndarray:
    """n points on the W = W_star level of the basin, shape (n, 3)."""
    _check_delta_a(delta_a, p, strict=False)
    W_star = basin_spec(p).W_star
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    U2 = math.sqrt(2.0 * W_star / p.D21) * np.cos(theta)
    U3 = math.sqrt(2.0 * W_star / p.D31) * np.sin(theta)
    return np.column_stack([graph_u1(U2, U3, delta_a, p), U2, U3])


def rate_expression(x, theta, eps: float, mu: float, p: DerivedParams):
    """
    dW/dt in the scaled polar variables
    U = (mu x, eps cos(theta) / (gamma D21), eps sin(theta) / D31).
    """
    g, D21, D31, Om = p.gamma, p.D21, p.D31, p.Omega
    s2, c2 = np.sin(theta) ** 2, np.cos(theta) ** 2
    mx = mu * x
    bracket = (
        1.0 + 2.0 * mx * (s2 + c2 / g) + mx ** 2 * (s2 + c2 / g ** 2)
        - 2.0 * Om * eps / g * (1.0 / D21 - 1.0 / D31) * np.cos(theta) * s2
        + eps ** 2 / g ** 2 / (D21 * D31) ** 2 * (D31 - D21) ** 2 * s2 * c2
    )
    return -p.alpha * eps ** 2 * bracket


def default_t_max(p: DerivedParams) -> float:
    return settings.ATTRACTION_T_MAX_FACTOR / (p.alpha_t * p.lam)


def run_attraction(U0, p: DerivedParams, t_max: Optional[float] = None,
                   rtol: float = settings.DEFAULT_RTOL, atol: float = settings.DEFAULT_ATOL,
                   check_lyapunov: bool = True) -> AttractionResult:
    """
    Relax from U0 until the field norm stays below CONVERGENCE_FIELD_TOL
    for CONVERGENCE_STREAK accepted steps.

    Raises:
        LyapunovViolationError: W grows by more than LYAPUNOV_NOISE between steps
    """
    t_max = default_t_max(p) if t_max is None else t_max
    delta_a = energy_offset(U0, p)
    if abs(delta_a) <= (p.gamma / 4.0) ** 2 and not basin_contains(U0, delta_a, p):
        logger.warning("initial point %s lies outside the Lyapunov basin", U0)

    trajectory = integrate_until(
        lambda t, U: attraction_rhs(U, p),
        U0,
        lambda t, U: np.linalg.norm(attraction_rhs(U, p)) < settings.CONVERGENCE_FIELD_TOL,
        t_max, rtol, atol,
        sustain=settings.CONVERGENCE_STREAK,
        stage=settings.STAGE_ATTRACTION,
    )
    W = lyapunov_W(trajectory.states[:, 1], trajectory.states[:, 2], p)
    if check_lyapunov and len(W) > 1:
        increase = float(np.max(np.diff(W)))
        if increase > settings.LYAPUNOV_NOISE:
            raise_from_code("CQ402", f"W increased by {increase:.3e}", {"increase": increase})

    if not trajectory.limit_reached:
        logger.warning("attraction did not converge within t_max=%g", t_max)
    return AttractionResult(
        U_infinity=trajectory.final_state,
        converged=trajectory.limit_reached,
        t_converged=trajectory.final_time,
        W_series=W,
        trajectory=trajectory,
    )


def select_theorem_params(D1: float, D3: float, lam: float, beta_e_t: float = 3.0,
                          alpha_t: float = 2.0, strict: bool = True) -> Dict[str, float]:
    """
    Constructive parameter choice for the full switching statement.

    Order: Omega^2 = (52/75) D21/D31, then gamma, then
    K_bar = (gamma/4) sqrt(D21/D31), h2 = -D21 Omega. The stages are then
    planned at these values to get M_e and Theta, giving
    r_minus = Theta K_bar / (128 M_e (1 + Theta)) and f = 1 / (2 gamma).

    The compatibility condition 50 K_bar^2 D31 <= 3 gamma^2 D21 reduces to
    50/16 <= 3 for this K_bar and never holds, so the default raises.
    With strict=False it is logged and the recipe is still evaluated.

    Returns:
        dict with K_bar, Omega, gamma, h2, r_minus, f, M_e, Theta

    Raises:
        RecipeInconsistencyError: strict and the compatibility condition fails
    """
    from cql_switch.stages.expulsion import plan_expulsion
    from cql_switch.stages.transfer import lemma2_thresholds, plan_transfer

    D2 = D1 + settings.PRESET_D21_T * lam
    D21, D31 = D2 - D1, D3 - D1
    Omega = math.sqrt(settings.RECIPE_OMEGA_SQ * D21 / D31)
    gamma = math.sqrt(1.0 - Omega ** 2)
    K_bar = 0.25 * gamma * math.sqrt(D21 / D31)

    lhs, rhs = 50.0 * K_bar ** 2 * D31, 3.0 * gamma ** 2 * D21
    if lhs > rhs:
        message = f"50 K^2 D31 = {lhs:.4g} exceeds 3 gamma^2 D21 = {rhs:.4g}"
        if strict:
            raise RecipeInconsistencyError(message, "CQ403", {"lhs": lhs, "rhs": rhs})
        logger.warning("recipe compatibility: %s", message)

    p = derive_params(MaterialParams(D1=D1, D2=D2, D3=D3, alpha_t=alpha_t, lam=lam, K=K_bar,
                                     Omega=Omega, beta_e_t=beta_e_t))
    expl = plan_expulsion(p)
    transfer = lemma2_thresholds(plan_transfer(expl.u_end[:2], p), p)
    Theta = transfer.Theta
    r_minus = Theta * K_bar / (128.0 * expl.M_e * (1.0 + Theta))
    return {
        "K_bar": K_bar,
        "Omega": Omega,
        "gamma": gamma,
        "h2": -D21 * Omega,
        "r_minus": r_minus,
        "f": 1.0 / (2.0 * gamma),
        "M_e": expl.M_e,
        "Theta": Theta,
    }
