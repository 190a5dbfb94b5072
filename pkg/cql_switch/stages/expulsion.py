"""
Expulsion Stage for cql-switch

Constant current beta_e applied on [-T_e, 0) pushes the state from s_minus
down to the latitude u3 = -K. Internally the stage runs on tau = T_e + t
in the translated variable xi = (u - s_minus) / lam, where

    xi' = L xi + f + lam V(xi)

with L, f exact and V the remainder.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from cql_switch import settings
from cql_switch.dynamics import scaled_jacobian, scaled_rhs
from cql_switch.exceptions import raise_from_code
from cql_switch.integrate import integrate
from cql_switch.params import DerivedParams
from cql_switch.sampling import ball_points, sphere_points

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ExpulsionPlan:
    """
    Synthesis outputs of the expulsion stage.

    `M1`, `M2`, `lambda_e` and `rho_e` are filled by lemma1_thresholds and
    stay None on a plain plan.
    """

    beta_e: float
    lam: float
    K: float
    T_e: float
    a_bar: float
    b_bar: float
    gamma: float
    Omega: float
    L: np.ndarray
    f: np.ndarray
    xi_end: np.ndarray
    u_end: np.ndarray
    s_minus: np.ndarray
    M_e: float
    r_star: float
    M1: Optional[float] = None
    M2: Optional[float] = None
    lambda_e: Optional[float] = None
    rho_e: Optional[float] = None

    @property
    def k(self) -> float:
        """Angular frequency sqrt(2) beta_e of e^{L tau}."""
        return math.sqrt(2.0) * self.beta_e

    def to_dict(self) -> Dict:
        return {
            "beta_e": self.beta_e,
            "lambda": self.lam,
            "K": self.K,
            "T_e": self.T_e,
            "a_bar": self.a_bar,
            "b_bar": self.b_bar,
            "L": self.L.tolist(),
            "f": self.f.tolist(),
            "xi_end": self.xi_end.tolist(),
            "u_end": self.u_end.tolist(),
            "M_e": self.M_e,
            "r_star": self.r_star,
            "M1": self.M1,
            "M2": self.M2,
            "lambda_e": self.lambda_e,
            "rho_e": self.rho_e,
        }


def _check_beta_e(beta_e: float):
    if not beta_e > 0.0:
        raise_from_code("CQ201", f"beta_e > 0 violated (beta_e={beta_e})")


def expulsion_system(p: DerivedParams, beta_e: float):
    """
    Linear part of the translated expulsion system.

    Returns:
        (L, f, a_bar, b_bar) with a_bar gamma + b_bar Omega = -beta_e
    """
    _check_beta_e(beta_e)
    a_bar = -p.D32 * p.Omega - beta_e * p.gamma
    b_bar = p.D32 * p.gamma - beta_e * p.Omega
    L = np.array([
        [0.0, 0.0, a_bar],
        [0.0, 0.0, b_bar],
        [2.0 * beta_e * p.gamma, 2.0 * beta_e * p.Omega, 0.0],
    ])
    f = np.array([0.0, 0.0, -beta_e / p.lam])
    return L, f, a_bar, b_bar


def expm_closed_form(tau: float, a_bar: float, b_bar: float, gamma: float, Omega: float,
                     beta_e: float) -> np.ndarray:
    """
    e^{L tau} from L^3 = -k^2 L, k = sqrt(2) beta_e:
    e^{L tau} = I + sin(k tau)/k L + (1 - cos(k tau))/k^2 L^2.
    """
    _check_beta_e(beta_e)
    k = math.sqrt(2.0) * beta_e
    c, s = math.cos(k * tau), math.sin(k * tau)
    one_c = (1.0 - c) / beta_e
    return np.array([
        [1.0 + a_bar * gamma * one_c, a_bar * Omega * one_c, a_bar * s / k],
        [b_bar * gamma * one_c, 1.0 + b_bar * Omega * one_c, b_bar * s / k],
        [math.sqrt(2.0) * gamma * s, math.sqrt(2.0) * Omega * s, c],
    ])


def expm_L(tau: float, plan: ExpulsionPlan) -> np.ndarray:
    """Closed-form e^{L tau} for a plan's L."""
    return expm_closed_form(tau, plan.a_bar, plan.b_bar, plan.gamma, plan.Omega, plan.beta_e)


def eigenbasis(plan: ExpulsionPlan) -> np.ndarray:
    """
    Eigenvectors of L as columns; S^{-1} L S = diag(+i k, -i k, 0).
    """
    a, b = plan.a_bar, plan.b_bar
    ik = 1j * plan.k
    return np.array([
        [1.0, 1.0, 1.0],
        [b / a, b / a, -plan.gamma / plan.Omega],
        [ik / a, -ik / a, 0.0],
    ])


def expulsion_time(K: float, beta_e: float) -> float:
    """
    T_e = arcsin(sqrt(2) K) / (sqrt(2) beta_e).

    Raises:
        TargetUnreachableError: sqrt(2) K > 1
    """
    _check_beta_e(beta_e)
    if math.sqrt(2.0) * K > 1.0 or K < 0.0:
        raise_from_code("CQ202", f"sqrt(2) K <= 1 violated (K={K})")
    return math.asin(math.sqrt(2.0) * K) / (math.sqrt(2.0) * beta_e)


def approx_expulsion(tau, plan: ExpulsionPlan) -> np.ndarray:
    """
    First-order approximation xi'(tau) with xi'(0) = 0.

    Works on scalar or array tau (result shape (3,) or (3, N)).
    """
    tau = np.asarray(tau, dtype=float)
    c = np.cos(plan.k * tau)
    s = np.sin(plan.k * tau)
    scale = 1.0 / (2.0 * plan.beta_e * plan.lam)
    return scale * np.array([
        plan.a_bar * (c - 1.0),
        plan.b_bar * (c - 1.0),
        -math.sqrt(2.0) * plan.beta_e * s,
    ])


def residual_field_V(xi, p: DerivedParams, beta_e: float) -> np.ndarray:
    """V(xi) = [scaled field at s_minus + lam xi / lam - L xi - f] / lam; xi shape (3,) or (3, N)."""
    L, f, _, _ = expulsion_system(p, beta_e)
    xi = np.asarray(xi, dtype=float)
    s_minus = p.s_minus if xi.ndim == 1 else p.s_minus[:, None]
    f_col = f if xi.ndim == 1 else f[:, None]
    u = s_minus + p.lam * xi
    return (scaled_rhs(u, beta_e / p.lam, p) / p.lam - L @ xi - f_col) / p.lam


def jacobian_V(xi, p: DerivedParams, beta_e: float) -> np.ndarray:
    """DV(xi) = (J_scaled(s_minus + lam xi) - L) / lam; shape (3, 3) or (3, 3, N)."""
    L, _, _, _ = expulsion_system(p, beta_e)
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1:
        return (scaled_jacobian(p.s_minus + p.lam * xi, beta_e / p.lam, p) - L) / p.lam
    u = p.s_minus[:, None] + p.lam * xi
    return (scaled_jacobian(u, beta_e / p.lam, p) - L[:, :, None]) / p.lam


def _expansion_symbols(xi, p: DerivedParams, beta_e: float):
    xi = np.asarray(xi, dtype=float)
    return (xi[0], xi[1], xi[2], p.lam, beta_e / p.lam, p.alpha_t, p.D21_t, p.h2_t,
            p.D31, p.D32, p.gamma, p.Omega)


def closed_form_jacobian_V(xi, p: DerivedParams, beta_e: float) -> np.ndarray:
    """
    DV(xi) expanded in powers of lambda, entry by entry.

    Uses h2_t = -D21_t Omega and D31 = D32 - lam D21_t; agrees with
    jacobian_V up to rounding.
    """
    x1, x2, x3, lam, B, a, d, h, D31, D32, g, W = _expansion_symbols(xi, p, beta_e)
    l2, l3 = lam ** 2, lam ** 3
    return np.array([
        [
            x3 * B * lam + a * (D31 * x3 ** 2 - d * W * x2) * l2 + a * d * x2 ** 2 * l3,
            D32 * x3 + a * d * g * W * lam - a * d * (W * x1 + 2.0 * g * x2) * l2 + 2.0 * a * d * x1 * x2 * l3,
            (h + D32 * x2) + (B * x1 - 2.0 * a * D31 * g * x3) * lam + 2.0 * a * D31 * x1 * x3 * l2,
        ],
        [
            -D31 * x3 + 2.0 * a * d * g * x2 * l2 - 2.0 * a * d * x1 * x2 * l3,
            (B * x3 - a * d * g ** 2) * lam + a * (2.0 * d * g * x1 + D32 * x3 ** 2) * l2 - a * d * x1 ** 2 * l3,
            (-d * g - D31 * x1) + (B * x2 - 2.0 * a * D32 * W * x3) * lam + 2.0 * a * x3 * (D32 * x2 + h) * l2,
        ],
        [
            (d * x2 - 2.0 * B * x1 + 2.0 * a * D31 * g * x3) * lam - 2.0 * a * D31 * x1 * x3 * l2,
            -d * g + (d * x1 - 2.0 * B * x2 + 2.0 * a * D32 * W * x3) * lam - a * x3 * (2.0 * D32 * x2 + h) * l2,
            -a * (D32 * W ** 2 + D31 * g ** 2) + a * (2.0 * D32 * W * x2 + 2.0 * D31 * g * x1 + h * W) * lam
            - a * (D32 * x2 ** 2 + D31 * x1 ** 2 + h * x2) * l2,
        ],
    ])


def printed_jacobian_V(xi, p: DerivedParams, beta_e: float) -> np.ndarray:
    """
    Published entries b_ij of DV(xi), transcribed as printed.

    The entries of the perturbation's Jacobian are lam b_ij, so b_ij
    itself is compared with DV. Kept for jacobian_table_mismatches; use
    closed_form_jacobian_V or jacobian_V for computation.
    """
    x1, x2, x3, lam, B, a, d, h, D31, D32, g, W = _expansion_symbols(xi, p, beta_e)
    l2, l3 = lam ** 2, lam ** 3
    return np.array([
        [
            x3 * B * lam + a * (d * x2 * W + D31 * x3 ** 2) * l2 + a * d * x2 ** 2 * l3,
            D32 * x3 - a * d * W * h * lam + a * d * (x1 * W - 2.0 * x2 * h) * l2 + 2.0 * a * d * x1 * x2 * l3,
            (-B * h + d * W + D32 * x2) + (x1 * B - 2.0 * a * D31 * x3 * h) * lam + 2.0 * a * D31 * x1 * x3 * l2,
        ],
        [
            -D31 * x3 + 2.0 * a * d * x2 * h * l2 - 2.0 * a * d * x1 * x2 * l3,
            (x3 * B - a * d * g ** 2) * lam + a * (2.0 * d * x1 * h + D32 * x3 ** 2) * l2 - a * d * x1 ** 2 * l3,
            B * W - D31 * x1 + (2.0 * a * D32 * x3 * W + x2 * B) * lam + 2.0 * a * x3 * (d * W + D32 * x2) * l2,
        ],
        [
            2.0 * B * h * (2.0 * a * D31 * x3 * h - 2.0 * x1 * B + d * x2) * lam - 2.0 * a * D31 * x1 * x3 * l2,
            -(d * h + 2.0 * B * W) + (-2.0 * a * D32 * x3 * W - 2.0 * x2 * B + d * x1) * lam
            - a * x3 * (d * W + 2.0 * D32 * x2) * l2,
            -a * (D31 * h ** 2 + D32 * W ** 2) + a * (2.0 * D31 * x1 * h - d * W ** 2 - 2.0 * D32 * x2 * W) * lam
            - a * (d * x2 * W + D32 * x2 ** 2 + D31 * x1 ** 2) * l2,
        ],
    ])


def jacobian_table_mismatches(xi, p: DerivedParams, beta_e: float,
                              atol: float = 1e-9) -> Dict[Tuple[int, int], Tuple[float, float]]:
    """
    Entries (i, j), 1-based, where the published table differs from DV at xi.

    Returns:
        {(i, j): (exact, printed)}
    """
    exact = jacobian_V(xi, p, beta_e)
    printed = printed_jacobian_V(xi, p, beta_e)
    mismatches = {}
    for i in range(3):
        for j in range(3):
            if abs(exact[i, j] - printed[i, j]) > atol * max(1.0, abs(exact[i, j])):
                mismatches[(i + 1, j + 1)] = (float(exact[i, j]), float(printed[i, j]))
    if mismatches:
        logger.warning("published DV entries differing from the exact Jacobian: %s", sorted(mismatches))
    return mismatches


def r_star(p: DerivedParams, K: float, beta_e: float) -> float:
    """Radius enclosing xi'(tau) for tau in [0, T_e]; zero at K = 0."""
    root = math.sqrt(1.0 - 2.0 * K ** 2)
    return math.sqrt(4.0 * K ** 2 + (p.D32 ** 2 + beta_e ** 2) * (root - 1.0) ** 2) / (2.0 * beta_e * p.lam)


def expm_bound(a_bar: float, b_bar: float, gamma: float, Omega: float, beta_e: float,
               grid: int = settings.EXPM_GRID) -> float:
    """
    M_e: max operator 2-norm of e^{L tau} over one period, inflated by 1%
    and floored at 1.
    """
    k = math.sqrt(2.0) * beta_e
    taus = np.linspace(0.0, 2.0 * math.pi / k, grid)
    mats = np.array([expm_closed_form(t, a_bar, b_bar, gamma, Omega, beta_e) for t in taus])
    norms = np.linalg.svd(mats, compute_uv=False)[:, 0]
    return max(1.0, settings.EXPM_INFLATION * float(norms.max()))


def plan_expulsion(p: DerivedParams, beta_e: Optional[float] = None, K: Optional[float] = None) -> ExpulsionPlan:
    """
    Build the expulsion plan.

    Args:
        p: Derived parameters
        beta_e: Unscaled current; defaults to lam * beta_e_t
        K: Target latitude; defaults to p.K

    Returns:
        ExpulsionPlan without sampled thresholds
    """
    beta_e = p.beta_e if beta_e is None else beta_e
    if beta_e is None:
        raise_from_code("CQ201", "beta_e is not set for this parameter set")
    K = p.K if K is None else K

    L, f, a_bar, b_bar = expulsion_system(p, beta_e)
    T_e = expulsion_time(K, beta_e)
    root = math.sqrt(1.0 - 2.0 * K ** 2)
    scale = 1.0 / (2.0 * beta_e * p.lam)
    xi_end = scale * np.array([a_bar * (root - 1.0), b_bar * (root - 1.0), -2.0 * K * beta_e])

    plan = ExpulsionPlan(
        beta_e=beta_e,
        lam=p.lam,
        K=K,
        T_e=T_e,
        a_bar=a_bar,
        b_bar=b_bar,
        gamma=p.gamma,
        Omega=p.Omega,
        L=L,
        f=f,
        xi_end=xi_end,
        u_end=p.s_minus + p.lam * xi_end,
        s_minus=p.s_minus.copy(),
        M_e=expm_bound(a_bar, b_bar, p.gamma, p.Omega, beta_e),
        r_star=r_star(p, K, beta_e),
    )
    logger.info("expulsion plan: T_e=%.6f, u_end=%s, M_e=%.3f", T_e, plan.u_end, plan.M_e)
    return plan


def lemma1_thresholds(p: DerivedParams, K: float, beta_e: float, rho_e: float = 1.0,
                      log2: int = settings.SAMPLE_LOG2) -> ExpulsionPlan:
    """
    Sampled expulsion thresholds.

    M1 bounds |V| over the ball of radius r* and M2 bounds the row-sum
    norm of DV over radius r* + rho_e; both are maxima over Sobol samples
    times BOUND_INFLATION. With these the expulsion error obeys
    |delta(tau)| <= M_e (|delta(0)| + lam M1 tau) exp(lam M_e M2 tau).

    Returns:
        The expulsion plan with M1, M2, lambda_e and rho_e filled in
    """
    if not rho_e > 0.0:
        raise_from_code("CQ203", f"rho_e > 0 violated (rho_e={rho_e})")
    plan = plan_expulsion(p, beta_e, K)

    inner = ball_points(plan.r_star, log2)
    outer = ball_points(plan.r_star + rho_e, log2)
    M1 = settings.BOUND_INFLATION * float(np.max(np.linalg.norm(residual_field_V(inner, p, beta_e), axis=0)))
    row_sums = np.sum(np.abs(jacobian_V(outer, p, beta_e)), axis=1)
    M2 = settings.BOUND_INFLATION * float(np.max(row_sums))

    lambda_e = min(rho_e / (4.0 * M1), math.log(2.0) / M2) / (plan.T_e * plan.M_e)
    logger.info("expulsion thresholds: r*=%.4g M1=%.4g M2=%.4g M_e=%.4g lambda_e=%.4g (lambda=%.4g)",
                plan.r_star, M1, M2, plan.M_e, lambda_e, p.lam)
    if p.lam > lambda_e:
        logger.warning("lambda=%.4g exceeds the expulsion threshold %.4g", p.lam, lambda_e)
    return replace(plan, M1=M1, M2=M2, lambda_e=lambda_e, rho_e=rho_e)


def gronwall_envelope(tau, delta0: float, plan: ExpulsionPlan) -> np.ndarray:
    """M_e (|delta0| + lam M1 tau) exp(lam M_e M2 tau); needs a plan with thresholds."""
    if plan.M1 is None or plan.M2 is None:
        raise ValueError("plan has no sampled thresholds; use lemma1_thresholds")
    tau = np.asarray(tau, dtype=float)
    return plan.M_e * (abs(delta0) + plan.lam * plan.M1 * tau) * np.exp(plan.lam * plan.M_e * plan.M2 * tau)


def simulate_expulsion(plan: ExpulsionPlan, p: DerivedParams, u0=None,
                       rtol: float = settings.DEFAULT_RTOL, atol: float = settings.DEFAULT_ATOL):
    """Full nonlinear flow under constant beta_e over tau in [0, T_e]."""
    u0 = plan.s_minus if u0 is None else np.asarray(u0, dtype=float)
    beta_t = plan.beta_e / p.lam
    return integrate(
        lambda t, u: scaled_rhs(u, beta_t, p),
        u0, 0.0, plan.T_e, rtol, atol,
        control=lambda t: beta_t,
        stage=settings.STAGE_EXPULSION,
    )


def expulsion_error_series(plan: ExpulsionPlan, p: DerivedParams, u0=None,
                           dt: float = settings.DEFAULT_DT_EXPORT,
                           rtol: float = settings.DEFAULT_RTOL,
                           atol: float = settings.DEFAULT_ATOL) -> pd.DataFrame:
    """
    Compare the nonlinear expulsion against xi'(tau).

    Returns:
        DataFrame with tau, xi1..3, xip1..3, delta (= |xi - xi'|) and the
        Groenwall envelope when the plan carries thresholds
    """
    trajectory = simulate_expulsion(plan, p, u0, rtol, atol).sample(dt)
    tau = trajectory.times
    xi = (trajectory.states - plan.s_minus) / p.lam
    xip = approx_expulsion(tau, plan).T
    delta = np.linalg.norm(xi - xip, axis=1)

    frame = pd.DataFrame({
        "tau": tau,
        "xi1": xi[:, 0], "xi2": xi[:, 1], "xi3": xi[:, 2],
        "xip1": xip[:, 0], "xip2": xip[:, 1], "xip3": xip[:, 2],
        "delta": delta,
    })
    if plan.M1 is not None:
        frame["envelope"] = gronwall_envelope(tau, delta[0], plan)
    return frame


def shadowing_check(plan: ExpulsionPlan, p: DerivedParams, rho_e: float = 1.0, log2: int = 6,
                    rtol: float = settings.DEFAULT_RTOL, atol: float = settings.DEFAULT_ATOL) -> Dict:
    """
    Integrate boundary points of the ball of radius rho_e lam / (4 M_e)
    around s_minus over T_e and measure their distance to u_c(T_e).

    Returns:
        dict with n_points, max_distance and ratio = max_distance / (rho_e lam);
        the inclusion holds when ratio <= 1
    """
    radius = rho_e * p.lam / (4.0 * plan.M_e)
    directions = sphere_points(log2)
    distances = []
    for d in directions.T:
        end = simulate_expulsion(plan, p, plan.s_minus + radius * d, rtol, atol).final_state
        distances.append(float(np.linalg.norm(end - plan.u_end)))
    max_distance = max(distances)
    ratio = max_distance / (rho_e * p.lam)
    logger.info("shadowing: %d points, max distance %.4g, ratio %.4g", len(distances), max_distance, ratio)
    return {"n_points": len(distances), "max_distance": max_distance, "ratio": ratio, "holds": ratio <= 1.0}
