"""
Transfer Stage for cql-switch

Quasi-latitudinal half revolution along u3 = -K. On the latitude the
first two components obey

    w' = L w + lam F_r(w),   L = [[0, -K D32], [K D31, 0]].

In complex coordinates x = C^{-1} w, C = [[sigma, sigma], [-i, i]], the
linear part is diag(i omega, -i omega) and one near-identity transform
x = X + lam C(X) removes the O(lam) terms. The normal-form coefficients
are obtained by solving the homological equation on the monomial basis.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from cql_switch import settings
from cql_switch.dynamics import beta_lat, fr_jacobian, latitudinal_rhs, scaled_rhs
from cql_switch.exceptions import PoleError, raise_from_code
from cql_switch.integrate import integrate
from cql_switch.params import DerivedParams
from cql_switch.sampling import ball_points

logger = logging.getLogger(__name__)

MONOMIALS = [(2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)]
COMPONENTS = (1, 2)
TORUS_GRID = 8

CoeffKey = Tuple[Tuple[int, int], int]


@dataclass(frozen=True)
class NormalFormCoefficients:
    """
    Coefficients c[(nu, j)] of C_j(x) = sum_nu c[(nu, j)] x1^nu1 x2^nu2.
    """

    c: Dict[CoeffKey, complex]

    def __getitem__(self, key: CoeffKey) -> complex:
        return self.c[key]

    def evaluate(self, x) -> np.ndarray:
        """C(x) for x of shape (2,) or (2, N)."""
        x1, x2 = x[0], x[1]
        out = []
        for j in COMPONENTS:
            out.append(sum(self.c[(nu, j)] * x1 ** nu[0] * x2 ** nu[1] for nu in MONOMIALS))
        return np.array(out)

    def rate(self, x, omega: float) -> np.ndarray:
        """d/dt C(X(t)) along X(t) = (X1 e^{i omega t}, X2 e^{-i omega t})."""
        x1, x2 = x[0], x[1]
        out = []
        for j in COMPONENTS:
            out.append(sum(
                1j * omega * (nu[0] - nu[1]) * self.c[(nu, j)] * x1 ** nu[0] * x2 ** nu[1]
                for nu in MONOMIALS
            ))
        return np.array(out)

    def to_dict(self) -> Dict[str, List[float]]:
        """Keys like 'c1_20' mapped to [real, imag]."""
        return {
            f"c{j}_{nu[0]}{nu[1]}": [float(np.real(value)), float(np.imag(value))]
            for (nu, j), value in sorted(self.c.items(), key=lambda item: (item[0][1], item[0][0]))
        }


@dataclass(frozen=True, eq=False)
class TransferPlan:
    """
    Synthesis outputs of the transfer stage.

    The transfer thresholds (M_tr, K_w, lambda_tr, Theta) are filled by
    lemma2_thresholds.
    """

    K: float
    lam: float
    omega: float
    sigma: float
    rho: float
    w0: np.ndarray
    X_a: float
    X_b: float
    A_m: float
    phi: float
    T_tr: float
    coeffs: NormalFormCoefficients
    M_tr: Optional[float] = None
    K_w: Optional[float] = None
    lambda_tr: Optional[float] = None
    Theta: Optional[float] = None

    @property
    def X0(self) -> np.ndarray:
        X1 = complex(self.X_a, self.X_b)
        return np.array([X1, X1.conjugate()])

    def rho_tr_minus(self, rho_plus: float) -> float:
        """Inner radius Theta rho_plus / (4 (1 + Theta))."""
        if self.Theta is None:
            raise ValueError("plan has no transfer thresholds; use lemma2_thresholds")
        return self.Theta * rho_plus / (4.0 * (1.0 + self.Theta))

    def to_dict(self) -> Dict:
        return {
            "K": self.K,
            "lambda": self.lam,
            "omega": self.omega,
            "sigma": self.sigma,
            "rho": self.rho,
            "w0": self.w0.tolist(),
            "X_a": self.X_a,
            "X_b": self.X_b,
            "A_m": self.A_m,
            "phi": self.phi,
            "T_tr": self.T_tr,
            "coefficients": self.coeffs.to_dict(),
            "M_tr": self.M_tr,
            "K_w": self.K_w,
            "lambda_tr": self.lambda_tr,
            "Theta": self.Theta,
        }


def at_latitude(p: DerivedParams, K: float) -> DerivedParams:
    """Same parameters with another target latitude K."""
    return replace(p, K=K, omega=K * math.sqrt(p.D32 * p.D31), rho=1.0 / (1.0 - K ** 2))


def _require_omega(p: DerivedParams):
    if not p.omega > 0.0:
        raise_from_code("CQ302", f"omega = K sqrt(D32 D31) must be positive (K={p.K})")


def linear_matrix(p: DerivedParams) -> np.ndarray:
    return np.array([[0.0, -p.K * p.D32], [p.K * p.D31, 0.0]])


def complex_basis(p: DerivedParams) -> np.ndarray:
    """C with w = C x."""
    return np.array([[p.sigma, p.sigma], [-1j, 1j]])


def to_complex(w, p: DerivedParams) -> np.ndarray:
    """x = C^{-1} w; x2 is the conjugate of x1 for real w."""
    w1, w2 = w[0], w[1]
    return np.array([w1 / (2.0 * p.sigma) + 0.5j * w2, w1 / (2.0 * p.sigma) - 0.5j * w2])


def from_complex(x, p: DerivedParams) -> np.ndarray:
    """w = Re(C x)."""
    return np.real(np.array([p.sigma * (x[0] + x[1]), 1j * (x[1] - x[0])]))


def first_order_field(w, p: DerivedParams) -> np.ndarray:
    """F_r(w): first-order latitudinal field, valid for complex arguments."""
    w1, w2 = w[0], w[1]
    rK = p.rho * p.K
    return np.array([
        -rK * w2 * (p.h2_t * w2 + p.D21_t * w1 ** 2),
        rK * w1 * (p.h2_t * w2 - p.D21_t * w2 ** 2),
    ])


def transformed_field(x, p: DerivedParams) -> np.ndarray:
    """G(x) = C^{-1} F_r(C x)."""
    F = first_order_field(np.array([p.sigma * (x[0] + x[1]), 1j * (x[1] - x[0])]), p)
    return to_complex(F, p)


def prime_integral(w, p: DerivedParams):
    """sigma^{-1} w1^2 + sigma w2^2, conserved by the lam = 0 flow."""
    return w[0] ** 2 / p.sigma + p.sigma * w[1] ** 2


def _eigen(j: int, omega: float) -> complex:
    return 1j * omega if j == 1 else -1j * omega


def _divisor(nu: Tuple[int, int], j: int, omega: float) -> complex:
    return 1j * omega * (nu[0] - nu[1]) - _eigen(j, omega)


def normal_form_coefficients(p: DerivedParams, K: Optional[float] = None) -> NormalFormCoefficients:
    """
    Solve the homological equation (nu . Lambda - Lambda_j) c = g.

    The monomial coefficients g of G are recovered by least squares on a
    torus grid, where the seven monomials are orthogonal. Resonant
    monomials must have g = 0 and get c = 0.

    Raises:
        ParameterValidationError: K = 0 (omega vanishes)
    """
    if K is not None and K != p.K:
        p = at_latitude(p, K)
    _require_omega(p)
    angles = 2.0 * np.pi * np.arange(TORUS_GRID) / TORUS_GRID
    t1, t2 = np.meshgrid(angles, angles, indexing="ij")
    x = np.array([np.exp(1j * t1).ravel(), np.exp(1j * t2).ravel()])
    design = np.array([x[0] ** nu[0] * x[1] ** nu[1] for nu in MONOMIALS]).T
    G = transformed_field(x, p)

    c: Dict[CoeffKey, complex] = {}
    for j in COMPONENTS:
        g, *_ = np.linalg.lstsq(design, G[j - 1], rcond=None)
        for nu, g_nu in zip(MONOMIALS, g):
            divisor = _divisor(nu, j, p.omega)
            if abs(divisor) < 1e-14 * p.omega:
                if abs(g_nu) > 1e-10:
                    raise ValueError(f"resonant term nu={nu}, j={j} has nonzero coefficient {g_nu}")
                c[(nu, j)] = 0j
            else:
                c[(nu, j)] = complex(g_nu / divisor)
    return NormalFormCoefficients(c)


def _quadratic_table(p: DerivedParams, mixed: complex) -> Dict[CoeffKey, complex]:
    K, rho, h, s, w = p.K, p.rho, p.h2_t, p.sigma, p.omega
    return {
        ((2, 0), 1): -1j * K * rho * h * (s ** 2 + 1.0) / (2.0 * s * w),
        ((0, 2), 1): 1j * K * rho * h * (1.0 - s ** 2) / (6.0 * s * w),
        ((1, 1), 1): -mixed,
        ((2, 0), 2): 1j * K * rho * h * (s ** 2 - 1.0) / (6.0 * s * w),
        ((0, 2), 2): 1j * K * rho * h * (s ** 2 + 1.0) / (2.0 * s * w),
        ((1, 1), 2): mixed,
    }


def _zero_cubic() -> Dict[CoeffKey, complex]:
    return {(nu, j): 0j for nu in MONOMIALS if sum(nu) == 3 for j in COMPONENTS}


def printed_normal_form_coefficients(p: DerivedParams, last_assignment_wins: bool = False) -> NormalFormCoefficients:
    """
    Closed-form coefficient table as published, typos included.

    The mixed quadratic entries carry sigma / (sigma omega). The cubic
    block sets c1_30 = c2_03 = c1_12 = c1_21 = D21_t K rho sigma / (2 omega)
    and then c1_30 = c2_03 = 0; `last_assignment_wins` selects which of the
    two repeated assignments holds. Use corrected_normal_form_coefficients
    for the table that solves the homological equation.
    """
    _require_omega(p)
    K, rho, h, d, s, w = p.K, p.rho, p.h2_t, p.D21_t, p.sigma, p.omega
    cubic = d * K * rho * s / (2.0 * w)
    c = _quadratic_table(p, 1j * h * K * rho * s / (s * w))
    c.update(_zero_cubic())
    c[((1, 2), 1)] = cubic
    c[((2, 1), 1)] = cubic
    if not last_assignment_wins:
        c[((3, 0), 1)] = cubic
        c[((0, 3), 2)] = cubic
    return NormalFormCoefficients(c)


def corrected_normal_form_coefficients(p: DerivedParams) -> NormalFormCoefficients:
    """
    Closed-form table that solves the homological equation.

    Mixed quadratic entries are -c1_11 = c2_11 = i h2_t K rho / (sigma omega);
    the cubic terms sit on c1_30, c1_12, c2_21 and c2_03, all equal to
    D21_t K rho sigma / (2 omega).
    """
    _require_omega(p)
    K, rho, h, d, s, w = p.K, p.rho, p.h2_t, p.D21_t, p.sigma, p.omega
    cubic = d * K * rho * s / (2.0 * w)
    c = _quadratic_table(p, 1j * h * K * rho / (s * w))
    c.update(_zero_cubic())
    for key in (((3, 0), 1), ((1, 2), 1), ((2, 1), 2), ((0, 3), 2)):
        c[key] = cubic
    return NormalFormCoefficients(c)


def closed_form_residuals(p: DerivedParams, sample_points) -> Dict[str, float]:
    """homological_residual of the published table (both readings) and of the corrected one."""
    tables = {
        "printed_first": printed_normal_form_coefficients(p),
        "printed_last": printed_normal_form_coefficients(p, last_assignment_wins=True),
        "corrected": corrected_normal_form_coefficients(p),
    }
    return {name: homological_residual(table, p, sample_points) for name, table in tables.items()}


def coefficient_mismatches(solved: NormalFormCoefficients, printed: NormalFormCoefficients,
                           rtol: float = 1e-9) -> Dict[CoeffKey, Tuple[complex, complex]]:
    """
    Entries where the two tables differ, as {key: (solved, printed)}.

    Differences below rtol times the largest solved entry count as zero,
    so least-squares noise on vanishing entries is not reported.
    """
    floor = rtol * max(abs(value) for value in solved.c.values())
    mismatches = {}
    for key, value in solved.c.items():
        other = printed.c[key]
        if abs(value - other) > max(rtol * max(abs(value), abs(other)), floor):
            mismatches[key] = (value, other)
    for key, (value, other) in mismatches.items():
        logger.warning("normal form coefficient %s: solved %s, printed %s", key, value, other)
    return mismatches


def homological_residual(coeffs: NormalFormCoefficients, p: DerivedParams, sample_points) -> float:
    """
    max |sum_nu (nu . Lambda - Lambda_j) c x^nu - G_j(x)| over the samples.

    Args:
        sample_points: Complex pairs, shape (N, 2)
    """
    x = np.asarray(sample_points, dtype=complex).T
    G = transformed_field(x, p)
    worst = 0.0
    for j in COMPONENTS:
        lhs = sum(_divisor(nu, j, p.omega) * coeffs[(nu, j)] * x[0] ** nu[0] * x[1] ** nu[1] for nu in MONOMIALS)
        worst = max(worst, float(np.max(np.abs(lhs - G[j - 1]))))
    return worst


def initial_normal_coords(w0, coeffs: NormalFormCoefficients, p: DerivedParams) -> Tuple[float, float]:
    """
    X(0) = x0 - lam C(x0) with x0 = C^{-1} w0.

    Returns:
        (X_a, X_b) = (Re X1(0), Im X1(0))
    """
    x0 = to_complex(np.asarray(w0, dtype=float), p)
    X0 = x0 - p.lam * coeffs.evaluate(x0)
    if abs(X0[1] - np.conj(X0[0])) > 1e-12 * max(1.0, abs(X0[0])):
        logger.warning("normal coordinates lost conjugate symmetry: %s", X0)
    return float(np.real(X0[0])), float(np.imag(X0[0]))


def _normal_state(t, plan: TransferPlan) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    phase = np.exp(1j * plan.omega * t)
    X1 = complex(plan.X_a, plan.X_b) * phase
    return np.array([X1, np.conj(X1)])


def approx_transfer_solution(t, plan: TransferPlan, p: DerivedParams) -> np.ndarray:
    """
    w^{[<=1]}(t) = Re C (X(t) + lam C(X(t))), X1(t) = X1(0) e^{i omega t}.

    Scalar t gives shape (2,), array t gives (2, N).
    """
    X = _normal_state(t, plan)
    return from_complex(X + plan.lam * plan.coeffs.evaluate(X), p)


def closed_form_transfer_solution(t, plan: TransferPlan, p: DerivedParams, printed: bool = False) -> np.ndarray:
    """
    w^{[<=1]}(t) written out as harmonics of omega t.

    Fundamental, second and third harmonics plus a constant shift of w2,
    all in terms of X_a and X_b. With `printed` the second harmonic of w2
    keeps the published factor (2 sigma^2 + 1) instead of
    (2 sigma^2 + 1) / sigma.
    """
    t = np.asarray(t, dtype=float)
    Xa, Xb, s = plan.X_a, plan.X_b, p.sigma
    h, d = p.h2_t, p.D21_t
    R2 = Xa ** 2 + Xb ** 2
    c1, s1 = np.cos(plan.omega * t), np.sin(plan.omega * t)
    c2, s2 = np.cos(2.0 * plan.omega * t), np.sin(2.0 * plan.omega * t)
    c3, s3 = np.cos(3.0 * plan.omega * t), np.sin(3.0 * plan.omega * t)
    scale = p.lam * p.K * p.rho / plan.omega
    w2_second = (2.0 * s ** 2 + 1.0) if printed else (2.0 * s ** 2 + 1.0) / s

    w1 = 2.0 * s * (Xa * c1 - Xb * s1) + scale * (
        d * s ** 2 * R2 * (Xa * c1 - Xb * s1)
        + (2.0 / 3.0) * h * (s ** 2 + 2.0) * (2.0 * Xa * Xb * c2 - (Xb ** 2 - Xa ** 2) * s2)
        - d * s ** 2 * (Xa * (3.0 * Xb ** 2 - Xa ** 2) * c3 - Xb * (Xb ** 2 - 3.0 * Xa ** 2) * s3)
    )
    w2 = 2.0 * (Xb * c1 + Xa * s1) + scale * (
        -d * s * R2 * (Xb * c1 + Xa * s1)
        + (2.0 / 3.0) * h * w2_second * ((Xb ** 2 - Xa ** 2) * c2 + 2.0 * Xa * Xb * s2)
        - d * s * (Xb * (Xb ** 2 - 3.0 * Xa ** 2) * c3 + Xa * (3.0 * Xb ** 2 - Xa ** 2) * s3)
        - 2.0 * h * R2 / s
    )
    return np.array([w1, w2])


def approx_transfer_rate(t, plan: TransferPlan, p: DerivedParams) -> np.ndarray:
    """Exact time derivative of approx_transfer_solution."""
    X = _normal_state(t, plan)
    dX = np.array([1j * plan.omega * X[0], -1j * plan.omega * X[1]])
    return from_complex(dX + plan.lam * plan.coeffs.rate(X, plan.omega), p)


def normal_form_residual(plan: TransferPlan, p: DerivedParams, n: int = 2001) -> float:
    """sup over [0, T_tr] of |d/dt w - L w - lam F_r(w)| along w^{[<=1]}."""
    t = np.linspace(0.0, plan.T_tr, n)
    w = approx_transfer_solution(t, plan, p)
    residual = approx_transfer_rate(t, plan, p) - linear_matrix(p) @ w - p.lam * first_order_field(w, p)
    return float(np.max(np.linalg.norm(residual, axis=0)))


def first_crossing_time(A_m: float, phi: float, target: float, omega: float) -> Optional[float]:
    """
    First t >= 0 with A_m cos(omega t + phi) = target within one period.

    Sign changes are bracketed on a grid of CROSSING_GRID points and
    refined with brentq. Returns None when the target is never crossed.
    """
    def gap(t):
        return A_m * math.cos(omega * t + phi) - target

    grid = np.linspace(0.0, 2.0 * math.pi / omega, settings.CROSSING_GRID)
    values = [gap(t) for t in grid]
    for lo, hi, g_lo, g_hi in zip(grid, grid[1:], values, values[1:]):
        if g_lo == 0.0:
            return float(lo)
        if g_lo * g_hi < 0.0:
            return float(brentq(gap, lo, hi, xtol=1e-14))
    return None


def transfer_time(w0, p: DerivedParams, K: Optional[float] = None) -> Tuple[float, float, float]:
    """
    Time for w1^{[0]}(t) = A_m cos(omega t + phi) to reach -A_m - K^2.

    Returns:
        (T_tr, A_m, phi)

    Raises:
        InvalidStartError: w0[0] >= 0
        TargetOvershootError: The target is not reached on the first half turn
    """
    K = p.K if K is None else K
    _require_omega(p)
    w1, w2 = float(w0[0]), float(w0[1])
    if w1 >= 0.0:
        raise_from_code("CQ303", f"transfer start needs w1 < 0 (w1={w1})")

    # A_m < 0 carries the sign of w1, so phi lies in (-pi/2, pi/2)
    A_m = -math.hypot(w1, p.sigma * w2)
    phi = math.atan2(-p.sigma * w2, -w1)
    target = -A_m - K ** 2
    argument = target / A_m
    if not -1.0 <= argument <= 1.0:
        raise_from_code("CQ304", f"arccos argument {argument} outside [-1, 1] (A_m={A_m}, K={K})")
    angle = math.acos(argument)
    if angle < phi:
        raise_from_code("CQ304", f"target crossing precedes t = 0 (phi={phi}, arccos={angle})")
    T_tr = (angle - phi) / p.omega

    crossing = first_crossing_time(A_m, phi, target, p.omega)
    if crossing is None or abs(crossing - T_tr) > settings.CROSSING_TOL * 2.0 * math.pi / p.omega:
        raise_from_code("CQ304", f"closed-form T_tr={T_tr} is not the first crossing (found {crossing})")

    if T_tr > math.pi / p.omega:
        logger.warning("T_tr=%.4f exceeds the half period %.4f", T_tr, math.pi / p.omega)
    if K ** 2 >= abs(w1) / settings.K_SQUARED_RATIO:
        logger.warning("K^2=%.3g is not small against |w1(0)|=%.3g", K ** 2, abs(w1))
    return T_tr, A_m, phi


def plan_transfer(w0, p: DerivedParams) -> TransferPlan:
    """
    Build the transfer plan from the start point w0 = u_c(T_e)[:2].

    Returns:
        TransferPlan without the sampled thresholds
    """
    w0 = np.asarray(w0, dtype=float)[:2]
    coeffs = normal_form_coefficients(p)
    T_tr, A_m, phi = transfer_time(w0, p)
    X_a, X_b = initial_normal_coords(w0, coeffs, p)
    plan = TransferPlan(
        K=p.K,
        lam=p.lam,
        omega=p.omega,
        sigma=p.sigma,
        rho=p.rho,
        w0=w0,
        X_a=X_a,
        X_b=X_b,
        A_m=A_m,
        phi=phi,
        T_tr=T_tr,
        coeffs=coeffs,
    )
    logger.info("transfer plan: T_tr=%.4f A_m=%.6f phi=%.6f", T_tr, A_m, phi)
    return plan


def lemma2_thresholds(plan: TransferPlan, p: DerivedParams, log2: int = settings.SAMPLE_LOG2_TRANSFER,
                      n_times: int = settings.TRANSFER_TIME_SAMPLES) -> TransferPlan:
    """
    Sampled transfer thresholds.

    M_tr = 1 + BOUND_INFLATION * max ||D_u F(u; w(t))||_inf over |u| <= 2
    and t in [0, T_tr]; K_w = 1 + max |w(t)|;
    lambda_tr = omega^2 / (4 pi^2 K_w M_tr);
    Theta = (4 pi M_tr lam / omega + omega / (pi K_w)) / 2.
    """
    u = ball_points(2.0, log2)
    largest = 0.0
    for t in np.linspace(0.0, plan.T_tr, n_times):
        w = approx_transfer_solution(t, plan, p)
        J = fr_jacobian(u, np.array([w[0], w[1], -plan.K]), p)
        largest = max(largest, float(np.max(np.sum(np.abs(J), axis=1))))
    M_tr = 1.0 + settings.BOUND_INFLATION * largest

    w_path = approx_transfer_solution(np.linspace(0.0, plan.T_tr, settings.EXPM_GRID), plan, p)
    K_w = 1.0 + float(np.max(np.linalg.norm(w_path, axis=0)))
    lambda_tr = plan.omega ** 2 / (4.0 * math.pi ** 2 * K_w * M_tr)
    Theta = 0.5 * (4.0 * math.pi * M_tr * p.lam / plan.omega + plan.omega / (math.pi * K_w))

    logger.info("transfer thresholds: M_tr=%.4g K_w=%.4g lambda_tr=%.4g Theta=%.4g", M_tr, K_w, lambda_tr, Theta)
    if Theta >= 1.0:
        logger.warning("Theta=%.4g >= 1 at lambda=%.4g (threshold %.4g)", Theta, p.lam, lambda_tr)
    return replace(plan, M_tr=M_tr, K_w=K_w, lambda_tr=lambda_tr, Theta=Theta)


@dataclass(frozen=True, eq=False)
class ControlWaveform:
    """
    Piecewise scaled current:
    beta_e_t on [-T_e, 0), beta_lat(w^{[<=1]}(clock * t), -K) on
    [0, T_tr / clock], zero afterwards and before -T_e.

    `clock` != 1 replays the transfer current on a dilated time axis.
    """

    beta_e_t: float
    T_e: float
    T_tr: float
    transfer: TransferPlan
    params: DerivedParams
    clock: float = 1.0

    @property
    def transfer_end(self) -> float:
        return self.T_tr / self.clock

    def transfer_current(self, t):
        w = approx_transfer_solution(self.clock * np.asarray(t, dtype=float), self.transfer, self.params)
        return beta_lat(np.array([w[0], w[1], -self.transfer.K * np.ones_like(w[0])]), self.params)

    def __call__(self, t: float) -> float:
        if -self.T_e <= t < 0.0:
            return self.beta_e_t
        if 0.0 <= t <= self.transfer_end:
            return float(self.transfer_current(t))
        return 0.0

    def stage(self, t: float) -> str:
        if t < 0.0:
            return settings.STAGE_EXPULSION
        if t <= self.transfer_end:
            return settings.STAGE_TRANSFER
        return settings.STAGE_ATTRACTION

    @property
    def breakpoints(self) -> Tuple[float, float, float]:
        """Times where the current may jump."""
        return (-self.T_e, 0.0, self.transfer_end)

    @property
    def jump_at_zero(self) -> float:
        """beta(0+) - beta(0-)."""
        return float(self.transfer_current(0.0)) - self.beta_e_t

    def sample(self, dt: float = settings.DEFAULT_DT_EXPORT):
        """(t, beta_t) DataFrame over [-T_e, transfer_end]."""
        t = np.arange(-self.T_e, self.transfer_end + 0.5 * dt, dt)
        t = t[t <= self.transfer_end]
        return pd.DataFrame({"t": t, "beta_t": [self(ti) for ti in t]})


def synthesize_control(plan: TransferPlan, expl, p: DerivedParams, clock: float = 1.0,
                       T_e: Optional[float] = None) -> ControlWaveform:
    """
    Assemble the three-piece control.

    Args:
        plan: Transfer plan
        expl: Expulsion plan supplying beta_e and T_e
        p: Derived parameters
        clock: Time dilation of the transfer current
        T_e: Override of the expulsion duration (stress runs)

    Raises:
        PoleError: The planned path passes through w1 = w2 = 0
    """
    path = approx_transfer_solution(np.linspace(0.0, plan.T_tr, settings.EXPM_GRID), plan, p)
    if np.min(np.sum(path ** 2, axis=0)) < 1e-12:
        raise PoleError("planned transfer path reaches a pole", "CQ301")

    waveform = ControlWaveform(
        beta_e_t=expl.beta_e / p.lam,
        T_e=expl.T_e if T_e is None else T_e,
        T_tr=plan.T_tr,
        transfer=plan,
        params=p,
        clock=clock,
    )
    logger.info("control jump at t=0: %.6g", waveform.jump_at_zero)
    return waveform


def cql_drift(plan: TransferPlan, p: DerivedParams, rtol: float = settings.DEFAULT_RTOL,
              atol: float = settings.DEFAULT_ATOL) -> float:
    """max |u3 + K| on [0, T_tr] under the open-loop transfer current from (w0, -K)."""
    control = _open_loop(plan, p)
    trajectory = integrate(
        lambda t, u: scaled_rhs(u, control(t), p),
        np.array([plan.w0[0], plan.w0[1], -plan.K]), 0.0, plan.T_tr, rtol, atol,
        control=control, stage=settings.STAGE_TRANSFER,
    )
    return float(np.max(np.abs(trajectory.states[:, 2] + plan.K)))


def latitudinal_closure(plan: TransferPlan, p: DerivedParams, rtol: float = settings.DEFAULT_RTOL,
                        atol: float = settings.DEFAULT_ATOL) -> float:
    """max |v3 + K| on [0, T_tr] for the feedback latitudinal system."""
    trajectory = integrate(
        lambda t, v: latitudinal_rhs(v, p),
        np.array([plan.w0[0], plan.w0[1], -plan.K]), 0.0, plan.T_tr, rtol, atol,
        stage=settings.STAGE_TRANSFER,
    )
    return float(np.max(np.abs(trajectory.states[:, 2] + plan.K)))


def _open_loop(plan: TransferPlan, p: DerivedParams) -> Callable[[float], float]:
    def control(t: float) -> float:
        w = approx_transfer_solution(t, plan, p)
        return float(beta_lat(np.array([w[0], w[1], -plan.K]), p))
    return control


def inclusion_check(plan: TransferPlan, p: DerivedParams, rho_plus: float, n_points: int = 50,
                    rtol: float = settings.DEFAULT_RTOL, atol: float = settings.DEFAULT_ATOL) -> Dict:
    """
    Integrate starts on the circle of radius lam rho_minus around w0 under
    the open-loop current and measure the end distance to w^{[<=1]}(T_tr).

    Returns:
        dict with n_points, max_distance, bound = lam rho_plus and holds
    """
    rho_minus = plan.rho_tr_minus(rho_plus)
    control = _open_loop(plan, p)
    target = approx_transfer_solution(plan.T_tr, plan, p)
    distances = []
    for angle in np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False):
        w_start = plan.w0 + p.lam * rho_minus * np.array([np.cos(angle), np.sin(angle)])
        end = integrate(
            lambda t, u: scaled_rhs(u, control(t), p),
            np.array([w_start[0], w_start[1], -plan.K]), 0.0, plan.T_tr, rtol, atol,
        ).final_state
        distances.append(float(np.linalg.norm(end[:2] - target)))
    bound = p.lam * rho_plus
    max_distance = max(distances)
    logger.info("transfer inclusion: max distance %.4g vs bound %.4g", max_distance, bound)
    return {"n_points": n_points, "max_distance": max_distance, "bound": bound, "holds": max_distance <= bound}
