"""
Vector Fields for cql-switch

Full Landau-Lifshitz-Slonczewski field, the reduced and scaled systems,
the latitudinal control and its first/second order fields, free energy.

Every field accepts a state of shape (3,) or (3, N) and works
componentwise, so sampled bounds can evaluate whole point clouds at once.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from cql_switch.exceptions import PoleError
from cql_switch.params import DerivedParams

logger = logging.getLogger(__name__)

E3 = np.array([0.0, 0.0, 1.0])


def lls_rhs(m, h_a, alpha: float, beta: float, e_p, p: DerivedParams) -> np.ndarray:
    """
    Full LLS field -m x h_eff - alpha m x (m x h_eff) + beta m x (m x e_p).

    h_eff = -D1 m1 e1 - D2 m2 e2 - D3 m3 e3 + h_a. Tangent to the sphere
    (m . rhs = 0) whenever |m| = 1.
    """
    m = np.asarray(m, dtype=float)
    h_eff = effective_field(m, h_a, p)
    m_x_h = np.cross(m, h_eff)
    m_x_p = np.cross(m, np.asarray(e_p, dtype=float))
    return -m_x_h - alpha * np.cross(m, m_x_h) + beta * np.cross(m, m_x_p)


def effective_field(m, h_a, p: DerivedParams) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return np.array([-p.D1 * m[0], -p.D2 * m[1], -p.D3 * m[2]]) + np.asarray(h_a, dtype=float)


def reduced_rhs(u, beta: float, p: DerivedParams) -> np.ndarray:
    """
    LLS field with h_a = (0, h2, 0), e_p = e3, rewritten on the unit sphere.

    Psi = |u|^2 is conserved exactly for every u, not only on the sphere.
    """
    u1, u2, u3 = np.asarray(u, dtype=float)
    D21, D31, D32, h2, alpha = p.D21, p.D31, p.D32, p.h2, p.alpha
    return np.array([
        D32 * u2 * u3 + h2 * u3
        + alpha * u1 * (D21 * u2 ** 2 + D31 * u3 ** 2 - h2 * u2)
        + beta * u1 * u3,
        -D31 * u1 * u3
        + alpha * (h2 * (u1 ** 2 + u3 ** 2) - D21 * u1 ** 2 * u2 + D32 * u2 * u3 ** 2)
        + beta * u2 * u3,
        -h2 * u1 + D21 * u1 * u2
        - alpha * u3 * (D31 * u1 ** 2 + D32 * u2 ** 2 + h2 * u2)
        - beta * (u1 ** 2 + u2 ** 2),
    ])


def scaled_rhs(u, beta_t: float, p: DerivedParams) -> np.ndarray:
    """
    Reduced field regrouped in powers of lambda.

    Substitutes h2 = lam h2_t, alpha = lam alpha_t, D21 = lam D21_t and
    beta = lam beta_t. At lam = 0 it collapses to A(u3) u = (D32 u2 u3, -D31 u1 u3, 0).
    """
    u1, u2, u3 = np.asarray(u, dtype=float)
    lam, a_t, h_t, d_t = p.lam, p.alpha_t, p.h2_t, p.D21_t
    D31, D32 = p.D31, p.D32
    return np.array([
        D32 * u2 * u3
        + lam * (h_t * u3 + u1 * u3 * beta_t + a_t * D31 * u1 * u3 ** 2)
        + a_t * lam ** 2 * u1 * u2 * (d_t * u2 - h_t),
        -D31 * u1 * u3
        + lam * u2 * u3 * (beta_t + a_t * D32 * u3)
        + a_t * lam ** 2 * (h_t * (u1 ** 2 + u3 ** 2) - d_t * u1 ** 2 * u2),
        lam * (
            -h_t * u1 + d_t * u1 * u2 - (u1 ** 2 + u2 ** 2) * beta_t
            - a_t * u3 * (D32 * u2 ** 2 + D31 * u1 ** 2)
        )
        - a_t * h_t * lam ** 2 * u2 * u3,
    ])


def scaled_jacobian(u, beta_t: float, p: DerivedParams) -> np.ndarray:
    """Exact Jacobian of scaled_rhs in u at constant beta_t; shape (3, 3) or (3, 3, N)."""
    u1, u2, u3 = np.asarray(u, dtype=float)
    lam, a_t, h_t, d_t = p.lam, p.alpha_t, p.h2_t, p.D21_t
    D31, D32 = p.D31, p.D32
    lam2 = lam ** 2
    return np.array([
        [
            lam * (u3 * beta_t + a_t * D31 * u3 ** 2) + a_t * lam2 * u2 * (d_t * u2 - h_t),
            D32 * u3 + a_t * lam2 * u1 * (2.0 * d_t * u2 - h_t),
            D32 * u2 + lam * (h_t + u1 * beta_t + 2.0 * a_t * D31 * u1 * u3),
        ],
        [
            -D31 * u3 + 2.0 * a_t * lam2 * u1 * (h_t - d_t * u2),
            lam * u3 * (beta_t + a_t * D32 * u3) - a_t * lam2 * d_t * u1 ** 2,
            -D31 * u1 + lam * u2 * (beta_t + 2.0 * a_t * D32 * u3) + 2.0 * a_t * lam2 * h_t * u3,
        ],
        [
            lam * (-h_t + d_t * u2 - 2.0 * u1 * beta_t - 2.0 * a_t * D31 * u1 * u3),
            lam * (d_t * u1 - 2.0 * u2 * beta_t - 2.0 * a_t * D32 * u2 * u3) - a_t * h_t * lam2 * u3,
            -lam * a_t * (D32 * u2 ** 2 + D31 * u1 ** 2) - a_t * h_t * lam2 * u2,
        ],
    ])


def linear_part(u, p: DerivedParams) -> np.ndarray:
    """Zeroth-order field A(u3) u."""
    u1, u2, u3 = np.asarray(u, dtype=float)
    return np.array([p.D32 * u2 * u3, -p.D31 * u1 * u3, np.zeros_like(u1)])


def _latitude_K(p: DerivedParams, K: Optional[float]) -> float:
    return p.K if K is None else K


def _control_parts(v, p: DerivedParams, K: float) -> Tuple[np.ndarray, np.ndarray]:
    """beta_lat split as b0 + lam * b1 with b0, b1 free of lambda."""
    v1, v2, _ = np.asarray(v, dtype=float)
    n = v1 ** 2 + v2 ** 2
    if np.any(n == 0.0):
        raise PoleError("beta_lat is undefined at v1 = v2 = 0", "CQ301", {"v": np.asarray(v).tolist()})
    b0 = (v1 * v2 * p.D21_t + p.alpha_t * K * (p.D32 * v2 ** 2 + p.D31 * v1 ** 2) - p.h2_t * v1) / n
    b1 = p.alpha_t * p.h2_t * v2 * K / n
    return b0, b1


def beta_lat(v, p: DerivedParams, K: Optional[float] = None):
    """
    Scaled current that cancels the third component of the scaled field
    at u3 = -K.

    Raises:
        PoleError: v1 = v2 = 0
    """
    b0, b1 = _control_parts(v, p, _latitude_K(p, K))
    return b0 + p.lam * b1


def latitudinal_rhs(v, p: DerivedParams, K: Optional[float] = None) -> np.ndarray:
    """scaled_rhs under the feedback current beta_lat(v); third component vanishes at v3 = -K."""
    return scaled_rhs(v, beta_lat(v, p, K), p)


def fr_fields(u, v, p: DerivedParams, K: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    First and second order fields F(u; v), R(u; v).

    scaled_rhs(u, beta_lat(v)) - A(u3) u == lam F(u; v) + lam^2 R(u; v)
    holds identically.
    """
    K = _latitude_K(p, K)
    u1, u2, u3 = np.asarray(u, dtype=float)
    b0, b1 = _control_parts(v, p, K)
    a_t, h_t, d_t, D31, D32 = p.alpha_t, p.h2_t, p.D21_t, p.D31, p.D32

    F = np.array([
        u1 * u3 * b0 + u3 * h_t + a_t * D31 * u1 * u3 ** 2,
        u2 * u3 * b0 + a_t * D32 * u2 * u3 ** 2,
        -(u1 ** 2 + u2 ** 2) * b0 - u1 * h_t
        - a_t * u3 * (D32 * u2 ** 2 + D31 * u1 ** 2) + u1 * u2 * d_t,
    ])
    R = np.array([
        u1 * u3 * b1 + a_t * (u1 * u2 ** 2 * d_t - u1 * u2 * h_t),
        u2 * u3 * b1 + a_t * (u3 ** 2 * h_t + u1 ** 2 * h_t - u1 ** 2 * u2 * d_t),
        -(u1 ** 2 + u2 ** 2) * b1 - a_t * h_t * u2 * u3,
    ])
    return F, R


def fr_jacobian(u, v, p: DerivedParams, K: Optional[float] = None) -> np.ndarray:
    """D_u F(u; v); shape (3, 3) or (3, 3, N)."""
    K = _latitude_K(p, K)
    u1, u2, u3 = np.asarray(u, dtype=float)
    b0, _ = _control_parts(v, p, K)
    a_t, h_t, d_t, D31, D32 = p.alpha_t, p.h2_t, p.D21_t, p.D31, p.D32
    zero = np.zeros_like(u1)
    return np.array([
        [u3 * b0 + a_t * D31 * u3 ** 2, zero, u1 * b0 + h_t + 2.0 * a_t * D31 * u1 * u3],
        [zero, u3 * b0 + a_t * D32 * u3 ** 2, u2 * b0 + 2.0 * a_t * D32 * u2 * u3],
        [
            -2.0 * u1 * b0 - h_t - 2.0 * a_t * D31 * u1 * u3 + u2 * d_t,
            -2.0 * u2 * b0 - 2.0 * a_t * D32 * u2 * u3 + u1 * d_t,
            -a_t * (D32 * u2 ** 2 + D31 * u1 ** 2),
        ],
    ])


def latitude_fr_fields(v, p: DerivedParams, K: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Closed forms of F(v; v), R(v; v) on the latitude v3 = -K, v1^2 + v2^2 = 1/rho.

    Individually these differ from fr_fields(v, v) by lam * X and -X with
    X = alpha_t rho K^2 D21_t (v1 v2^2, -v1^2 v2, 0) because D31 - D32 = lam D21_t;
    only lam F + lam^2 R agrees.
    """
    K = _latitude_K(p, K)
    v1, v2, _ = np.asarray(v, dtype=float)
    rho = 1.0 / (1.0 - K ** 2)
    h_t, d_t, a_t = p.h2_t, p.D21_t, p.alpha_t
    zero = np.zeros_like(v1)

    F = np.array([
        -rho * K * v2 * (h_t * v2 + d_t * v1 ** 2),
        rho * K * v1 * (h_t * v2 - d_t * v2 ** 2),
        zero,
    ])
    R = np.array([
        rho * a_t * v1 * v2 * (
            K ** 2 * d_t * v2 + v1 ** 2 * (v2 * d_t - h_t) - h_t * (K ** 2 + v2 ** 2) + d_t * v2 ** 3
        ),
        rho * a_t * v1 ** 2 * (
            -K ** 2 * d_t * v2 - v1 ** 2 * (v2 * d_t - h_t) + h_t * (K ** 2 + v2 ** 2) - d_t * v2 ** 3
        ),
        zero,
    ])
    return F, R


def free_energy(m, h_a, p: DerivedParams) -> float:
    """g_L = 1/2 (D1 m1^2 + D2 m2^2 + D3 m3^2) - h_a . m"""
    m = np.asarray(m, dtype=float)
    return 0.5 * (p.D1 * m[0] ** 2 + p.D2 * m[1] ** 2 + p.D3 * m[2] ** 2) - np.dot(np.asarray(h_a, dtype=float), m)


def applied_field(p: DerivedParams) -> np.ndarray:
    return np.array([0.0, p.h2, 0.0])


def psi(u) -> float:
    """Squared distance from the origin; 1 on the sphere."""
    u = np.asarray(u, dtype=float)
    return np.sum(u ** 2, axis=0)


def stereographic(u) -> np.ndarray:
    """Projection from the north pole: (u1, u2) / (1 + u3)."""
    u1, u2, u3 = np.asarray(u, dtype=float)
    return np.array([u1, u2]) / (1.0 + u3)
