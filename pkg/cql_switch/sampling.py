"""
Deterministic low-discrepancy point sets used by the sampled bounds.
"""

import numpy as np
from scipy.stats import qmc


def ball_points(radius: float, log2: int, dim: int = 3) -> np.ndarray:
    """
    Sobol points of the closed ball of given radius, shape (dim, N).

    The unscrambled cube sequence is mapped to [-1, 1]^dim and cut to the
    unit ball, so the origin is always included; unit-sphere points are
    appended to cover the boundary where polynomial maxima sit.
    """
    cube = qmc.Sobol(d=dim, scramble=False).random_base2(m=log2)
    pts = 2.0 * cube - 1.0
    inside = pts[np.sum(pts ** 2, axis=1) <= 1.0]
    boundary = sphere_points(max(log2 - 2, 4), dim)
    return radius * np.concatenate([inside, boundary.T]).T


def sphere_points(log2: int, dim: int = 3) -> np.ndarray:
    """Points of the unit sphere in R^dim from normalized Sobol cube points, shape (dim, N)."""
    cube = qmc.Sobol(d=dim, scramble=False).random_base2(m=log2)
    pts = 2.0 * cube - 1.0
    norms = np.linalg.norm(pts, axis=1)
    pts = pts[norms > 1e-3] / norms[norms > 1e-3, None]
    return pts.T


def polydisc_points(n: int, seed: int = 0) -> np.ndarray:
    """n complex pairs (x1, x2) with |x1|, |x2| <= 1, shape (n, 2)."""
    rng = np.random.default_rng(seed)
    radii = np.sqrt(rng.random((n, 2)))
    angles = 2.0 * np.pi * rng.random((n, 2))
    return radii * np.exp(1j * angles)
