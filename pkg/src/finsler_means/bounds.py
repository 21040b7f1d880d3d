"""Closed-form radii and Hessian bounds, plus the estimators built on them.

Every formula is extended continuously to the degenerate constants
k = 0, delta = 0 and beta = 0 through x cot x -> 1, arctan(inf) = pi/2
and x coth x -> 1.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, OutOfComparisonRangeError, SingularMajorantError
from .geometry import CurvatureBounds, distances_from
from .sampling import unit_directions

CH_GRID_POINTS = 9
CH_SAFETY = 1.25
ETA_DIRECTIONS = 512


@dataclass(frozen=True)
class MeanProblemBounds:
    """Constants of a p-mean problem whose support lies in B(x0, R)."""

    p: float
    bounds: CurvatureBounds
    R: float
    x0: np.ndarray

    def __post_init__(self):
        if not self.p >= 1:
            raise InvalidInputError("p must be >= 1")
        if not self.R > 0:
            raise InvalidInputError("R must be > 0")


def _x_cot_x(x):
    return 1.0 if x == 0 else x * np.cos(x) / np.sin(x)


def _x_coth_x(x):
    return 1.0 if x == 0 else x / np.tanh(x)


def uniqueness_radius(p, k, delta, C, limits=True):
    """Radius below which rho^p(., z) is strictly convex.

    min((p - 1) / (C^2 delta), arctan(sqrt(k) / (C^2 delta)) / sqrt(k));
    for p >= 2 only the arctan term can be active and it is returned as is.
    With ``limits=False`` the degenerate values k = 0 or delta = 0 are rejected.
    """
    if not p > 1:
        raise InvalidInputError("p must be > 1")
    if k < 0 or delta < 0 or not C >= 1:
        raise InvalidInputError("need k >= 0, delta >= 0 and C >= 1")
    if not limits and (k <= 0 or delta <= 0):
        raise InvalidInputError("k and delta must be > 0 when limits are disabled")
    c2d = C * C * delta
    if k == 0:
        curvature_term = np.inf if c2d == 0 else 1.0 / c2d
    elif c2d == 0:
        curvature_term = np.pi / (2.0 * np.sqrt(k))
    else:
        curvature_term = np.arctan(np.sqrt(k) / c2d) / np.sqrt(k)
    if p >= 2:
        return float(curvature_term)
    convexity_term = np.inf if c2d == 0 else (p - 1.0) / c2d
    return float(min(convexity_term, curvature_term))


def hessian_lower_bound(p, r, k, delta, C):
    """Lower bound on the second derivative of rho^p along a unit geodesic."""
    if not r > 0:
        raise InvalidInputError("r must be > 0")
    sk = np.sqrt(k) * r
    if sk >= np.pi:
        raise OutOfComparisonRangeError(f"sqrt(k) r = {sk:.6g} must stay below pi")
    return float(p * r ** (p - 2) * (min(p - 1.0, _x_cot_x(sk)) / C ** 2 - delta * r))


def hessian_upper_bound(p, r, beta, delta_prime, D):
    """Upper bound on the second derivative of rho^p along a unit geodesic.

    As a function of r this is also the step majorant H(r).
    """
    if not r > 0:
        raise InvalidInputError("r must be > 0")
    if beta < 0 or delta_prime < 0 or not D >= 1:
        raise InvalidInputError("need beta >= 0, delta_prime >= 0 and D >= 1")
    return float(p * r ** (p - 2) * (D ** 2 * max(p - 1.0, _x_coth_x(beta * r)) + delta_prime * r))


step_majorant = hessian_upper_bound


def existence_ball(C, R):
    """Radius C (1 + C) R of the forward ball holding a global minimiser."""
    if not C >= 1 or not R > 0:
        raise InvalidInputError("need C >= 1 and R > 0")
    return C * (1.0 + C) * R


def support_condition(R, p, k, delta, C):
    """R <= R(p, k, delta, C) / (C (C + 1)^2)."""
    return bool(R <= uniqueness_radius(p, k, delta, C) / (C * (C + 1.0) ** 2))


def step_majorant_measure(manifold, mu, x, p, beta, delta_prime, D):
    """Weighted sum of H(rho(x, z_i)) over the atoms of mu."""
    rho, _ = distances_from(manifold, x, mu.points)
    return _majorant_from_distances(rho, mu.weights, p, beta, delta_prime, D)


def _majorant_from_distances(rho, weights, p, beta, delta_prime, D):
    total = 0.0
    for r, w in zip(rho, weights):
        if r <= 0:
            if p < 2:
                raise SingularMajorantError("H(r) is unbounded at r = 0 for p < 2")
            # r -> 0 limit of H for p >= 2
            total += w * (2.0 * D ** 2 if p == 2 else 0.0)
            continue
        total += w * hessian_upper_bound(p, r, beta, delta_prime, D)
    return float(total)


def ball_grid(manifold, center, radius, per_axis=CH_GRID_POINTS):
    """Coordinate grid points lying in the closed forward ball B(center, radius).

    Along axis i the tangent unit ball reaches from -F*(-e^i) to F*(e^i);
    the grid box uses these extents, padded on curved charts where they only
    hold to first order.
    """
    center = manifold.check_point(center)
    if not radius > 0:
        raise InvalidInputError("region radius must be > 0")
    m = manifold.dim
    norm = manifold.norm_at(center)
    pad = 1.0 if manifold.is_flat else 1.25
    axes = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        axes.append(np.linspace(-pad * radius * norm.dual(-e), pad * radius * norm.dual(e), per_axis))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    pts = center + mesh
    pts = pts[np.asarray(manifold.contains(pts), dtype=bool)]
    rho, _ = distances_from(manifold, center, pts)
    keep = rho <= radius * (1.0 + 1e-12)
    return pts[keep]


def step_constant_CH(manifold, mu, p, bounds, region_center, region_radius,
                     per_axis=CH_GRID_POINTS, safety=CH_SAFETY):
    """Grid estimate of sup H_mu over the closed ball, times a safety factor."""
    if p < 2:
        rho_c, _ = distances_from(manifold, region_center, mu.points)
        if np.any(rho_c <= region_radius):
            raise SingularMajorantError(
                "for p < 2 the majorant is unbounded on a region containing an atom")
    grid = ball_grid(manifold, region_center, region_radius, per_axis)
    best = 0.0
    for x in grid:
        best = max(best, step_majorant_measure(manifold, mu, x, p, bounds.beta,
                                               bounds.delta_prime, bounds.D))
    return safety * best


def median_convexity_margin(manifold, mu, region, k, delta, directions=ETA_DIRECTIONS):
    """eta - delta, where eta lower-bounds the normal curvature of the median objective.

    eta is the minimum over region points x and unit vectors v of
    sum_z w_z sqrt(k) cot(sqrt(k) rho(x, z)) <v_N, v_N>_{xz}, v_N being the
    part of v normal to the log vector xz. Atoms located at x are skipped.
    """
    if k < 0 or delta < 0:
        raise InvalidInputError("need k >= 0 and delta >= 0")
    region = np.atleast_2d(np.asarray(region, dtype=float))
    m = manifold.dim
    base_dirs = unit_directions(m, directions)
    eta = np.inf
    sk = np.sqrt(k)
    for x in region:
        x = manifold.check_point(x)
        norm = manifold.norm_at(x)
        V = base_dirs / norm(base_dirs)[:, None]
        rho, logs = distances_from(manifold, x, mu.points)
        integrand = np.zeros(len(V))
        for r, T, w in zip(rho, logs, mu.weights):
            if r <= 0:
                continue
            if sk * r >= np.pi:
                raise OutOfComparisonRangeError(f"sqrt(k) rho = {sk * r:.6g} must stay below pi")
            factor = 1.0 / r if k == 0 else sk / np.tan(sk * r)
            g = norm.tensor(T)
            tangential = (V @ g @ T) / (r * r)
            VN = V - tangential[:, None] * T[None, :]
            integrand += w * factor * np.einsum("vi,ij,vj->v", VN, g, VN)
        eta = min(eta, float(np.min(integrand)))
    return float(eta - delta)


def injectivity_conditions(bounds, p, R):
    """The two injectivity-radius requirements, reported side by side."""
    C = bounds.C
    out = {"inj_exceeds_R_unique": None,
           "inj_exceeds_C2_plus_C_plus_1": bool(bounds.inj > C * C + C + 1.0),
           "inj_exceeds_C2_plus_C_plus_1_times_R": bool(bounds.inj > (C * C + C + 1.0) * R)}
    if p > 1:
        out["inj_exceeds_R_unique"] = bool(bounds.inj > uniqueness_radius(p, bounds.k, bounds.delta, C))
    return out
