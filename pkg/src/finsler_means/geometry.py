"""Geodesics, connection coefficients and curvature diagnostics on a chart.

Geodesics solve x'' = -2 G(x, x') with a fixed-step classical Runge-Kutta
scheme. The inverse exponential map is found by Newton shooting with a
finite-difference Jacobian; all targets of one call are shot together so
that every Runge-Kutta step is a single vectorised spray evaluation.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from .errors import (
    DegenerateReferenceVectorError,
    DomainEscapeError,
    InvalidInputError,
    NumericalFailureError,
)
from .manifolds import ChartedManifold
from .sampling import unit_directions

DEFAULT_STEPS = 128
SHOOT_TOL = 1e-8
SHOOT_MAX_ITER = 50
SHOOT_FD_STEP = 1e-5
# shooting keeps iterating below SHOOT_TOL until progress stalls here
SHOOT_POLISH_TOL = 1e-13
CONNECTION_FD_STEP = 1e-4
SECOND_VARIATION_STEP = 1e-3


@dataclass(frozen=True)
class CurvatureBounds:
    """User-supplied curvature and anisotropy constants.

    k bounds the flag curvature from above, -beta^2 from below; the tangent
    curvature lies in [-delta, delta_prime] (in units of F(V) F(W)^2); C and
    D bound the norm-ratio constants; inj bounds the injectivity radius.
    ``beta = 0`` is read as the limit beta -> 0+.
    """

    k: float = 0.0
    beta: float = 0.0
    delta: float = 0.0
    delta_prime: float = 0.0
    C: float = 1.0
    D: float = 1.0
    inj: float = float("inf")

    def __post_init__(self):
        for name in ("k", "beta", "delta", "delta_prime"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0:
                raise InvalidInputError(f"{name} must be a finite number >= 0, got {val}")
        for name in ("C", "D"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 1:
                raise InvalidInputError(f"{name} must be >= 1, got {val}")
        if not self.inj > 0:
            raise InvalidInputError("inj must be > 0")


@dataclass(frozen=True)
class GeodesicSolution:
    x: np.ndarray
    v: np.ndarray
    steps: int
    step_size: float
    times: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    velocities: np.ndarray = field(repr=False)

    @property
    def endpoint(self):
        return self.points[-1]

    def speeds(self, manifold):
        return np.asarray(manifold.norm_value(self.points, self.velocities))

    def to_dict(self):
        return {
            "x": self.x.tolist(),
            "v": self.v.tolist(),
            "steps": self.steps,
            "step_size": self.step_size,
            "trajectory": [
                {"t": float(t), "point": p.tolist(), "velocity": w.tolist()}
                for t, p, w in zip(self.times, self.points, self.velocities)
            ],
        }


class SecondVariation(NamedTuple):
    dp_second: float
    lower: float
    upper: float
    consistent: bool


def _require_nonzero(y):
    if not np.any(y):
        raise DegenerateReferenceVectorError("reference vector must be nonzero")


# -- connection coefficients -------------------------------------------------

def geodesic_coefficients(manifold, x, y, method="auto"):
    """G(x, y); ``method="metric"`` forces the generic tensor-derivative formula."""
    x = manifold.check_point(x)
    y = np.asarray(y, dtype=float)
    _require_nonzero(y)
    if method == "metric":
        return ChartedManifold.spray_from_metric(manifold, x, y)
    return np.asarray(manifold.spray(x, y), dtype=float)


def nonlinear_connection(manifold, x, y):
    """N^i_j = dG^i / dy^j by central differences."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _require_nonzero(y)
    h = CONNECTION_FD_STEP * np.linalg.norm(y)
    E = np.eye(manifold.dim) * h
    cols = [(manifold.spray(x, y + e) - manifold.spray(x, y - e)) / (2.0 * h) for e in E]
    return np.column_stack(cols)


def chern_christoffel(manifold, x, y):
    """Chern connection symbols Gamma[k, i, j] at (x, y)."""
    x = manifold.check_point(x)
    y = np.asarray(y, dtype=float)
    _require_nonzero(y)
    g = manifold.metric_tensor(x, y)
    dg = manifold.metric_derivative(x, y)
    N = nonlinear_connection(manifold, x, y)
    C = manifold.norm_at(x).cartan(y)
    # horizontal derivatives: delta_i g_lj = d_i g_lj - N^k_i d g_lj / d y^k
    Dh = dg - 2.0 * np.einsum("ki,ljk->ilj", N, C)
    low = 0.5 * (np.einsum("ilj->lij", Dh) + np.einsum("jil->lij", Dh) - Dh)
    m = manifold.dim
    return np.linalg.solve(g, low.reshape(m, -1)).reshape((m, m, m))


# -- geodesic integration ------------------------------------------------------

def _integrate(manifold, X0, V0, t_end, steps, record=False):
    """RK4 for a batch of geodesics. Returns (X, V, escaped_at, trajectory)."""
    X = np.array(X0, dtype=float)
    V = np.array(V0, dtype=float)
    n = X.shape[0]
    h = t_end / steps
    escaped_at = np.full(n, np.nan)
    alive = np.ones(n, dtype=bool)
    traj = [(X.copy(), V.copy())] if record else None

    def accel(x, v):
        return -2.0 * manifold.spray(x, v)

    if manifold.is_flat:
        X = X + t_end * V
        if record:
            ts = np.linspace(0.0, t_end, steps + 1)
            traj = [(X0 + t * V0, V.copy()) for t in ts]
        out = ~np.asarray(manifold.contains(X))
        escaped_at[out] = t_end
        return X, V, escaped_at, traj

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for step in range(steps):
            X, V = _rk4_step(accel, X, V, h, step, manifold, alive, escaped_at)
            if record:
                traj.append((X.copy(), V.copy()))
    return X, V, escaped_at, traj


def _rk4_step(accel, X, V, h, step, manifold, alive, escaped_at):
    k1x, k1v = V, accel(X, V)
    x2, v2 = X + 0.5 * h * k1x, V + 0.5 * h * k1v
    k2x, k2v = v2, accel(x2, v2)
    x3, v3 = X + 0.5 * h * k2x, V + 0.5 * h * k2v
    k3x, k3v = v3, accel(x3, v3)
    x4, v4 = X + h * k3x, V + h * k3v
    k4x, k4v = v4, accel(x4, v4)
    Xn = X + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    Vn = V + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    ok = np.asarray(manifold.contains(Xn)) & np.all(np.isfinite(Vn), axis=-1)
    newly = alive & ~ok
    if np.any(newly):
        escaped_at[newly] = (step + 1) * h
        alive &= ok
    # escaped geodesics are frozen at their last valid state
    return np.where(alive[:, None], Xn, X), np.where(alive[:, None], Vn, V)


def geodesic_points(manifold, x, V, t=1.0, steps=DEFAULT_STEPS):
    """End points of the geodesics from ``x`` with velocities ``V`` at time t.

    Raises DomainEscapeError if any of them leaves the chart.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    X0 = np.broadcast_to(np.asarray(x, dtype=float), V.shape)
    X, _, esc, _ = _integrate(manifold, X0, V, t, steps)
    if np.any(np.isfinite(esc)):
        first = float(np.nanmin(esc))
        raise DomainEscapeError(f"geodesic left the chart domain at t={first:.6g}", exit_time=first)
    return X


def exp_map(manifold, x, v, steps=DEFAULT_STEPS):
    """Integrate the geodesic with c(0) = x, c'(0) = v over [0, 1]."""
    x = manifold.check_point(x)
    v = np.asarray(v, dtype=float)
    if v.shape != x.shape:
        raise InvalidInputError("velocity must have the same shape as the base point")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("velocity has non-finite components")
    steps = int(steps)
    if steps < 1:
        raise InvalidInputError("steps must be a positive integer")
    _, _, esc, traj = _integrate(manifold, x[None, :], v[None, :], 1.0, steps, record=True)
    if np.isfinite(esc[0]):
        raise DomainEscapeError(f"geodesic left the chart domain at t={esc[0]:.6g}",
                                exit_time=float(esc[0]))
    points = np.array([p[0] for p, _ in traj])
    vels = np.array([w[0] for _, w in traj])
    return GeodesicSolution(x=x.copy(), v=v.copy(), steps=steps, step_size=1.0 / steps,
                            times=np.linspace(0.0, 1.0, steps + 1), points=points,
                            velocities=vels)


def log_map_pairs(manifold, X, Y, tol=SHOOT_TOL, max_iter=SHOOT_MAX_ITER,
                  steps=DEFAULT_STEPS, fd_step=SHOOT_FD_STEP, init=None):
    """Initial velocities of the geodesics X[i] -> Y[i], shot together.

    Newton iteration on v -> exp_x(v) - y, started from the coordinate
    chord (or ``init``), with a forward-difference Jacobian integrated in
    the same batch as the trial geodesics.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    X, Y = np.broadcast_arrays(X, Y)
    X = X.copy()
    Y = Y.copy()
    if manifold.is_flat:
        return Y - X
    n, m = Y.shape
    v = Y - X if init is None else np.array(np.broadcast_to(init, Y.shape), dtype=float)
    eye = np.eye(m)

    def evaluate(idx, vel):
        k = idx.size
        hs = fd_step * np.maximum(1.0, np.linalg.norm(vel, axis=1))
        pert = np.repeat(vel, m, axis=0) + np.tile(eye, (k, 1)) * np.repeat(hs, m)[:, None]
        base = np.concatenate([X[idx], np.repeat(X[idx], m, axis=0)])
        P_all, _, esc, _ = _integrate(manifold, base, np.concatenate([vel, pert]), 1.0, steps)
        ok_all = ~np.isfinite(esc)
        P = P_all[:k]
        diff = (P_all[k:] - np.repeat(P, m, axis=0)) / np.repeat(hs, m)[:, None]
        J = np.transpose(diff.reshape(k, m, m), (0, 2, 1))
        ok = ok_all[:k] & ok_all[k:].reshape(k, m).all(axis=1)
        return P, J, ok

    everyone = np.arange(n)
    P, J, ok = evaluate(everyone, v)
    # shrink the initial guess until its geodesics stay in the chart
    for _ in range(60):
        if np.all(ok):
            break
        bad = np.flatnonzero(~ok)
        v[bad] *= 0.5
        P[bad], J[bad], ok[bad] = evaluate(bad, v[bad])
    if not np.all(ok):
        raise NumericalFailureError("no admissible initial velocity for shooting")
    r = P - Y
    res = np.max(np.abs(r), axis=1)
    scale = np.maximum(1.0, np.max(np.abs(Y), axis=1))
    active = res > SHOOT_POLISH_TOL * scale
    for _ in range(max_iter):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        delta = -np.einsum("aij,aj->ai", np.linalg.pinv(J[idx]), r[idx])
        lam = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        improved = np.zeros(idx.size, dtype=bool)
        for _ in range(30):
            if not np.any(pending):
                break
            j = np.flatnonzero(pending)
            tgt = idx[j]
            trial = v[tgt] + lam[j, None] * delta[j]
            Pt, Jt, okt = evaluate(tgt, trial)
            rt = Pt - Y[tgt]
            rest = np.max(np.abs(rt), axis=1)
            accept = okt & (rest < res[tgt])
            acc = tgt[accept]
            v[acc], P[acc], J[acc], r[acc], res[acc] = (trial[accept], Pt[accept], Jt[accept],
                                                        rt[accept], rest[accept])
            improved[j[accept]] = True
            pending[j[accept]] = False
            lam[j[~accept]] *= 0.5
        done = res[idx] <= SHOOT_POLISH_TOL * scale[idx]
        active[idx[done | ~improved]] = False
    if np.any(res > tol * scale):
        worst = float(np.max(res / scale))
        raise NumericalFailureError(f"geodesic shooting did not converge (residual {worst:.3e})",
                                    residual=worst)
    return v


def log_map(manifold, x, y, **kwargs):
    """Initial velocity of the geodesic from x reaching y at t = 1."""
    x = manifold.check_point(x)
    y = manifold.check_point(y)
    if np.array_equal(x, y):
        return np.zeros_like(x)
    return log_map_pairs(manifold, x[None, :], y[None, :], **kwargs)[0]


def log_map_many(manifold, x, Y, **kwargs):
    """log_map from one base point to each row of Y."""
    x = manifold.check_point(x)
    Y = manifold.check_point(np.atleast_2d(Y))
    return log_map_pairs(manifold, x[None, :], Y, **kwargs)


def distance(manifold, x, y, **kwargs):
    """Forward distance rho(x, y)."""
    v = log_map(manifold, x, y, **kwargs)
    return float(manifold.norm_value(np.asarray(x, dtype=float), v))


def distances_from(manifold, x, Y, **kwargs):
    """Forward distances rho(x, Y[i]) and the corresponding log vectors."""
    V = log_map_many(manifold, x, Y, **kwargs)
    return np.asarray(manifold.norm_value(np.asarray(x, dtype=float)[None, :], V)), V


def distances_to(manifold, X, z, **kwargs):
    """Forward distances rho(X[i], z)."""
    X = manifold.check_point(np.atleast_2d(X))
    z = manifold.check_point(z)
    V = log_map_pairs(manifold, X, z[None, :], **kwargs)
    return np.asarray(manifold.norm_value(X, V))


# -- curvature-type quantities ----------------------------------------------------

def tangent_curvature(manifold, x, V, W, extension_jacobian=None):
    """T_V(W) = <nabla^W_W W~ - nabla^V_W W~, V>_V.

    W~ extends W with constant coordinate components unless
    ``extension_jacobian`` (dW~/dx at x) is given.
    """
    x = manifold.check_point(x)
    V = np.asarray(V, dtype=float)
    W = np.asarray(W, dtype=float)
    _require_nonzero(V)
    _require_nonzero(W)
    B = np.zeros((manifold.dim, manifold.dim)) if extension_jacobian is None \
        else np.asarray(extension_jacobian, dtype=float)
    deriv = B @ W
    nabla_w = deriv + np.einsum("kij,i,j->k", chern_christoffel(manifold, x, W), W, W)
    nabla_v = deriv + np.einsum("kij,i,j->k", chern_christoffel(manifold, x, V), W, W)
    g = manifold.metric_tensor(x, V)
    return float((nabla_w - nabla_v) @ g @ V)


def _ratio_table(norm, dirs):
    F2 = norm(dirs) ** 2
    quad = np.array([np.einsum("vi,ij,vj->v", dirs, norm.tensor(w), dirs) for w in dirs])
    # quad[w, v] = <v, v>_w
    return F2[None, :] / quad


def _polish_ratio(norm, v0, w0, sign):
    m = norm.dim

    def objective(z):
        v, w = z[:m], z[m:]
        if not np.any(v) or not np.any(w):
            return 0.0
        q = v @ norm.tensor(w) @ v
        ratio = float(norm(v)) ** 2 / q
        return -(ratio if sign > 0 else 1.0 / ratio)

    res = minimize(objective, np.concatenate([v0, w0]), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    return -res.fun


def norm_ratio_constants(manifold, region, directions=64, polish=True):
    """(C, D): maxima over the region of the two norm-ratio constants.

    Each point uses ``directions`` sampled unit vectors, i.e. directions^2
    (v, w) pairs, followed by a local Nelder-Mead refinement of the best pair.
    """
    region = np.atleast_2d(np.asarray(region, dtype=float))
    if region.size == 0:
        raise InvalidInputError("region must contain at least one point")
    Cbest = Dbest = 1.0
    for x in region:
        norm = manifold.norm_at(manifold.check_point(x))
        dirs = unit_directions(manifold.dim, directions)
        table = _ratio_table(norm, dirs)
        iw, iv = np.unravel_index(np.argmax(table), table.shape)
        c2 = table[iw, iv]
        jw, jv = np.unravel_index(np.argmin(table), table.shape)
        d2 = 1.0 / table[jw, jv]
        if polish and manifold.dim > 1:
            c2 = max(c2, _polish_ratio(norm, dirs[iv], dirs[iw], +1))
            d2 = max(d2, _polish_ratio(norm, dirs[jv], dirs[jw], -1))
        Cbest = max(Cbest, float(np.sqrt(c2)))
        Dbest = max(Dbest, float(np.sqrt(d2)))
    return Cbest, Dbest


def geodesic_through(manifold, x, u, s, steps=8):
    """Point at parameter s (either sign) of the geodesic with velocity u at x."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if manifold.is_flat:
        return x + s * u
    return geodesic_points(manifold, x, u[None, :], t=s, steps=steps)[0]


def second_variation_diag(manifold, x, z, s_direction, p, bounds, step=SECOND_VARIATION_STEP,
                          tol_fraction=0.05):
    """Numeric second derivative of s -> rho^p(gamma(s), z) against the analytic bounds.

    gamma is the unit-speed geodesic through x with initial direction
    ``s_direction`` (rescaled to unit F). ``consistent`` is true when the
    numeric value lies in [lower - tol, upper + tol], with tol a fraction of
    the bound spread (never below 1e-6 of the bound magnitude).
    """
    from .bounds import hessian_lower_bound, hessian_upper_bound

    x = manifold.check_point(x)
    z = manifold.check_point(z)
    if not p > 1:
        raise InvalidInputError("p must be > 1")
    u = np.asarray(s_direction, dtype=float)
    _require_nonzero(u)
    u = u / float(manifold.norm_value(x, u))
    pts = np.array([geodesic_through(manifold, x, u, -step), x, geodesic_through(manifold, x, u, step)])
    rho = distances_to(manifold, pts, z)
    vals = rho ** p
    numeric = float((vals[0] - 2.0 * vals[1] + vals[2]) / step ** 2)
    r = float(rho[1])
    lower = hessian_lower_bound(p, r, bounds.k, bounds.delta, bounds.C)
    upper = hessian_upper_bound(p, r, bounds.beta, bounds.delta_prime, bounds.D)
    tol = max(tol_fraction * (upper - lower), 1e-6 * max(1.0, abs(upper), abs(lower)))
    ok = lower - tol <= numeric <= upper + tol
    return SecondVariation(numeric, lower, upper, bool(ok))
