"""Forward p-means and medians of weighted point sets.

Conventions: ``d`` denotes a differential (covector at x); the steepest
descent direction of an objective with differential d is L^{-1}(-d), which
for asymmetric norms differs from -L^{-1}(d). All per-atom quantities come
from one batched inverse-exponential evaluation, warm-started from the
previous iterate.
"""

from dataclasses import dataclass, field

import numpy as np

from .bounds import existence_ball, step_constant_CH
from .errors import (
    InconsistentBoundsError,
    InvalidInputError,
    NondifferentiablePointError,
    SingularMajorantError,
)
from .geometry import CurvatureBounds, distance, distances_from, geodesic_points, norm_ratio_constants
from .measure import WeightedSampleMeasure

GRAD_TOL = 1e-9
MAX_ITERS = 10_000
FLOW_DT = 1e-2
FLOW_HORIZON = 200.0
DESCENT_SLACK = 1e-12
MONOTONE_SLACK = 1e-10
ATOM_TOL = 1e-12

__all__ = [
    "SolverReport",
    "WeightedSampleMeasure",
    "atom_local_min_test",
    "mean_gradient_descent",
    "mean_gradient_flow",
    "median_direction",
    "median_flow",
    "p_energy",
    "p_energy_differential",
    "p_energy_gradient",
]


@dataclass(frozen=True)
class SolverReport:
    final_point: np.ndarray
    final_objective: float
    final_grad_dual_norm: float
    termination: str
    trace: list = field(repr=False)
    descent_checks: list = field(repr=False)
    flags: dict = field(default_factory=dict)
    algorithm: str = ""

    @property
    def iterations(self):
        return len(self.trace)

    @property
    def objective_trace(self):
        return np.array([row["objective"] for row in self.trace])

    def to_dict(self, include_trace=False):
        out = {
            "algorithm": self.algorithm,
            "final_point": [float(c) for c in self.final_point],
            "final_objective": float(self.final_objective),
            "final_grad_dual_norm": float(self.final_grad_dual_norm),
            "termination": self.termination,
            "iterations": self.iterations,
            "flags": self.flags,
            "descent_checks_passed": all(c.get("ok", True) for c in self.descent_checks),
        }
        if include_trace:
            out["trace"] = [
                {"point": [float(c) for c in row["point"]], "objective": float(row["objective"]),
                 "grad_dual_norm": float(row["grad_dual_norm"])}
                for row in self.trace
            ]
            out["descent_checks"] = self.descent_checks
        return out


def _check_measure(manifold, mu):
    if not isinstance(mu, WeightedSampleMeasure):
        raise InvalidInputError("mu must be a WeightedSampleMeasure")
    if mu.dim != manifold.dim:
        raise InvalidInputError("measure and manifold dimensions differ")
    manifold.check_point(mu.points, "atom")


class _Atoms:
    """Distances and log vectors from a moving point to every atom, warm-started."""

    def __init__(self, manifold, mu):
        self.manifold = manifold
        self.mu = mu
        self._last_x = None
        self._last_logs = None

    def at(self, x):
        init = None
        if self._last_logs is not None:
            init = self._last_logs + (self._last_x - x)
        rho, logs = distances_from(self.manifold, x, self.mu.points, init=init)
        if self.manifold.is_flat is False:
            self._last_x = np.array(x, dtype=float)
            self._last_logs = logs
        return rho, logs

    def energy(self, x, p):
        rho, _ = self.at(x)
        return float(self.mu.weights @ rho ** p)


def _energy_and_differential(manifold, mu, x, p, rho, logs):
    norm = manifold.norm_at(x)
    coef = np.zeros(len(rho))
    pos = rho > 0
    if p == 1 and not np.all(pos):
        raise NondifferentiablePointError(
            "rho(., z) is not differentiable at an atom; use the median path")
    coef[pos] = -p * mu.weights[pos] * rho[pos] ** (p - 2)
    d = coef @ norm.legendre(logs)
    return float(mu.weights @ rho ** p), d, norm


def p_energy(manifold, mu, x, p):
    """sum_i w_i rho(x, z_i)^p; p = 1 gives the median objective."""
    _check_measure(manifold, mu)
    x = manifold.check_point(x)
    if not p >= 1:
        raise InvalidInputError("p must be >= 1")
    rho, _ = distances_from(manifold, x, mu.points)
    return float(mu.weights @ rho ** p)


def p_energy_differential(manifold, mu, x, p):
    """Covector dE at x, assembled atom by atom from the first variation of rho."""
    _check_measure(manifold, mu)
    x = manifold.check_point(x)
    if not p >= 1:
        raise InvalidInputError("p must be >= 1")
    rho, logs = distances_from(manifold, x, mu.points)
    return _energy_and_differential(manifold, mu, x, p, rho, logs)[1]


def p_energy_gradient(manifold, mu, x, p):
    """grad E = L^{-1}(dE) at x."""
    d = p_energy_differential(manifold, mu, x, p)
    return manifold.norm_at(manifold.check_point(x)).legendre_inverse(d)


def _step(manifold, x, v):
    return geodesic_points(manifold, x, v[None, :])[0]


def _default_bounds(manifold, mu, x0):
    if not manifold.is_flat:
        raise InvalidInputError("curvature bounds are required on curved manifolds")
    C, D = norm_ratio_constants(manifold, np.asarray(x0, dtype=float)[None, :])
    return CurvatureBounds(C=C, D=D)


def mean_gradient_descent(manifold, mu, p, x0, bounds=None, max_iters=MAX_ITERS, tol=GRAD_TOL,
                          C_H=None, R=None, x0_ball=None, slack=DESCENT_SLACK):
    """Discrete gradient algorithm with step F(grad) / C_H along the geodesic.

    ``bounds`` are the curvature constants (derived automatically on flat
    manifolds). Unless given, the support radius R is the largest distance
    from ``x0_ball`` (default ``x0``) to an atom and C_H is the grid estimate
    over the ball of radius C (C + 1) R. Each iterate is checked against the
    guaranteed decrease F(grad)^2 / (2 C_H); a violation raises
    InconsistentBoundsError.
    """
    _check_measure(manifold, mu)
    x = manifold.check_point(x0).copy()
    if p < 2:
        raise SingularMajorantError(
            "the step majorant is unbounded for p < 2 on atomic measures; use mean_gradient_flow")
    if bounds is None:
        bounds = _default_bounds(manifold, mu, x)
    center = x.copy() if x0_ball is None else manifold.check_point(x0_ball)
    if R is None:
        rho_c, _ = distances_from(manifold, center, mu.points)
        R = max(float(rho_c.max()) * (1.0 + 1e-9), 1e-9)
    ball = existence_ball(bounds.C, R)
    if C_H is None:
        C_H = step_constant_CH(manifold, mu, p, bounds, center, ball)
    if not C_H > 0:
        raise InvalidInputError("C_H must be > 0")

    atoms = _Atoms(manifold, mu)
    trace, checks = [], []
    rho, logs = atoms.at(x)
    E, d, norm = _energy_and_differential(manifold, mu, x, p, rho, logs)
    flags = {"start_condition": bool(E <= R ** p), "contained": True, "C_H": float(C_H),
             "R": float(R), "ball_radius": float(ball)}
    termination = "max-iterations"
    for _ in range(max_iters):
        g = norm.legendre_inverse(-d)
        gnorm = float(norm(g))
        trace.append({"point": x.copy(), "objective": E, "grad_dual_norm": gnorm})
        if gnorm <= tol:
            termination = "gradient-tolerance"
            break
        x_new = _step(manifold, x, g / C_H)
        rho, logs = atoms.at(x_new)
        E_new, d, norm = _energy_and_differential(manifold, mu, x_new, p, rho, logs)
        guaranteed = gnorm ** 2 / (2.0 * C_H)
        excess = E_new - (E - guaranteed)
        checks.append({"objective": E_new, "bound": E - guaranteed, "excess": float(excess),
                       "ok": bool(excess <= slack)})
        if excess > slack:
            raise InconsistentBoundsError(
                f"descent inequality violated by {excess:.3e}; the curvature bounds are inconsistent",
                residual=float(excess))
        if manifold.is_flat or len(trace) % 10 == 0:
            if distance(manifold, center, x_new) > ball * (1.0 + 1e-9):
                flags["contained"] = False
        x, E = x_new, E_new
    else:
        g = norm.legendre_inverse(-d)
        gnorm = float(norm(g))
        trace.append({"point": x.copy(), "objective": E, "grad_dual_norm": gnorm})
    return SolverReport(final_point=x, final_objective=E, final_grad_dual_norm=gnorm,
                        termination=termination, trace=trace, descent_checks=checks,
                        flags=flags, algorithm="mean-descent")


def mean_gradient_flow(manifold, mu, p, x0, horizon=FLOW_HORIZON, dt=FLOW_DT, tol=GRAD_TOL):
    """Explicit geodesic Euler scheme for x' = grad(-E).

    A step that would raise the objective is halved until it does not. Each
    step records the ratio between the observed slope and -F*(dE)^2.
    """
    _check_measure(manifold, mu)
    if not p > 1:
        raise InvalidInputError("mean_gradient_flow needs p > 1; use median_flow for p = 1")
    if not (dt > 0 and horizon > 0):
        raise InvalidInputError("dt and horizon must be > 0")
    x = manifold.check_point(x0).copy()
    atoms = _Atoms(manifold, mu)
    rho, logs = atoms.at(x)
    E, d, norm = _energy_and_differential(manifold, mu, x, p, rho, logs)
    trace, checks = [], []
    t = 0.0
    termination = "flow-horizon"
    while True:
        g = norm.legendre_inverse(-d)
        gnorm = float(norm(g))
        trace.append({"point": x.copy(), "objective": E, "grad_dual_norm": gnorm})
        if gnorm <= tol:
            termination = "gradient-tolerance"
            break
        if t >= horizon - 1e-12:
            break
        h = min(dt, horizon - t)
        for _ in range(40):
            x_new = _step(manifold, x, h * g)
            rho, logs = atoms.at(x_new)
            E_new, d_new, norm_new = _energy_and_differential(manifold, mu, x_new, p, rho, logs)
            if E_new <= E + MONOTONE_SLACK:
                break
            h *= 0.5
        slope = (E_new - E) / h
        checks.append({"step": h, "slope": float(slope), "predicted": -gnorm ** 2,
                       "ok": bool(E_new <= E + MONOTONE_SLACK)})
        t += min(dt, horizon - t)
        x, E, d, norm = x_new, E_new, d_new, norm_new
    return SolverReport(final_point=x, final_objective=E, final_grad_dual_norm=gnorm,
                        termination=termination, trace=trace, descent_checks=checks,
                        flags={"time": t}, algorithm="mean-flow")


# -- medians -------------------------------------------------------------------------

def _median_state(manifold, mu, x, rho, logs):
    """(objective, d F_{mu_x}, norm, mu({x})) at x."""
    norm = manifold.norm_at(x)
    distinct = mu.without(x, ATOM_TOL) & (rho > 0)
    mass = float(mu.weights[~distinct].sum())
    coef = np.zeros(len(rho))
    coef[distinct] = -mu.weights[distinct] / rho[distinct]
    d = coef @ norm.legendre(logs)
    return float(mu.weights @ rho), d, norm, mass


def median_direction(manifold, mu, x):
    """H(x) = grad of F_{mu_x} at x, with the atom at x removed."""
    _check_measure(manifold, mu)
    x = manifold.check_point(x)
    rho, logs = distances_from(manifold, x, mu.points)
    _, d, norm, _ = _median_state(manifold, mu, x, rho, logs)
    return norm.legendre_inverse(d)


def atom_local_min_test(manifold, mu, x, tol=ATOM_TOL):
    """True iff mu({x}) >= F*(d F_{mu_x}) (ties count as minima)."""
    _check_measure(manifold, mu)
    x = manifold.check_point(x)
    rho, logs = distances_from(manifold, x, mu.points)
    _, d, norm, mass = _median_state(manifold, mu, x, rho, logs)
    return bool(mass >= norm.dual(d) - tol)


def median_flow(manifold, mu, x0, horizon=FLOW_HORIZON, dt=FLOW_DT, tol=GRAD_TOL):
    """Explicit geodesic Euler scheme for x' = -H(x), stopped by the atom criterion.

    When an atom lies within one step and is at least as good as the Euler
    candidate, the iterate lands on the atom, where the flow then either
    stops or leaves. Each smooth step records the observed slope next to the
    predicted right derivative -F*(F* - mu({x})).
    """
    _check_measure(manifold, mu)
    if not (dt > 0 and horizon > 0):
        raise InvalidInputError("dt and horizon must be > 0")
    x = manifold.check_point(x0).copy()
    atoms = _Atoms(manifold, mu)
    rho, logs = atoms.at(x)
    f, d, norm, mass = _median_state(manifold, mu, x, rho, logs)
    trace, checks = [], []
    t = 0.0
    termination = "flow-horizon"
    while True:
        H = norm.legendre_inverse(d)
        fstar = float(norm(H))
        trace.append({"point": x.copy(), "objective": f, "grad_dual_norm": fstar})
        if mass > 0 and mass >= fstar - ATOM_TOL:
            termination = "atom-criterion"
            break
        if fstar <= tol:
            termination = "gradient-tolerance"
            break
        if t >= horizon - 1e-12:
            break
        h = min(dt, horizon - t)
        for _ in range(40):
            step_len = h * float(norm(-H))
            x_new = _step(manifold, x, -h * H)
            rho_n, logs_n = atoms.at(x_new)
            f_new = float(mu.weights @ rho_n)
            snapped = False
            near = np.flatnonzero(mu.without(x, ATOM_TOL) & (rho <= step_len * (1.0 + 1e-9)))
            for i in near:
                z = mu.points[i]
                rho_z, logs_z = atoms.at(z)
                f_z = float(mu.weights @ rho_z)
                if f_z <= f_new:
                    x_new, rho_n, logs_n, f_new, snapped = z.copy(), rho_z, logs_z, f_z, True
            if f_new <= f + MONOTONE_SLACK:
                break
            h *= 0.5
        predicted = -fstar * (fstar - mass)
        slope = (f_new - f) / h
        smooth = (not snapped) and h * fstar ** 2 > 1e-8 * max(1.0, abs(f)) \
            and not np.any(rho <= 10.0 * step_len)
        checks.append({"step": h, "slope": float(slope), "predicted": float(predicted),
                       "smooth": bool(smooth), "snapped": snapped,
                       "ok": bool(f_new <= f + MONOTONE_SLACK)})
        t += min(dt, horizon - t)
        x = x_new
        rho, logs = rho_n, logs_n
        f, d, norm, mass = _median_state(manifold, mu, x, rho, logs)
    return SolverReport(final_point=x, final_objective=f, final_grad_dual_norm=fstar,
                        termination=termination, trace=trace, descent_checks=checks,
                        flags={"time": t, "atom_mass": mass}, algorithm="median-flow")
