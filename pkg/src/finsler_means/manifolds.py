"""Single-chart Finsler manifolds.

A manifold maps a base point to a MinkowskiNorm and knows its geodesic
spray G(x, y). Bundled models have closed-form sprays that broadcast over
leading batch dimensions; custom models go through the generic path that
builds G from finite differences of the fundamental tensor.
"""

import numpy as np

from .errors import InvalidInputError
from .norms import EuclideanNorm, RandersNorm, norm_from_json

METRIC_FD_STEP = 1e-4


class ChartedManifold:
    """Base class; subclasses provide ``norm_at`` and optionally a closed-form spray."""

    is_flat = False
    is_riemannian = False

    def __init__(self, dim):
        self.dim = int(dim)

    # -- chart ------------------------------------------------------------
    def contains(self, x):
        """Boolean (array) telling whether points lie in the chart domain."""
        x = np.asarray(x, dtype=float)
        return np.all(np.isfinite(x), axis=-1)

    def check_point(self, x, what="point"):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        if x.shape[-1] != self.dim:
            raise InvalidInputError(f"{what} has {x.shape[-1]} coordinates, expected {self.dim}")
        if not np.all(self.contains(x)):
            raise InvalidInputError(f"{what} {x.tolist()} is outside the chart domain")
        return x

    # -- norm field ---------------------------------------------------------
    def norm_at(self, x):
        raise NotImplementedError

    def norm_value(self, x, y):
        """F(x, y) broadcasting over leading dimensions of x and y."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        xb = np.broadcast_to(x, shape).reshape(-1, self.dim)
        yb = np.broadcast_to(y, shape).reshape(-1, self.dim)
        out = np.array([self.norm_at(a)(b) for a, b in zip(xb, yb)])
        return out.reshape(shape[:-1])

    def metric_tensor(self, x, y):
        return self.norm_at(x).tensor(y)

    def metric_derivative(self, x, y):
        """Array d[l, j, k] = d g_jk(x, y) / d x^l at fixed reference vector y."""
        x = np.asarray(x, dtype=float)
        h = METRIC_FD_STEP * max(1.0, np.linalg.norm(x))
        out = np.empty((self.dim, self.dim, self.dim))
        for l in range(self.dim):
            e = np.zeros(self.dim)
            e[l] = h
            out[l] = (self.metric_tensor(x + e, y) - self.metric_tensor(x - e, y)) / (2.0 * h)
        return out

    # -- spray --------------------------------------------------------------
    def spray_from_metric(self, x, y):
        """G^i = 1/4 g^{ik} (2 dg_jk/dx^l - dg_jl/dx^k) y^j y^l at one (x, y)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not np.any(y):
            return np.zeros(self.dim)
        g = self.metric_tensor(x, y)
        dg = self.metric_derivative(x, y)
        term = 2.0 * np.einsum("ljk,j,l->k", dg, y, y) - np.einsum("kjl,j,l->k", dg, y, y)
        return 0.25 * np.linalg.solve(g, term)

    def spray(self, x, y):
        """Geodesic coefficients G(x, y), broadcasting over leading dimensions."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim == 1 and y.ndim == 1:
            return self.spray_from_metric(x, y)
        shape = np.broadcast_shapes(x.shape, y.shape)
        xb = np.broadcast_to(x, shape).reshape(-1, self.dim)
        yb = np.broadcast_to(y, shape).reshape(-1, self.dim)
        out = np.array([self.spray_from_metric(a, b) for a, b in zip(xb, yb)])
        return out.reshape(shape)

    def reversed(self):
        return ReversedManifold(self)

    def to_json(self):
        raise InvalidInputError(f"{type(self).__name__} has no JSON form")


class FlatManifold(ChartedManifold):
    """R^m with one constant Minkowski norm; geodesics are straight lines."""

    is_flat = True

    def __init__(self, norm):
        super().__init__(norm.dim)
        self.norm = norm
        self.is_riemannian = isinstance(norm, EuclideanNorm)

    def norm_at(self, x):
        return self.norm

    def norm_value(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)[:-1]
        return np.broadcast_to(self.norm(y), shape).copy()

    def metric_derivative(self, x, y):
        return np.zeros((self.dim,) * 3)

    def spray(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.zeros(np.broadcast_shapes(x.shape, y.shape))

    def reversed(self):
        return FlatManifold(self.norm.reversed())

    def to_json(self):
        return {"kind": "flat", "norm": self.norm.to_json()}


class RiemannianField(ChartedManifold):
    """Riemannian metric A(x) viewed as a Finsler norm F(x, y) = sqrt(y^T A(x) y).

    ``metric`` maps a point to a matrix; ``metric_grad`` (optional) maps a
    point to the array d[l, j, k] = dA_jk / dx^l.
    """

    is_riemannian = True

    def __init__(self, metric, dim, metric_grad=None, domain=None):
        super().__init__(dim)
        self.metric = metric
        self._metric_grad = metric_grad
        self._domain = domain

    def contains(self, x):
        ok = super().contains(x)
        if self._domain is not None:
            ok = ok & np.asarray(self._domain(np.asarray(x, dtype=float)), dtype=bool)
        return ok

    def norm_at(self, x):
        return EuclideanNorm(self.metric(np.asarray(x, dtype=float)))

    def metric_tensor(self, x, y):
        return np.asarray(self.metric(np.asarray(x, dtype=float)), dtype=float)

    def metric_derivative(self, x, y=None):
        if self._metric_grad is not None:
            return np.asarray(self._metric_grad(np.asarray(x, dtype=float)), dtype=float)
        return super().metric_derivative(x, y)

    def christoffel(self, x):
        """Levi-Civita symbols Gamma^k_ij of A at x."""
        A = self.metric_tensor(x, None)
        dA = self.metric_derivative(x)
        # lowered symbols Gamma_{l ij} = 1/2 (d_i A_lj + d_j A_il - d_l A_ij)
        low = 0.5 * (np.einsum("ilj->lij", dA) + np.einsum("jil->lij", dA) - dA)
        return np.linalg.solve(A, low.reshape(self.dim, -1)).reshape((self.dim,) * 3)

    def spray_from_metric(self, x, y):
        return 0.5 * np.einsum("kij,i,j->k", self.christoffel(x), y, y)


class PoincareDisk(RiemannianField):
    """Unit ball with the conformal metric (2 / (1 - |x|^2))^2 I (curvature -1)."""

    def __init__(self, dim=2):
        super().__init__(self._metric, dim, metric_grad=self._metric_grad)

    @staticmethod
    def conformal_factor(x):
        x = np.asarray(x, dtype=float)
        return 2.0 / (1.0 - np.sum(x * x, axis=-1))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all(np.isfinite(x), axis=-1) & (np.sum(x * x, axis=-1) < 1.0)

    def _metric(self, x):
        return self.conformal_factor(x) ** 2 * np.eye(self.dim)

    def _metric_grad(self, x):
        lam = self.conformal_factor(x)
        # d(lam^2)/dx^l = 2 lam * lam^2 x_l
        dl2 = 2.0 * lam ** 3 * x
        return np.einsum("l,jk->ljk", dl2, np.eye(self.dim))

    def norm_value(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.conformal_factor(x) * np.linalg.norm(y, axis=-1)

    def log_factor_gradient(self, x):
        """Gradient of log(lam) in coordinates."""
        x = np.asarray(x, dtype=float)
        return x * self.conformal_factor(x)[..., None]

    def spray(self, x, y):
        return self._spray_and_speed(x, y)[0]

    def _spray_and_speed(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        lam = 2.0 / (1.0 - np.einsum("...i,...i->...", x, x))
        a = lam[..., None] * x
        ay = np.einsum("...i,...i->...", a, y)[..., None]
        yy = np.einsum("...i,...i->...", y, y)
        G = ay * y - (0.5 * yy)[..., None] * a
        return G, lam * np.sqrt(yy)

    def to_json(self):
        return {"kind": "riemannian", "metric": "poincare-disk"}


class RandersField(ChartedManifold):
    """F(x, y) = sqrt(y^T A(x) y) + b.y with a constant covector b.

    The Riemannian part is either a constant matrix (flat Minkowski space)
    or a RiemannianField. A constant-coefficient b is closed, which gives
    the closed-form spray G = G_A - (b.G_A / F) y.
    """

    def __init__(self, base, drift):
        if isinstance(base, RiemannianField):
            self.base = base
            dim = base.dim
            self.constant_metric = None
        else:
            A = np.atleast_2d(np.asarray(base, dtype=float))
            self.base = None
            self.constant_metric = A
            dim = A.shape[0]
        super().__init__(dim)
        self.drift = np.atleast_1d(np.asarray(drift, dtype=float))
        if self.drift.shape != (dim,):
            raise InvalidInputError("drift must have one entry per dimension")
        self.is_flat = self.base is None
        self._flat_norm = RandersNorm(self.constant_metric, self.drift) if self.is_flat else None

    def contains(self, x):
        if self.base is not None:
            return self.base.contains(x)
        return super().contains(x)

    def norm_at(self, x):
        if self.is_flat:
            return self._flat_norm
        return RandersNorm(self.base.metric_tensor(x, None), self.drift)

    def norm_value(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.is_flat:
            return self._flat_norm(y)
        if isinstance(self.base, PoincareDisk):
            return self.base.norm_value(x, y) + y @ self.drift
        return super().norm_value(x, y)

    def metric_derivative(self, x, y):
        if self.is_flat:
            return np.zeros((self.dim,) * 3)
        return super().metric_derivative(x, y)

    def spray(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.is_flat:
            return np.zeros(np.broadcast_shapes(x.shape, y.shape))
        if isinstance(self.base, PoincareDisk):
            Ga, alpha = self.base._spray_and_speed(x, y)
            F = alpha + y @ self.drift
        else:
            Ga = self.base.spray(x, y)
            F = np.asarray(self.norm_value(x, y))
        safe = np.where(F > 0, F, 1.0)
        coef = np.where(F > 0, (Ga @ self.drift) / safe, 0.0)
        return Ga - coef[..., None] * y

    def reversed(self):
        if self.is_flat:
            return RandersField(self.constant_metric, -self.drift)
        return RandersField(self.base, -self.drift)

    def to_json(self):
        metric = self.constant_metric.tolist() if self.is_flat else self.base.to_json()["metric"]
        return {"kind": "randers-field", "metric": metric, "drift_field": "constant",
                "drift": self.drift.tolist()}


class CustomManifold(ChartedManifold):
    """Manifold defined by a callable ``norm_field(x) -> MinkowskiNorm``."""

    def __init__(self, norm_field, dim, domain=None):
        super().__init__(dim)
        self.norm_field = norm_field
        self._domain = domain

    def contains(self, x):
        ok = super().contains(x)
        if self._domain is not None:
            ok = ok & np.asarray(self._domain(np.asarray(x, dtype=float)), dtype=bool)
        return ok

    def norm_at(self, x):
        return self.norm_field(np.asarray(x, dtype=float))


class ReversedManifold(ChartedManifold):
    """Manifold carrying the reverse structure F(x, -y) of another one."""

    def __init__(self, base):
        super().__init__(base.dim)
        self.base = base
        self.is_flat = base.is_flat
        self.is_riemannian = base.is_riemannian

    def contains(self, x):
        return self.base.contains(x)

    def norm_at(self, x):
        return self.base.norm_at(x).reversed()

    def norm_value(self, x, y):
        return self.base.norm_value(x, -np.asarray(y, dtype=float))

    def spray(self, x, y):
        # reversed geodesics of F are the geodesics of the reverse structure
        return self.base.spray(x, -np.asarray(y, dtype=float))

    def reversed(self):
        return self.base


def _poincare_like(name):
    if name == "poincare-disk":
        return PoincareDisk(2)
    if name == "poincare-ball-3":
        return PoincareDisk(3)
    raise InvalidInputError(f"unknown named metric {name!r}")


def manifold_from_json(obj):
    """Build a manifold from its JSON description.

    Supported forms::

        {"kind": "flat", "norm": {...}}
        {"kind": "riemannian", "metric": "poincare-disk"}
        {"kind": "randers-field", "metric": [[...]] | "poincare-disk",
         "drift_field": "constant", "drift": [...]}
    """
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InvalidInputError("manifold spec must be an object with a 'kind' field")
    kind = obj["kind"]
    try:
        if kind == "flat":
            return FlatManifold(norm_from_json(obj["norm"]))
        if kind == "riemannian":
            metric = obj["metric"]
            if isinstance(metric, str):
                return _poincare_like(metric)
            return FlatManifold(EuclideanNorm(metric))
        if kind == "randers-field":
            if obj.get("drift_field", "constant") != "constant":
                raise InvalidInputError("only drift_field 'constant' is supported")
            metric = obj["metric"]
            base = _poincare_like(metric) if isinstance(metric, str) else metric
            manifold = RandersField(base, obj["drift"])
            if manifold.is_flat:
                # validates the strong-convexity condition up front
                RandersNorm(manifold.constant_metric, manifold.drift)
            return manifold
    except KeyError as exc:
        raise InvalidInputError(f"manifold spec of kind {kind!r} is missing field {exc}") from None
    raise InvalidInputError(f"unknown manifold kind {kind!r}")
