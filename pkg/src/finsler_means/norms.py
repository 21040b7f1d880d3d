"""Minkowski norms on a single tangent space.

A norm object evaluates F, the fundamental tensor g_V, the Cartan term,
the Legendre transform and its inverse, and the dual norm F*. Vectors and
covectors are plain numpy arrays in the chart frame (resp. its dual frame);
the base point is implied by whichever tangent space the norm belongs to.

Closed forms are used for Euclidean and Randers norms. Custom norms only
need a callable for F; every derivative then falls back to central
differences of F^2.
"""

import numpy as np

from .errors import DegenerateReferenceVectorError, InvalidInputError, NumericalFailureError

# finite-difference steps, relative to |V|
SECOND_ORDER_STEP = 1e-4
THIRD_ORDER_STEP = 1e-3
FIRST_ORDER_STEP = 1e-5

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50


def _as_vector(v, dim, what="vector"):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] != dim:
        raise InvalidInputError(f"{what} has {arr.shape[-1]} components, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} has non-finite components")
    return arr


def _check_reference(V):
    if not np.any(V):
        raise DegenerateReferenceVectorError("reference vector must be nonzero")


class MinkowskiNorm:
    """Base class. Subclasses implement ``__call__``; the rest has generic fallbacks."""

    kind = "custom"

    def __init__(self, dim):
        self.dim = int(dim)
        if self.dim < 1:
            raise InvalidInputError("dimension must be a positive integer")

    def __call__(self, v):
        raise NotImplementedError

    def _f2(self, v):
        return self(v) ** 2

    def tensor(self, V):
        """Matrix of g_V, from the mixed second difference of F^2."""
        V = _as_vector(V, self.dim)
        _check_reference(V)
        h = SECOND_ORDER_STEP * np.linalg.norm(V)
        m = self.dim
        E = np.eye(m) * h
        g = np.empty((m, m))
        for i in range(m):
            for j in range(i, m):
                d = (self._f2(V + E[i] + E[j]) - self._f2(V + E[i] - E[j])
                     - self._f2(V - E[i] + E[j]) + self._f2(V - E[i] - E[j]))
                g[i, j] = g[j, i] = d / (8.0 * h * h)
        return g

    def cartan(self, V):
        """Totally symmetric array C_ijk with <X,Y,Z>_V = C_ijk X^i Y^j Z^k."""
        V = _as_vector(V, self.dim)
        _check_reference(V)
        h = THIRD_ORDER_STEP * np.linalg.norm(V)
        m = self.dim
        E = np.eye(m) * h
        C = np.empty((m, m, m))
        signs = [(a, b, c) for a in (1, -1) for b in (1, -1) for c in (1, -1)]
        for i in range(m):
            for j in range(i, m):
                for k in range(j, m):
                    total = 0.0
                    for a, b, c in signs:
                        total += a * b * c * self._f2(V + a * E[i] + b * E[j] + c * E[k])
                    val = total / (8.0 * h ** 3) / 4.0
                    for idx in {(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}:
                        C[idx] = val
        return C

    def legendre(self, v):
        """Covector g_v(v, .), i.e. the gradient of F^2 / 2; zero at v = 0."""
        v = _as_vector(v, self.dim)
        if v.ndim > 1:
            return np.array([self.legendre(row) for row in v.reshape(-1, self.dim)]).reshape(v.shape)
        if not np.any(v):
            return np.zeros(self.dim)
        h = FIRST_ORDER_STEP * np.linalg.norm(v)
        E = np.eye(self.dim) * h
        return np.array([(self._f2(v + e) - self._f2(v - e)) / (4.0 * h) for e in E])

    def legendre_inverse(self, xi, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
        """Vector v with legendre(v) = xi, by damped Newton iteration."""
        xi = _as_vector(xi, self.dim, "covector")
        if xi.ndim > 1:
            return np.array([self.legendre_inverse(row, tol, max_iter)
                             for row in xi.reshape(-1, self.dim)]).reshape(xi.shape)
        scale = np.linalg.norm(xi)
        if scale == 0.0:
            return np.zeros(self.dim)
        # the Legendre map is 1-homogeneous, so solve for a unit covector
        target = xi / scale
        w = np.zeros(self.dim)
        w[0] = 1.0
        v = np.linalg.solve(self.tensor(w), target)

        def residual(u):
            r = self.legendre(u) - target
            g = self.tensor(u)
            return r, np.sqrt(abs(r @ np.linalg.solve(g, r))), g

        r, res, g = residual(v)
        best = res
        for _ in range(max_iter):
            # a few extra Newton steps past tol cost little and remove roundoff drift
            if res <= tol * 1e-4:
                break
            step = np.linalg.solve(g, r)
            lam = 1.0
            while lam > 1e-8:
                trial = v - lam * step
                if np.any(trial):
                    r_t, res_t, g_t = residual(trial)
                    if res_t < res:
                        break
                lam *= 0.5
            else:
                break
            v, r, res, g = trial, r_t, res_t, g_t
            best = min(best, res)
        if res > tol:
            # derivative noise of finite-difference norms can stall just above tol
            if res > 1e-8:
                raise NumericalFailureError(
                    f"Legendre inversion did not converge (residual {res:.3e})", residual=res)
        return v * scale

    def dual(self, xi):
        """F*(xi), computed as F(L^{-1}(xi))."""
        return float(self(self.legendre_inverse(xi)))

    def reversed(self):
        return ReversedNorm(self)

    def to_json(self):
        raise InvalidInputError(f"{type(self).__name__} has no JSON form")


class EuclideanNorm(MinkowskiNorm):
    """F(v) = sqrt(v^T A v) for a symmetric positive definite A."""

    kind = "euclidean"

    def __init__(self, metric):
        A = np.atleast_2d(np.asarray(metric, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise InvalidInputError("metric must be a square matrix")
        super().__init__(A.shape[0])
        if not np.all(np.isfinite(A)) or not np.allclose(A, A.T, rtol=0, atol=1e-12):
            raise InvalidInputError("metric must be finite and symmetric")
        if np.linalg.eigvalsh(A)[0] <= 0:
            raise InvalidInputError("metric must be positive definite")
        self.metric = A

    def __call__(self, v):
        v = _as_vector(v, self.dim)
        q = np.einsum("...i,ij,...j->...", v, self.metric, v)
        return np.sqrt(np.maximum(q, 0.0))

    def tensor(self, V):
        V = _as_vector(V, self.dim)
        _check_reference(V)
        return self.metric.copy()

    def cartan(self, V):
        V = _as_vector(V, self.dim)
        _check_reference(V)
        return np.zeros((self.dim,) * 3)

    def legendre(self, v):
        v = _as_vector(v, self.dim)
        return v @ self.metric

    def legendre_inverse(self, xi, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
        xi = _as_vector(xi, self.dim, "covector")
        return np.linalg.solve(self.metric, xi.T).T

    def dual(self, xi):
        xi = _as_vector(xi, self.dim, "covector")
        return float(np.sqrt(xi @ np.linalg.solve(self.metric, xi)))

    def reversed(self):
        return self

    def to_json(self):
        return {"kind": "euclidean", "metric": self.metric.tolist()}


class RandersNorm(MinkowskiNorm):
    """F(v) = sqrt(v^T A v) + b.v with ||b||_A < 1."""

    kind = "randers"

    def __init__(self, metric, drift):
        A = np.atleast_2d(np.asarray(metric, dtype=float))
        b = np.atleast_1d(np.asarray(drift, dtype=float))
        if A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise InvalidInputError("metric must be square and drift must match its size")
        super().__init__(A.shape[0])
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InvalidInputError("metric and drift must be finite")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12) or np.linalg.eigvalsh(A)[0] <= 0:
            raise InvalidInputError("metric must be symmetric positive definite")
        bnorm = np.sqrt(b @ np.linalg.solve(A, b))
        if bnorm >= 1.0:
            raise InvalidInputError(f"drift norm {bnorm:.6g} must be < 1 for strong convexity")
        self.metric = A
        self.drift = b
        self.drift_norm = float(bnorm)

    def __call__(self, v):
        v = _as_vector(v, self.dim)
        q = np.einsum("...i,ij,...j->...", v, self.metric, v)
        return np.sqrt(np.maximum(q, 0.0)) + v @ self.drift

    def _parts(self, V):
        u = self.metric @ V
        alpha = np.sqrt(V @ u)
        F = alpha + self.drift @ V
        grad = u / alpha + self.drift
        hessF = self.metric / alpha - np.outer(u, u) / alpha ** 3
        return u, alpha, F, grad, hessF

    def tensor(self, V):
        V = _as_vector(V, self.dim)
        _check_reference(V)
        _, _, F, grad, hessF = self._parts(V)
        return F * hessF + np.outer(grad, grad)

    def cartan(self, V):
        V = _as_vector(V, self.dim)
        _check_reference(V)
        A = self.metric
        u, alpha, F, grad, hessF = self._parts(V)
        # derivative of Hess F along e_k
        dh = (-np.einsum("ij,k->ijk", A, u)
              - np.einsum("ik,j->ijk", A, u)
              - np.einsum("i,jk->ijk", u, A)) / alpha ** 3
        dh += 3.0 * np.einsum("i,j,k->ijk", u, u, u) / alpha ** 5
        dg = (np.einsum("k,ij->ijk", grad, hessF) + F * dh
              + np.einsum("ik,j->ijk", hessF, grad) + np.einsum("i,jk->ijk", grad, hessF))
        return 0.5 * dg

    def legendre(self, v):
        v = _as_vector(v, self.dim)
        u = v @ self.metric
        alpha = np.sqrt(np.maximum(np.einsum("...i,...i->...", u, v), 0.0))
        F = alpha + v @ self.drift
        safe = np.where(alpha > 0, alpha, 1.0)
        out = F[..., None] * (u / safe[..., None] + self.drift)
        return np.where((alpha > 0)[..., None], out, 0.0)

    def reversed(self):
        return RandersNorm(self.metric, -self.drift)

    def to_json(self):
        return {"kind": "randers", "metric": self.metric.tolist(), "drift": self.drift.tolist()}


class CustomNorm(MinkowskiNorm):
    """Norm given by a callable ``func(v) -> F(v)`` on single vectors.

    Optional ``tensor`` and ``legendre`` callables replace the
    finite-difference fallbacks.
    """

    def __init__(self, func, dim, tensor=None, legendre=None):
        super().__init__(dim)
        self.func = func
        self._tensor = tensor
        self._legendre = legendre

    def __call__(self, v):
        v = _as_vector(v, self.dim)
        if v.ndim == 1:
            return float(self.func(v))
        flat = v.reshape(-1, self.dim)
        return np.array([float(self.func(row)) for row in flat]).reshape(v.shape[:-1])

    def tensor(self, V):
        if self._tensor is None:
            return super().tensor(V)
        V = _as_vector(V, self.dim)
        _check_reference(V)
        return np.asarray(self._tensor(V), dtype=float)

    def legendre(self, v):
        if self._legendre is None:
            return super().legendre(v)
        v = _as_vector(v, self.dim)
        if not np.any(v):
            return np.zeros(self.dim)
        return np.asarray(self._legendre(v), dtype=float)


class ReversedNorm(MinkowskiNorm):
    """v -> F(-v) for an arbitrary norm F."""

    def __init__(self, base):
        super().__init__(base.dim)
        self.base = base
        self.kind = base.kind

    def __call__(self, v):
        return self.base(-np.asarray(v, dtype=float))

    def tensor(self, V):
        return self.base.tensor(-np.asarray(V, dtype=float))

    def cartan(self, V):
        return -self.base.cartan(-np.asarray(V, dtype=float))

    def legendre(self, v):
        return -self.base.legendre(-np.asarray(v, dtype=float))

    def legendre_inverse(self, xi, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
        return -self.base.legendre_inverse(-np.asarray(xi, dtype=float), tol, max_iter)

    def reversed(self):
        return self.base


def norm_from_json(obj):
    """Build a norm from ``{"kind": "euclidean"|"randers", "metric": ..., "drift": ...}``."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InvalidInputError("norm spec must be an object with a 'kind' field")
    kind = obj["kind"]
    try:
        if kind == "euclidean":
            return EuclideanNorm(obj["metric"])
        if kind == "randers":
            return RandersNorm(obj["metric"], obj["drift"])
    except KeyError as exc:
        raise InvalidInputError(f"norm spec of kind {kind!r} is missing field {exc}") from None
    raise InvalidInputError(f"unknown norm kind {kind!r}")


# Functional surface -------------------------------------------------------

def norm(spec, v):
    return spec(_as_vector(v, spec.dim))


def fundamental_tensor(spec, V, X, Y):
    """g_V(X, Y)."""
    X = _as_vector(X, spec.dim)
    Y = _as_vector(Y, spec.dim)
    return float(X @ spec.tensor(V) @ Y)


def cartan_term(spec, V, X, Y, Z):
    """<X, Y, Z>_V."""
    C = spec.cartan(V)
    return float(np.einsum("ijk,i,j,k->", C, _as_vector(X, spec.dim),
                           _as_vector(Y, spec.dim), _as_vector(Z, spec.dim)))


def legendre(spec, v):
    return spec.legendre(_as_vector(v, spec.dim))


def legendre_inverse(spec, xi):
    return spec.legendre_inverse(_as_vector(xi, spec.dim, "covector"))


def dual_norm(spec, xi):
    return spec.dual(_as_vector(xi, spec.dim, "covector"))


def reverse_norm(spec):
    return spec.reversed()
