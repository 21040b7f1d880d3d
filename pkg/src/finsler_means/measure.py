"""Finite weighted point sets."""

import numpy as np

from .errors import InvalidInputError

WEIGHT_SUM_TOL = 1e-12


class WeightedSampleMeasure:
    """Atoms ``points[i]`` with weights ``weights[i] > 0`` summing to one."""

    def __init__(self, points, weights=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InvalidInputError("points must be a non-empty (n, dim) array")
        if weights is None:
            w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise InvalidInputError("one weight per atom is required")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
            raise InvalidInputError("atoms and weights must be finite")
        if np.any(w <= 0):
            raise InvalidInputError("weights must be strictly positive")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidInputError(f"weights sum to {w.sum():.15g}, expected 1")
        self.points = pts
        self.weights = w
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    @classmethod
    def normalized(cls, points, weights):
        w = np.asarray(weights, dtype=float)
        return cls(points, w / w.sum())

    @classmethod
    def from_json(cls, obj):
        try:
            atoms = obj["atoms"]
            pts = [a["point"] for a in atoms]
            w = [a["weight"] for a in atoms]
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed measure: {exc}") from None
        return cls(pts, w)

    def to_json(self):
        return {"atoms": [{"point": p.tolist(), "weight": float(w)}
                          for p, w in zip(self.points, self.weights)]}

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def mass_at(self, x, atol=1e-12):
        """mu({x}): total weight of atoms whose coordinates coincide with x."""
        hit = np.all(np.abs(self.points - np.asarray(x, dtype=float)) <= atol, axis=1)
        return float(self.weights[hit].sum())

    def without(self, x, atol=1e-12):
        """Mask of atoms distinct from x (the support of mu_x)."""
        return ~np.all(np.abs(self.points - np.asarray(x, dtype=float)) <= atol, axis=1)
