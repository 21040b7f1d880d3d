"""Deterministic direction sampling used by the constant estimators."""

import os

import numpy as np

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def default_seed():
    """Sampling seed, overridable through the FINSLER_SEED environment variable."""
    raw = os.environ.get("FINSLER_SEED")
    if raw is None or raw.strip() == "":
        return 0
    return int(raw)


def _random_rotation(dim, seed):
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def unit_directions(dim, count, seed=None):
    """Return ``count`` unit vectors (Euclidean) covering the sphere S^{dim-1}.

    dim 1 gives {+1, -1}; dim 2 equally spaced angles; dim 3 a Fibonacci
    sphere. Higher dimensions fall back to seeded Gaussian samples. A
    nonzero seed applies a seeded rotation to the low-dimensional layouts.
    """
    if seed is None:
        seed = default_seed()
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        theta = 2.0 * np.pi * np.arange(count) / count
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
    elif dim == 3:
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        rad = np.sqrt(1.0 - z * z)
        phi = GOLDEN_ANGLE * i
        dirs = np.column_stack([rad * np.cos(phi), rad * np.sin(phi), z])
    else:
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((count, dim))
        return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    if seed:
        dirs = dirs @ _random_rotation(dim, seed).T
    return dirs
