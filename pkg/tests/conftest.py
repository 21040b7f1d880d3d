import numpy as np
import pytest

from finsler_means import (
    EuclideanNorm,
    FlatManifold,
    PoincareDisk,
    RandersField,
    RandersNorm,
)

RANDERS_METRIC = np.array([[1.2, 0.3], [0.3, 0.8]])
RANDERS_DRIFT = np.array([0.3, -0.2])


def bundled_norms():
    return {
        "euclidean-2": EuclideanNorm(np.array([[2.0, 0.5], [0.5, 1.0]])),
        "randers-1": RandersNorm(np.eye(1), [0.5]),
        "randers-2": RandersNorm(RANDERS_METRIC, RANDERS_DRIFT),
        "randers-3": RandersNorm(np.diag([1.0, 2.0, 0.5]), [0.2, 0.4, -0.1]),
    }


def bundled_manifolds():
    return {
        "flat-euclidean": FlatManifold(EuclideanNorm(np.eye(2))),
        "flat-randers": FlatManifold(RandersNorm(RANDERS_METRIC, RANDERS_DRIFT)),
        "poincare": PoincareDisk(2),
        "randers-poincare": RandersField(PoincareDisk(2), [0.4, 0.25]),
    }


@pytest.fixture(params=sorted(bundled_norms()))
def any_norm(request):
    return bundled_norms()[request.param]


@pytest.fixture(params=sorted(bundled_manifolds()))
def any_manifold(request):
    return bundled_manifolds()[request.param]


def random_points(rng, manifold, n, scale=0.5):
    """Points well inside the chart domain."""
    pts = rng.uniform(-scale, scale, size=(n, manifold.dim))
    if not manifold.is_flat:
        pts *= 0.9
    return pts


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
