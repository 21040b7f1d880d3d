"""Forward p-means and medians on Finsler manifolds given in a single chart."""

from .bounds import (
    MeanProblemBounds,
    existence_ball,
    hessian_lower_bound,
    hessian_upper_bound,
    median_convexity_margin,
    step_constant_CH,
    step_majorant,
    step_majorant_measure,
    support_condition,
    uniqueness_radius,
)
from .errors import (
    DegenerateReferenceVectorError,
    DomainEscapeError,
    FinslerError,
    InconsistentBoundsError,
    InvalidInputError,
    NondifferentiablePointError,
    NumericalFailureError,
    OutOfComparisonRangeError,
    SingularMajorantError,
)
from .geometry import (
    CurvatureBounds,
    GeodesicSolution,
    chern_christoffel,
    distance,
    exp_map,
    geodesic_coefficients,
    log_map,
    norm_ratio_constants,
    second_variation_diag,
    tangent_curvature,
)
from .manifolds import (
    CustomManifold,
    FlatManifold,
    PoincareDisk,
    RandersField,
    RiemannianField,
    manifold_from_json,
)
from .measure import WeightedSampleMeasure
from .norms import (
    CustomNorm,
    EuclideanNorm,
    MinkowskiNorm,
    RandersNorm,
    cartan_term,
    dual_norm,
    fundamental_tensor,
    legendre,
    legendre_inverse,
    norm,
    norm_from_json,
    reverse_norm,
)
from .solvers import (
    SolverReport,
    atom_local_min_test,
    mean_gradient_descent,
    mean_gradient_flow,
    median_direction,
    median_flow,
    p_energy,
    p_energy_differential,
    p_energy_gradient,
)

__version__ = "0.1.0"
