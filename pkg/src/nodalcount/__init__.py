"""nodalcount: Monte Carlo toolkit for counting prescribed-topology
components of random algebraic hypersurfaces and Gaussian-field zero sets."""

__version__ = "0.1.0"

from .backend import USING_NUMBA, backend_name
from .ensemble import (
    ConditioningError,
    EnsembleSpec,
    HomogeneousPolynomial,
    WhiteningFactor,
    covariance_exact,
    covariance_from_factor,
    evaluate,
    gram_matrix,
    multi_indices,
    sample_polynomial_tuple,
    sphere_moment,
    whitening,
    whitening_for,
)
from .field import (
    GridSpec,
    SpectralFieldSample,
    child_streams,
    sample_field_exact_grid,
    sample_field_spectral,
    sample_field_tuple,
)
from .kernel import (
    ChartAtPoint,
    LimitKernelSpec,
    RescalingCalibration,
    calibrate_rescaling,
    chart_at,
    convergence_report,
    equatorial_chart,
    limit_kernel,
    limit_kernel_quadrature,
    rescaled_kernel,
)
from .topology import (
    ComponentReport,
    CubeSphereGrid,
    DegeneracyError,
    TopologySignature,
    antipodal_quotient,
    circle,
    count_N_sigma,
    extract_components_codim_r,
    extract_components_hypersurface,
    extract_components_sphere,
    signature_from_name,
    sphere_surface,
    torus_surface,
)
from .experiments import (
    BarrierEstimate,
    DegeneracyBudgetError,
    ExperimentManifest,
    PackingResult,
    barrier_probability,
    expected_count_scaling,
    kac_rice_zero_count,
    lower_bound_assembly,
    mc_zero_count,
    pack_balls,
    replay_manifest,
    wilson_interval,
)
from .rkhs import KernelTranslate, Mollifier, fit_in_span, mollifier_approximant
