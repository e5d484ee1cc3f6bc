"""High-temperature free energy of orthogonally invariant spin glasses.

Free-probability transforms of the coupling spectrum, the two-replica
variational problem, and exact/Monte Carlo finite-N checks.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CapExceededError,
    DimensionError,
    DomainError,
    NoTransitionError,
    NonContractionWarning,
    NonConvergenceError,
    OrthospinError,
)
from .spectral import (  # noqa: E402
    BetaWindow,
    SpectralMeasure,
    TransformProfile,
    beta_window,
    free_energy_limit,
    hilbert,
    k_transform,
    q_transform,
    r_transform,
    small_beta_series,
)
from .models import (  # noqa: E402
    CouplingSample,
    ModelSpec,
    RigidityReport,
    closed_form_limit,
    condition_c_margin,
    limiting_measure,
    rigidity_report,
    sample_coupling,
)
from .variational import (  # noqa: E402
    RateFunction,
    VariationalSolution,
    beta_zero,
    h_x,
    maximize_psi,
    psi,
    psi_gradient,
    psi_hessian,
    rate_function,
    solve_fixed_point,
    stationary_points,
)
from .montecarlo import (  # noqa: E402
    AnnealedEstimate,
    HaarSample,
    QuenchedEstimate,
    annealed_moments,
    concentration_scan,
    exact_log_partition,
    naive_log_partition,
    quenched_free_energy,
    sample_haar,
)
