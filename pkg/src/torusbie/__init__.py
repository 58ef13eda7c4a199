"""Fourier-Galerkin solver for the double-layer equation on torus-like surfaces.

Typical use::

    from torusbie import get_surface, assemble_banded, assemble_rhs, RhsSpec, solve_banded

    s = get_surface("bagel")
    m = assemble_banded(s, n=15, q=2.3)
    rho = solve_banded(m, assemble_rhs(s, RhsSpec("example1"), 15, m.quad))
"""

from .assembly import (
    BandedGalerkinMatrix,
    DenseGalerkinMatrix,
    QuadratureConfig,
    RhsSpec,
    assemble_banded,
    assemble_dense,
    assemble_rhs,
    band_index_count,
    band_width,
    gauss_identity_residual,
    normalize_orientation,
    truncate_dense,
)
from .errors import (
    AliasingError,
    ConvergenceError,
    MemoryBudgetError,
    SingularEvaluationError,
    SingularSystemError,
    SurfaceCatalogError,
    TorusBIEError,
    ValidationError,
)
from .experiment import ExperimentConfig, run_experiment
from .kernel import distance_sq, kernel_G, kernel_K, wrap_offset, zeta
from .linsolve import (
    SolverConfig,
    condition_number,
    matvec_banded,
    solve_banded,
    solve_dense,
    truncation_error_norms,
)
from .matrix_io import read_matrix, write_matrix
from .postprocess import (
    SolveReport,
    compression_ratio,
    convergence_order,
    decay_profile,
    diagonal_profiles,
    eval_potential,
    relative_error,
)
from .spectral import (
    CoeffGrid,
    eval_from_coeffs,
    forward_coeffs,
    l2_norm,
    make_index_set,
    project,
    read_coeffs_csv,
    sobolev_norm,
    write_coeffs_csv,
)
from .surface import (
    CATALOG_NAMES,
    SurfaceDescriptor,
    check_periodicity,
    estimate_injectivity_constant,
    eval_jacobian,
    eval_surface,
    get_surface,
    normal_vector,
    register_surface,
)

__version__ = "0.1.0"
