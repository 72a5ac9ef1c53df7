"""Backstepping boundary feedback for the 1D reaction-diffusion equation.

Design and simulate finite-dimensional boundary feedback controllers for

    u_t - nu u_xx - alpha u + u^3 = 0  on (0, L),  u(0) = 0,  u(L) = g,

by transforming the plant into a modally damped target system through an
invertible Volterra-type transform.  The package tabulates the transform
kernel, builds the discrete forward and inverse transforms, checks the
admissibility of the (mu, N) pair, evaluates the feedback law, and time
steps the linear or cubic model with Crank-Nicolson.
"""

__version__ = "0.1.0"

from .errors import (
    RdstabError,
    InvalidParameterError,
    DimensionError,
    DomainError,
    ResolutionError,
    InfeasibleRateError,
    DegenerateSpectrumError,
    InadmissiblePairError,
    SolverError,
    ConvergenceError,
    NewtonDivergenceError,
    FitError,
)
from .grid import (
    Grid,
    Tridiagonal,
    make_grid,
    trapezoid_weights,
    trapezoid,
    inner_product,
    l2_norm,
    h1_norm,
    laplacian_matrix,
)
from .kernel import (
    Kernel,
    kernel_series,
    truncate_order,
    kernel_table,
    kernel_pde_residual,
)
from .spectral import (
    ModalBasis,
    ProjectionMatrix,
    eigenvalue,
    modal_basis,
    projection_matrix,
)
from .transform import (
    TransformSet,
    OperatorNorms,
    ScanRow,
    upsilon_matrix,
    phi_matrix,
    phi_apply_recursive,
    build_transform,
    forward_transform,
    inverse_transform,
    scan_admissibility,
    sign_change_brackets,
    operator_norms,
)
from .controller import (
    DesignReport,
    gamma_rate,
    rho_rate,
    min_modes_rapid,
    instability_level,
    minimal_mode_setup,
    smallness_threshold,
    c1_constant,
    bernoulli_envelope,
    feedback_control,
    feedback_gain,
    design_fixed,
    design_rapid,
    design_minimal,
)
from .simulator import (
    SimulationConfig,
    Trajectory,
    initial_state,
    assemble_A,
    step_linear,
    step_nonlinear,
    run_simulation,
    run_target_consistency,
)
from .cli import (
    DecayFit,
    fit_decay_rate,
    run_experiment,
    export,
    main,
)

__all__ = [
    "__version__",
    "RdstabError",
    "InvalidParameterError",
    "DimensionError",
    "DomainError",
    "ResolutionError",
    "InfeasibleRateError",
    "DegenerateSpectrumError",
    "InadmissiblePairError",
    "SolverError",
    "ConvergenceError",
    "NewtonDivergenceError",
    "FitError",
    "Grid",
    "Tridiagonal",
    "make_grid",
    "trapezoid_weights",
    "trapezoid",
    "inner_product",
    "l2_norm",
    "h1_norm",
    "laplacian_matrix",
    "Kernel",
    "kernel_series",
    "truncate_order",
    "kernel_table",
    "kernel_pde_residual",
    "ModalBasis",
    "ProjectionMatrix",
    "eigenvalue",
    "modal_basis",
    "projection_matrix",
    "TransformSet",
    "OperatorNorms",
    "ScanRow",
    "upsilon_matrix",
    "phi_matrix",
    "phi_apply_recursive",
    "build_transform",
    "forward_transform",
    "inverse_transform",
    "scan_admissibility",
    "sign_change_brackets",
    "operator_norms",
    "DesignReport",
    "gamma_rate",
    "rho_rate",
    "min_modes_rapid",
    "instability_level",
    "minimal_mode_setup",
    "smallness_threshold",
    "c1_constant",
    "bernoulli_envelope",
    "feedback_control",
    "feedback_gain",
    "design_fixed",
    "design_rapid",
    "design_minimal",
    "SimulationConfig",
    "Trajectory",
    "initial_state",
    "assemble_A",
    "step_linear",
    "step_nonlinear",
    "run_simulation",
    "run_target_consistency",
    "DecayFit",
    "fit_decay_rate",
    "run_experiment",
    "export",
    "main",
]
