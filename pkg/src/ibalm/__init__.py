"""Edge-guided Retinex low-light enhancement via inertial Bregman
alternating linearized minimization, with descent and subgradient
diagnostics certifying every run."""

__version__ = "0.1.0"

from .bregman import (
    DescentViolationError,
    IterateState,
    IterateTrace,
    KernelSpec,
    ProblemSpec,
    SolverParams,
    SubproblemError,
    ama_solve,
    compute_delta,
    compute_tau,
    descent_check,
    extrapolate,
    ibalm_solve,
    ibalm_step,
    lemma2_gamma,
    subgradient_residual,
    tau_upper_bounds,
    theta_value,
)
from .grid import (
    classical_edge,
    divergence,
    gradient,
    laplacian_eigenvalues,
    laplacian_spectral_bound,
    neg_laplacian,
    tv_norm,
)
from .imgio import FormatError, load_edge_map, load_image, save_edge_map, save_image
from .metrics import MetricReport, compare, histogram, psnr, ssim
from .retinex import (
    LogDomainState,
    RetinexConfig,
    build_metric,
    build_problem,
    compose_output,
    default_solver_params,
    energy,
    enhance,
    enhance_color,
    l_subproblem_solve,
    merge_color,
    metric_kernel,
    r_update,
    shrink_isotropic,
    split_color,
    to_log_domain,
)

__all__ = [name for name in dir() if not name.startswith("_")]
