"""Joint drift/volatility estimation for ergodic jump-diffusions via a jump-filtered contrast."""

from .contrast import (
    ContrastProblem,
    DegenerateDataError,
    EstimationResult,
    MinimizerConfig,
    estimate_asymptotic_covariance,
    estimate_generic,
    estimate_linear_closed_form,
    evaluate_contrast,
    weight,
)
from .kernels import TruncationKernel, kernel_moment, kernel_plot_data, phi0_eval, phi_l_eval
from .mc_harness import ExperimentConfig, MCReport, compare_estimators, run_experiment
from .model import JumpLaw, ModelSpec, ParameterBox, apply_generator_c, compensated_drift, linear_ou
from .moments import FilterConfig, MomentApproximator, jump_integral_J1, jump_integral_J2
from .simulate import (
    PathSample,
    SamplingGrid,
    SimulationError,
    make_irregular_grid,
    make_uniform_grid,
    simulate_path,
)

__version__ = "0.1.0"
