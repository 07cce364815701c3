"""Structure-preserving solver for 2D Fokker-Planck equations with full
nonconstant diffusion matrices."""

from .diagnostics import (StudyReport, dissipation_functional,
                          entropy_flux_identity_check, log_mean_interface,
                          mass, rel_L1_error, relative_entropy,
                          successive_refinement_order, weighted_L2_distance)
from .errors import (ConfigurationError, DomainError, FokkerPlanckError,
                     NotPositiveDefiniteError, NumericalEvaluationError,
                     SolverError, StepDivergenceError)
from .flux import (CoefficientBuilder, FluxField, InterfaceCoefficients,
                   assemble_fluxes, chang_cooper_delta, compute_lambda,
                   divergence, effective_diffusions,
                   exact_interface_coefficients, steady_state_weights)
from .grid import (DensityField, Grid2D, QuadratureRule, integrate_1d,
                   nodes_and_weights, parse_rule, trapezoid_weights)
from .model import (DiffusionSpec, GradientFormDrift, LinearDrift,
                    NonlocalKernelDrift, ProblemSpec, bimodal_gaussian,
                    builtin_test1, builtin_test2, eval_C, eval_drift)
from .stepper import (PentadiagonalSystem, RunResult, SchemeConfig,
                      TimeStepPolicy, assemble_semi_implicit, cfl_explicit,
                      cfl_semi_implicit, run, solve_pentadiagonal,
                      step_explicit, step_semi_implicit)
from .studies import (RunSetup, batch_convergence, convergence_study,
                      entropy_study, execute)

__version__ = "0.1.0"
