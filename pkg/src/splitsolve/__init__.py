"""Splitting solver for semilinear parabolic PDEs with convex coercive
Hamiltonians: Hopf-Lax minimization + Feynman-Kac expectation per step,
with a closed-form benchmark, a Howard policy-iteration FD baseline, and
a convergence-measurement harness."""

__version__ = "0.1.0"

from .backward import (MinimizeResult, OperatorConfig, SmoothFunction,
                       apply_operator, consistency_residual, minimize_over_y,
                       objective)
from .baselines import (ColeHopfParams, HowardConfig, cole_hopf_exact,
                        default_howard_config, howard_fd_solve, normal_cdf)
from .errors import (ArityMismatch, CflViolation, ConfigError, DegenerateFit,
                     IoError, NonCoercive, OutOfRange, ParseError,
                     PolicyNonConvergence, RadiusExhausted, SolverError,
                     StepMismatch, UnknownIdentifier)
from .expectation import (GaussianStep, GridFunction, QuadratureRule,
                          expect_fd_explicit, expect_monte_carlo,
                          expect_quadrature, frozen_step, grid_function,
                          hermite_rule, pick_rule, uniform_grid)
from .harness import (ConvergenceReport, ConvergenceRow, PairedReport,
                      compare_schemes, emit_report, emit_solution_svg,
                      estimate_rate, run_convergence)
from .problem import (BUILTIN_PROBLEMS, CoefficientField, DualHamiltonian,
                      HamiltonianSpec, ProblemSpec, TerminalDatum,
                      clamp_terminal, cole_hopf_problem, dual_envelopes,
                      legendre_transform, make_problem, minimizer_radius,
                      quadratic_drift_problem, quartic_problem,
                      validate_declarations)
from .scheme import (SchemeSolution, evaluate, export_layers,
                     scheme_comparison_check, solve, solve_final_layer,
                     terminal_layer)

__all__ = [name for name in dir() if not name.startswith("_")]
