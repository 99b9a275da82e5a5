"""
Boundary optimal control of the viscous Cahn-Hilliard equation with a dynamic
boundary condition: forward, tangent and adjoint solvers, projected-gradient
minimization and verification drivers.
"""
__version__ = "0.1.0"

from .errors import (CHControlError, ConfigError, ConfigMismatch, DomainViolation,
                     GeometryMismatch, LineSearchStalled, NewtonDiverged, NotZeroMean,
                     SingularJacobian, SolverDiverged)
from .grid import (INTERVAL, STRIP, Geometry, dot_calH, dot_H, dot_HGamma, dot_V,
                   integrate_boundary, integrate_interior, mean_value, neg_laplace_beltrami,
                   neg_laplacian, normal_trace_flux)
from .potentials import (LOGARITHMIC, QUARTIC, PotentialPair, PotentialSpec,
                         check_assumptions, convex_concave_split, evaluate)
from .neumann import apply_M, apply_N, dual_norm_sq
from .control import ControlBox, ControlSignal, dot_sigma, norm_sigma
from .state import (CONVEX_SPLIT, FULLY_IMPLICIT, SolverConfig, Trajectory, free_energy,
                    residual_check, solve_state)
from .sensitivity import LinearizedCoefficients, TangentTrajectory, linearize, solve_tangent
from .cost import CostSpec, evaluate_cost
from .adjoint import (AdjointData, AdjointTrajectory, build_adjoint_data, check_duality,
                      solve_adjoint_decoupled, solve_adjoint_transpose)
from .optimizer import (ControlProblem, OptimizationReport, OptimizerOptions, check_vi,
                        project_box, projected_gradient_descent, reduced_gradient)
