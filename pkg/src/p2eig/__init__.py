"""Finite-element laboratory for the Dirichlet eigenproblem -Delta_p u - Delta u = lam u."""

from .bifurcation import (Bifurcation, Branch, BranchPoint, NoBranchFound, ScalingFit,
                          classify_bifurcation, fit_scaling, higher_branch_probe, trace_branch,
                          transform_branch)
from .errors import (AmbiguousTrend, ContinuationStall, DomainError, InsufficientPoints,
                     MaxIterations, NoNegativeScale, NotInCone, P2EigError, TrustBallExceeded)
from .functionals import (EnergySetting, NehariReport, apply_operator, energy_F, gradient_F,
                          inequality_oracles, nehari_project, nehari_residual, nehari_scale,
                          picone_FG, picone_I, working_constants)
from .grid import Grid, assemble_mass, assemble_stiffness, build_grid, element_gradients, norms
from .multiplicity import (SolutionCatalog, find_k_solutions, nodal_count, palais_smale_probe,
                           subspace_seed)
from .solver import (EigenPair, SolverConfig, critical_point_search, inverse_solve, lambda_1,
                     linear_eigs, s_map, solve_first, transform_to_u, transform_to_v,
                     transformed_residual)

__version__ = "0.1.0"
