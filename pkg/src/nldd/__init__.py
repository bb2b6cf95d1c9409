"""Nonlinear Dirichlet-Neumann domain decomposition solvers.

Library layout:

- problem:      problem specs, meshes, boundary conditions, Newton config
- pde1d/pde2d:  flux-form discretizations and damped Newton solvers
- transmission: nonlinear DtN / NtD interface operators
- dn:           the relaxed DN iteration, optimal relaxation, multi-subdomain
- npc:          DNPEN plus monodomain Newton and RASPEN baselines
- harness:      experiment registry, CSV histories, JSON manifests
"""

from .errors import (HypothesisViolated, InvalidInput, InvalidOverride,
                     SolverFailure, UnknownExperiment, UnsupportedOracle)
from .problem import (EdgeTraces, Forcing, Grid2D, Mesh1D, NewtonConfig,
                      Problem2D, ProblemSpec, Dirichlet, Neumann,
                      SubdomainSolution, linear_ramp, sine_forcing,
                      zero_forcing)
from .pde1d import (assemble_jacobian_1d, assemble_residual_1d,
                    default_initial_guess, extract_outward_flux,
                    invert_kirchhoff, kirchhoff_exact, kirchhoff_flux,
                    monodomain_mesh, newton_subdomain_solve, solve_monodomain)
from .pde2d import (FaceBC2D, assemble_jacobian_2d, assemble_residual_2d,
                    default_initial_guess_2d, extract_outward_flux_2d,
                    newton_solve_2d)
from .transmission import (SubdomainData, Tally, dtn_derivative, dtn_eval,
                           left_subdomain, ntd_eval, right_subdomain,
                           split_problem)
from .dn import (ConvergenceHistory, Decomposition1D, DNConfig,
                 StripDecomposition2D, dn_multi_solve, dn_multi_solve_2d,
                 dn_multi_sweep, dn_solve, g_map_eval, optimal_theta,
                 reference_trace, union_mesh)
from .npc import (RASConfig, SubstructuredResidualSpec, dnpen_solve,
                  newton_monodomain_solve, raspen_solve,
                  substructured_residual)
from .harness import (CSV_HEADER, HistoryRecord, experiment_names,
                      history_records, read_history_csv, run_experiment,
                      run_from_manifest, write_history_csv)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
