"""Finite elements on Bakhvalov-type meshes for singularly perturbed reaction-diffusion."""
from .assembly import SystemPair, assemble, coercivity_probe
from .fespace import FeFunction, FeSpace, build_space, gauss_rule, select_dofs
from .harness import Case, ConvergenceTable, RunConfig, norm_error, run_convergence, solve_case
from .interp import (build_chi, build_Pc, build_Ps, dof_override, lagrange_interp, vee_interp,
                     weighted_projection)
from .linsolve import CsrMatrix, SolverError, cg_solve
from .meshgen import (MeshParamError, MeshParams, TensorMesh2D, build_mesh, classify_subdomains,
                      continuity_constants, verify_lemma1)
from .problem import (LayerDecomposition, ScalarField, manufactured_decomposition,
                      manufactured_rhs, manufactured_solution)

__version__ = "0.1.0"
