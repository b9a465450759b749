"""Beta-robust geometric multigrid for DG discretizations of elliptic
distributed optimal control problems."""

__version__ = "0.1.0"

from .errors import ConfigError, ContractError
from .mesh import Mesh, EdgeInfo, build_initial_mesh, refine_uniform, classify_edges
from .space import (DgSpace, ScalarField, PairField, mesh_inner_product,
                    pair_mesh_inner_product, norm_1h, norm_h1beta, l2_norm,
                    project_analytic)
from .forms import (LevelOperators, SaddleOperator, assemble_sip, assemble_ar,
                    assemble_mass, assemble_level, assemble_saddle,
                    load_functional, general_rhs)
from .hierarchy import LevelStack, build_hierarchy, inject, restrict
from .precond import BlockPreconditioner, apply_scalar_inverse, apply_pair_inverse
from .cycles import (CycleConfig, EigEstimate, estimate_extreme_eigs,
                     damping_factor, smooth_pre, smooth_post, mg_solve,
                     mg_iterate, energy_norm, energy_norm_dual, pair_norm)
from .bench import (ExperimentConfig, measure_contraction, run_table,
                    convergence_study)

__all__ = [name for name in dir() if not name.startswith("_")]
