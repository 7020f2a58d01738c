"""Splitting Gibbs measures for nearest-neighbor models with spins in [0, 1]
on Cayley trees: the integral equation, its translation-invariant solutions,
and the ART, Bleher-Ganikhodjaev and Zachary constructions."""

from .errors import (ConfigurationError, ContractViolation, DivergenceError, GibbsTreeError,
                     InvalidKernelError, NoConvergenceError, NumericError, PreconditionError,
                     ResourceError)
from .grid import Grid, integrate, interpolate, make_grid
from .kernel import Kernel, check_zero_mean, h_bounds, kernel_from_config, kernel_from_xi, preset_kernel
from .operator import apply_A, apply_kA, estimate_contraction, invert_kA, jacobian_A
from .ti_solver import find_ti_multi, solve_ti, standard_inits
from .tree import Path, Side, compare_to_path, level, path_from_r, successors
from .constructions import (VertexField, art_lift, bg_field, bg_limit_field, bg_seed_sensitivity,
                            field_to_vertexfield, residual, zachary_levels)
from .measure import (check_compatibility, log_density, marginal_at, messages, root_marginal,
                      sample_configuration, sample_configurations)

__version__ = "0.1.0"
