"""Homogenization of integral functionals under constant-rank differential constraints."""

__version__ = "0.1.0"

from .errors import (AfhomError, ConfigError, ConstantRankViolation, ExtrapolationError, Infeasible,
                     SolverDiverged, Unsupported)
from .operator import (OperatorSpec, apply_A, check_constant_rank, curl2d, curl3d, divergence,
                       operator_from_json, project_field, projector, row_divergence, symbol)
from .fields import (CutoffProfile, Grid, PeriodicField, glue, lp_norm, mask_compact, neg_sobolev_norm,
                     periodic_extend, read_afh1, write_afh1)
from .integrand import (Checkerboard, CustomTable, DoubleWell, Laminate, PPower, Quadratic,
                        RandomCheckerboard, integrand_from_json, make_periodic_plus_compact, rescale,
                        sample_random, shift, verify_growth, verify_plip)
from .cellsolver import (CellSolution, SolveOptions, lipschitz_check, solve_compact, solve_periodic,
                         solve_relaxed)
from .homog import (FhomTable, HomogEstimate, aqc_envelope, aqc_test, convex_envelope, fhom_at,
                    gamma_inequality_check, scaling_identity_check, small_cube_reconstruction, tabulate_fhom)
from .stochastic import (ErgodicEstimate, ProcessSample, covariance_test, ergodic_limit, sample_process,
                         subadditivity_test)
