"""Expected root counts and condition numbers of random sparse polynomial systems,
computed on the log-torus through the toric Kähler potential of each support."""

__version__ = "0.1.0"

from .errors import (ConvergenceError, DimensionLimitError, NotInteriorError, NumericalError,
                     SupportError, ToricvolError)
from .supports import (Polytope, SupportSpec, bernshtein_count, convex_hull, dense_support,
                       kostlan_support, linear_support, minkowski_sum, mixed_volume_oracle,
                       polytope_volume)
from .toric import (ToricPoint, hamiltonian_flow, kahler_eval, mixed_discriminant, momentum,
                    momentum_invert, root_density)
from .systems import (PolySample, SystemSpec, condition_matrix, evaluate, kostlan_system,
                      linear_system, sample)
from .quadrature import Region, integrate_density, integrate_mc
from .solver import RootSet, solve, solve_bivariate, solve_linear, solve_univariate
from .condition import (ConditionReport, MetricFamily, fiber_distance, intersection_norm,
                        kappa_region, mixed_dilation, mu_region, nu_tail_mc)
from .real_roots import expected_real_mc, real_condition_tail, theorem4_bound

__all__ = [name for name in dir() if not name.startswith("_")]
