"""Transfer operators, pressure, Gibbs measures and Bowen dimension for expanding interval maps."""

from .errors import (BudgetExceeded, ConfigError, DivergentPotential, NoConvergence, NonpositiveEigenfunction,
                     NormalizationError, NoSignChange, NumericError, RuelleError, TruncationError)
from .measures import (CylinderMeasure, build_eigenmeasure, gibbs_verify, integrate, invariance_verify,
                       invariant_measure, jacobian_verify, tv_distance)
from .potentials import (BowenSequence, birkhoff_sum, bowen_constants, builtin_potential, constant, geometric,
                         summability_bound)
from .pressure import (PressureCurve, PressureEstimate, bowen_solve, iterate_identity_check, pressure_accelerated,
                       pressure_at, pressure_curve)
from .systems import (CATALOG, SystemSpec, TruncationPolicy, builtin_system, compose, derivative, doubling, gauss,
                      golden_cantor, linear_cantor, perturbed_doubling, preimages)
from .transfer import (EigenData, GridFunction, apply, fundamental_equation_check, iterate, normalize_potential,
                       solve_eigen)

__version__ = "0.1.0"
