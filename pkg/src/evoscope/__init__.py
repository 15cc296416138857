"""Numerical toolkit for nonuniform exponential behaviour of evolution families."""

from .errors import (
    ConfigError, ConstructionError, DegenerateInputError, DomainError, EvoscopeError,
    PropagationError,
)
from .family import (
    ConstantDecay, EvolutionFamily, MatrixODE, Rescaled, ScalarExponent, evaluate, example1,
    example2, rescale,
)
from .grid import GridFunction, TimeGrid
from .norms import (
    admissible_norm, membership_C, monotonicity_check, phi, phi_profile, quasi_negativity_test,
    sandwich_check, weight_profile,
)
from .exponents import (
    bohl_exponent, classify, inf_admissible, is_admissible, is_strict, lyapunov_exponent,
)
from .semigroup import SemigroupAction, transport
from .generator import (
    apply_inverse, certify_stability, estimate_resolvent_norm, inverse_consistency_check,
    resolvent_bound_check,
)
from .witnesses import make_plateau, make_psi_ratio_witness, random_bumps, triangle_bump
from .catalog import CATALOG, catalog_facts
from .config import parse_config

__version__ = "0.1.0"
