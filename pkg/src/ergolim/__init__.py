"""Explicit limits of iterates of quasi-compact Markov operators.

The limit ``P = lim T^m`` is assembled from the fixed points of ``T`` and of
its adjoint through the inverse of their Gram matrix.
"""
from .errors import (
    CommutationFailed,
    ContourFailed,
    ContourTooTight,
    EmptyEigenspace,
    ErgolimError,
    GramSingular,
    InvalidInput,
    NotCyclic,
    SharedFixpointViolation,
)
from .linop import (
    DenseOperator,
    FiniteRankOperator,
    Functional,
    adjoint_apply,
    apply,
    compose,
    linear_combination,
    operator_norm,
    power,
    subtract,
    to_dense,
)
from .gram import (
    EigenSystemInput,
    GramSystem,
    ProjectionOperator,
    ascent_diagnostic,
    build_gram,
    build_projection,
    fixed_point_spaces,
    separation_check,
    solve_coefficients,
)
from .spectral import contour_projection, cyclic_power, essential_radius_note, peripheral_eigensystems, spectrum
from .iteration import (
    cesaro_deviation,
    cyclic_iterate,
    difference_decay,
    iterate_deviation,
    powers_identity_check,
    shared_fixpoint_sequence,
)
from .gallery import GallerySpec, make, verify_markov

__version__ = "0.1.0"
