"""Example operators with known fixed-point data.

The function-space examples are positive finite-rank operators
``f -> sum_k f(t_k) p_k`` on C[0, 1] whose coefficient functions form a
partition of unity and reproduce linear functions. Their fixed points are
``span(1, x)``, the dual fixed points are ``span(delta_0, delta_1)``, and
the iterates converge to ``f -> f(0) + (f(1) - f(0)) x``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import InvalidInput
from .gram import EigenSystemInput, ProjectionOperator, build_projection, fixed_point_spaces
from .linop import DenseOperator, FiniteRankOperator, Functional, Operator, markov_violations, uniform_grid
from .spectral import spectrum

TWO_STATE = np.array([[0.9, 0.1], [0.2, 0.8]])
TWO_STATE_STATIONARY = np.array([2.0, 1.0]) / 3.0
LINEAR_INTERPOLATION = "f -> f(0) + (f(1) - f(0)) * x"

KINDS = {
    "intro_hat": "piecewise-linear partition of unity on nodes {0, 1/2, 1}",
    "bernstein": "Bernstein operator of degree n (param n >= 1)",
    "schoenberg": "Schoenberg spline operator (params degree >= 1, knots: interior knot list or count)",
    "stochastic_random": "row-normalized uniform random stochastic matrix (params n >= 2, seed)",
    "periodic_permutation": "cyclic permutation matrix of an n-cycle (param n >= 1)",
    "mixed_chain": "alpha*T0 + (1-alpha)*P0 for the two-state chain T0 (param alpha in (0, 1])",
}

__all__ = [
    "GallerySpec",
    "GalleryItem",
    "MarkovCheck",
    "KINDS",
    "make",
    "verify_markov",
    "bernstein_basis",
    "schoenberg_basis",
    "periodic_block_chain",
    "linear_interpolation_system",
]


@dataclass(frozen=True)
class GallerySpec:
    kind: str
    n: int | None = None
    degree: int | None = None
    knots: tuple | int | None = None
    seed: int | None = None
    alpha: float | None = None
    grid_points: int = 1001

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown gallery kind {self.kind!r}; choose from {sorted(KINDS)}")
        if isinstance(self.knots, list):
            object.__setattr__(self, "knots", tuple(self.knots))
        k = self.kind
        if k == "bernstein" and (self.n is None or self.n < 1):
            raise InvalidInput("bernstein needs n >= 1")
        if k == "schoenberg" and (self.degree is None or self.degree < 1):
            raise InvalidInput("schoenberg needs degree >= 1")
        if k == "stochastic_random" and (self.n is None or self.n < 2):
            raise InvalidInput("stochastic_random needs n >= 2")
        if k == "periodic_permutation" and (self.n is None or self.n < 1):
            raise InvalidInput("periodic_permutation needs n >= 1")
        if k == "mixed_chain" and (self.alpha is None or not 0.0 < self.alpha <= 1.0):
            raise InvalidInput("mixed_chain needs alpha in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "GallerySpec":
        d = dict(d)
        unknown = set(d) - {"kind", "n", "degree", "knots", "seed", "alpha", "grid_points"}
        if unknown:
            raise InvalidInput(f"unknown gallery parameters {sorted(unknown)}")
        if "kind" not in d:
            raise InvalidInput("gallery spec needs a 'kind'")
        return cls(**d)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if v is not None}
        if isinstance(d.get("knots"), tuple):
            d["knots"] = list(d["knots"])
        return d


@dataclass(frozen=True, eq=False)
class GalleryItem:
    spec: GallerySpec
    op: Operator
    known_eigensystem: EigenSystemInput | None
    known_limit: ProjectionOperator | None
    limit_description: str | None = None


@dataclass(frozen=True)
class MarkovCheck:
    positivity: bool
    partition_of_unity: bool
    linear_reproduction: bool | None = None
    endpoint_interpolation: bool | None = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        checks = [self.positivity, self.partition_of_unity, self.linear_reproduction, self.endpoint_interpolation]
        return all(c is not False for c in checks)


def bernstein_basis(n: int, x) -> np.ndarray:
    """Rows ``C(n, k) x^k (1-x)^(n-k)``, ``k = 0..n``, by the de Casteljau recurrence."""
    x = np.asarray(x, dtype=float)
    b = np.zeros((n + 1, x.size))
    b[0] = 1.0
    for j in range(1, n + 1):
        # raise the degree in place, from the top down
        for k in range(j, 0, -1):
            b[k] = (1.0 - x) * b[k] + x * b[k - 1]
        b[0] = (1.0 - x) * b[0]
    return b


def _knot_vector(degree, knots):
    if knots is None:
        interior = np.array([])
    elif isinstance(knots, (int, np.integer)):
        if knots < 0:
            raise InvalidInput("number of interior knots must be nonnegative")
        interior = np.arange(1, knots + 1) / (knots + 1)
    else:
        interior = np.asarray(knots, dtype=float)
        if interior.ndim != 1 or np.any(interior <= 0.0) or np.any(interior >= 1.0):
            raise InvalidInput("interior knots must lie strictly inside (0, 1)")
        if np.any(np.diff(interior) <= 0):
            raise InvalidInput("interior knots must be strictly increasing")
    return np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])


def schoenberg_basis(degree: int, knots, x):
    """B-spline basis on an open knot vector and its Greville abscissae.

    Returns ``(greville, basis)`` where ``basis[k]`` samples the k-th B-spline at ``x``.
    """
    t = _knot_vector(degree, knots)
    count = t.size - degree - 1
    greville = np.array([t[k + 1 : k + degree + 1].mean() for k in range(count)])
    if np.any(np.diff(greville) <= 0):
        raise InvalidInput("Greville abscissae are not distinct")
    basis = BSpline.design_matrix(np.asarray(x, dtype=float), t, degree).toarray().T
    return greville, basis


def _hat_basis(x):
    # the central hat has height 1/2, so the operator does not interpolate at 1/2
    mid = np.minimum(x, 1.0 - x)
    return np.vstack([1.0 - x - mid / 2, mid, x - mid / 2])


def linear_interpolation_system(grid) -> EigenSystemInput:
    """``{1, x}`` with the dual functionals ``{delta_0, delta_1}``."""
    grid = np.asarray(grid, dtype=float)
    return EigenSystemInput(
        1.0,
        [np.ones_like(grid), grid.copy()],
        [Functional.point(0.0), Functional.point(1.0)],
        grid,
        ascent_hint=1,
    )


def _function_operator(nodes, basis_fn, grid_points):
    grid = uniform_grid(grid_points, include=nodes)
    return FiniteRankOperator(nodes, grid, basis_fn(grid), markov=True)


def periodic_block_chain(seed=0) -> DenseOperator:
    """4-state chain alternating between the blocks {0, 1} and {2, 3} (period 2)."""
    rng = np.random.default_rng(seed)
    B = rng.uniform(0.2, 1.0, size=(2, 2))
    C = rng.uniform(0.2, 1.0, size=(2, 2))
    B /= B.sum(axis=1, keepdims=True)
    C /= C.sum(axis=1, keepdims=True)
    T = np.zeros((4, 4))
    T[:2, 2:] = B
    T[2:, :2] = C
    return DenseOperator(T, markov=True)


def _random_stochastic(n, seed):
    rng = np.random.default_rng(seed)
    while True:
        M = rng.uniform(size=(n, n))
        M /= M.sum(axis=1, keepdims=True)
        op = DenseOperator(M, markov=True)
        rep = spectrum(op)
        if len(rep.peripheral_distinct) == 1 and abs(rep.peripheral_distinct[0] - 1.0) < 1e-12:
            return op


def _dense_known(op, lam=1.0):
    sys = fixed_point_spaces(op, lam, ascent_hint=1)
    return sys, build_projection(sys)


def make(spec: GallerySpec) -> GalleryItem:
    """Build the operator described by ``spec`` with its known fixed-point data."""
    k = spec.kind
    if k in ("intro_hat", "bernstein", "schoenberg"):
        if k == "intro_hat":
            op = _function_operator(np.array([0.0, 0.5, 1.0]), _hat_basis, spec.grid_points)
        elif k == "bernstein":
            n = spec.n
            op = _function_operator(np.arange(n + 1) / n, lambda x: bernstein_basis(n, x), spec.grid_points)
        else:
            greville, _ = schoenberg_basis(spec.degree, spec.knots, np.array([0.0, 1.0]))
            op = _function_operator(
                greville, lambda x: schoenberg_basis(spec.degree, spec.knots, x)[1], spec.grid_points
            )
        if k == "schoenberg" and spec.degree == 1 and op.n > 2:
            # degree-one splines interpolate at the knots: T is itself a projection
            # onto all linear splines, so the fixed space is larger than span(1, x)
            sys, limit = _dense_known(op)
            return GalleryItem(spec, op, sys, limit, "piecewise-linear interpolation at the knots")
        sys = linear_interpolation_system(op.grid)
        return GalleryItem(spec, op, sys, build_projection(sys), LINEAR_INTERPOLATION)
    if k == "stochastic_random":
        op = _random_stochastic(spec.n, 0 if spec.seed is None else spec.seed)
        sys, limit = _dense_known(op)
        return GalleryItem(spec, op, sys, limit, "x -> (pi . x) 1 with pi the stationary distribution")
    if k == "periodic_permutation":
        n = spec.n
        T = np.roll(np.eye(n), 1, axis=1)
        op = DenseOperator(T, markov=True)
        sys = EigenSystemInput(1.0, [np.ones(n)], [Functional(np.full(n, 1.0 / n))], ascent_hint=1)
        limit = build_projection(sys) if n == 1 else None
        desc = "identity" if n == 1 else "no limit of plain iterates; Cesaro means tend to uniform averaging"
        return GalleryItem(spec, op, sys, limit, desc)
    # mixed_chain
    a = spec.alpha
    P0 = np.outer(np.ones(2), TWO_STATE_STATIONARY)
    op = DenseOperator(a * TWO_STATE + (1.0 - a) * P0, markov=True)
    sys = EigenSystemInput(1.0, [np.ones(2)], [Functional(TWO_STATE_STATIONARY)], ascent_hint=1)
    return GalleryItem(spec, op, sys, build_projection(sys), "x -> (2/3 x_1 + 1/3 x_2) (1, 1)")


def verify_markov(op: Operator, linear=None, tol=1e-12) -> MarkovCheck:
    """Check positivity and partition of unity, plus the C[0, 1] properties.

    For finite-rank operators, linear reproduction ``sum_k t_k p_k(x) = x``
    and endpoint interpolation ``p_1(0) = p_n(1) = 1`` are checked unless
    ``linear=False``.
    """
    if isinstance(op, DenseOperator):
        a = op.matrix
        real = not np.iscomplexobj(a)
        pos = real and a.min() >= -tol
        sums = np.abs(a.sum(axis=1) - 1.0).max()
        return MarkovCheck(bool(pos), bool(sums <= tol), details={"row_sum_error": float(sums)})
    p = op.coeff_samples
    real = not np.iscomplexobj(p)
    details = {}
    pos = real and p.min() >= -tol
    details["min_sample"] = float(np.real(p).min())
    pu_err = float(np.abs(p.sum(axis=0) - 1.0).max())
    details["partition_error"] = pu_err
    lin = end = None
    if linear is not False:
        lin_err = float(np.abs(op.nodes @ p - op.grid).max())
        details["linear_error"] = lin_err
        lin = lin_err <= tol
        end_err = max(abs(p[0, 0] - 1.0), abs(p[-1, -1] - 1.0))
        details["endpoint_error"] = float(end_err)
        end = bool(end_err <= tol and op.nodes[0] == 0.0 and op.nodes[-1] == 1.0)
    problems = markov_violations(op, tol)
    if problems:
        details["problems"] = problems
    return MarkovCheck(bool(pos), bool(pu_err <= tol), lin, end, details)
