"""Gram matrices of dual eigenvectors and the projections they define.

Given a basis ``e_1..e_n`` of an eigenspace ``ker(T - lam I)`` and a basis
``e*_1..e*_m`` of the dual eigenspace ``ker(T* - lam I)`` (``m >= n``), the
matrix ``G[j, i] = e*_j(e_i)`` has full column rank exactly when
``T - lam I`` has ascent one. In that case ``A = (G^H G)^{-1} G^H`` (or
``G^{-1}`` when square) gives the projection

    P x = sum_i sum_j A[i, j] e*_j(x) e_i

onto the eigenspace along ``im(T - lam I)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import EmptyEigenspace, GramSingular, InvalidInput
from .linop import (
    DenseOperator,
    FiniteRankOperator,
    Functional,
    Operator,
    apply,
    as_vector,
    compose,
    operator_norm,
    realify,
    subtract,
)

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-9
COND_MAX = 1e12

__all__ = [
    "EigenSystemInput",
    "GramSystem",
    "ProjectionOperator",
    "AscentReport",
    "build_gram",
    "solve_coefficients",
    "build_projection",
    "separation_check",
    "ascent_diagnostic",
    "fixed_point_spaces",
    "numerical_rank",
    "projection_diagnostics",
]


def _svd_tol(s, scale=0.0):
    top = s[0] if s.size else 0.0
    return RANK_RTOL * max(top, scale)


def numerical_rank(a, scale=0.0) -> int:
    """Rank of ``a`` counting singular values below ``1e-9 * max(s_max, scale)`` as zero."""
    a = np.atleast_2d(a)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > _svd_tol(s, scale)))


def _null_space(a, scale=0.0):
    """Orthonormal basis (columns) of the numerical null space of ``a``."""
    u, s, vh = np.linalg.svd(a)
    rank = int(np.sum(s > _svd_tol(s, scale)))
    return vh[rank:].conj().T


def _canonical_phase(v):
    """Rotate ``v`` so that its first largest-modulus entry is real and positive."""
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


@dataclass(frozen=True, eq=False)
class EigenSystemInput:
    """Eigenvectors and dual eigenvectors for one eigenvalue.

    ``grid`` is set for systems on C[0, 1], where basis vectors are grid
    samples and dual functionals are point-evaluation combinations.
    """

    lam: complex
    basis: tuple
    dual_basis: tuple
    grid: np.ndarray | None = None
    ascent_hint: int | None = None

    def __post_init__(self):
        basis = tuple(realify(as_vector(e)) for e in self.basis)
        duals = tuple(self.dual_basis)
        if not basis:
            raise InvalidInput("empty basis")
        if len(duals) < len(basis):
            raise InvalidInput(f"need at least as many dual functionals ({len(duals)}) as basis vectors ({len(basis)})")
        if any(not isinstance(f, Functional) for f in duals):
            raise InvalidInput("dual basis must consist of Functional objects")
        size = basis[0].size
        if any(e.size != size for e in basis):
            raise InvalidInput("basis vectors differ in length")
        if self.grid is None:
            if any(f.nodes is not None for f in duals):
                raise InvalidInput("point-evaluation functionals need a grid")
            if any(f.coefficients.size != size for f in duals):
                raise InvalidInput("dual functionals do not match the ambient dimension")
        else:
            grid = np.asarray(self.grid, dtype=float)
            if grid.size != size:
                raise InvalidInput("basis vectors are not sampled on the grid")
            if any(f.nodes is None for f in duals):
                raise InvalidInput("coordinate functionals are not representable on C[0, 1]")
            object.__setattr__(self, "grid", grid)
        if self.ascent_hint is not None and self.ascent_hint < 1:
            raise InvalidInput("ascent_hint must be positive")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "dual_basis", duals)
        object.__setattr__(self, "lam", complex(self.lam))

    @property
    def n(self) -> int:
        return len(self.basis)

    @property
    def m(self) -> int:
        return len(self.dual_basis)

    @property
    def lam_value(self):
        """The eigenvalue as a float when it is real."""
        return self.lam.real if self.lam.imag == 0 else self.lam

    def evaluate(self, f: Functional, v):
        return f(v, self.grid)

    def is_normalized(self, tol=1e-12) -> bool:
        return all(abs(np.max(np.abs(e)) - 1.0) <= tol for e in self.basis) and all(
            abs(f.norm() - 1.0) <= tol for f in self.dual_basis
        )

    def normalized(self) -> "EigenSystemInput":
        """Sup-normalize the basis and l1-normalize the dual functionals."""
        basis = [e / np.max(np.abs(e)) for e in self.basis]
        duals = [f.normalized() for f in self.dual_basis]
        return EigenSystemInput(self.lam, basis, duals, self.grid, self.ascent_hint)


@dataclass(frozen=True, eq=False)
class GramSystem:
    G: np.ndarray
    column_rank: int
    condition_estimate: float
    singular_values: np.ndarray
    mode: str
    A: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.G.shape[1]

    @property
    def m(self) -> int:
        return self.G.shape[0]


@dataclass(frozen=True, eq=False)
class AscentReport:
    dim_ker_1: int
    dim_ker_2: int
    ascent_le_one: bool


def build_gram(sys: EigenSystemInput) -> GramSystem:
    """Evaluate every dual functional on every basis vector and classify the result."""
    G = np.array([[sys.evaluate(f, e) for e in sys.basis] for f in sys.dual_basis])
    G = realify(G)
    s = np.linalg.svd(G, compute_uv=False)
    # normalized bases give |G_ji| <= 1, so 1 is the natural scale for the rank cut
    rank = int(np.sum(s > _svd_tol(s, 1.0)))
    cond = float(s[0] / s[-1]) if s[-1] > 0 else float("inf")
    n, m = sys.n, sys.m
    if rank < n:
        mode = "singular"
    elif cond > COND_MAX:
        logger.warning("Gram matrix condition estimate %.3e exceeds %.0e; treating as singular", cond, COND_MAX)
        mode = "singular"
    elif m == n:
        mode = "inverse"
    else:
        mode = "moore-penrose"
    g = GramSystem(G, rank, cond, s, mode)
    if mode == "singular":
        return g
    return GramSystem(G, rank, cond, s, mode, solve_coefficients(g))


def solve_coefficients(g: GramSystem) -> np.ndarray:
    """Left inverse ``A`` with ``A G = I``.

    Square systems use ``G^{-1}``; tall ones the Moore-Penrose inverse
    ``(G^H G)^{-1} G^H``. The conjugate transpose keeps ``A G = I`` valid
    over the complex numbers.
    """
    if g.mode == "singular":
        raise GramSingular(g.column_rank, g.n)
    G = g.G
    if G.shape[0] == G.shape[1]:
        A = np.linalg.solve(G, np.eye(G.shape[0], dtype=G.dtype))
    else:
        Gh = G.conj().T
        A = np.linalg.solve(Gh @ G, Gh)
    return realify(A)


@dataclass(frozen=True, eq=False)
class ProjectionOperator:
    """``P = Phi A Phi*`` together with its materialized operator."""

    basis: tuple
    dual_basis: tuple
    A: np.ndarray
    realized: Operator
    lam: complex = 1.0

    @property
    def coefficient_bound(self) -> float:
        """``sum_ij |a_ij|``, an upper bound for ``||P||`` with normalized bases."""
        return float(np.abs(self.A).sum())

    def __call__(self, v):
        return apply(self.realized, v)


def build_projection(sys: EigenSystemInput, g: GramSystem | None = None) -> ProjectionOperator:
    """Materialize ``P x = sum_ij a_ij e*_j(x) e_i`` on the backend of ``sys``."""
    if g is None:
        g = build_gram(sys)
    A = solve_coefficients(g) if g.A is None else g.A
    E = np.column_stack(sys.basis)
    if sys.grid is None:
        C = np.vstack([f.coefficients for f in sys.dual_basis])
        realized = DenseOperator(realify(E @ A @ C))
    else:
        nodes = np.unique(np.concatenate([f.nodes for f in sys.dual_basis]))
        C = np.zeros((sys.m, nodes.size), dtype=np.result_type(*[f.coefficients for f in sys.dual_basis]))
        for j, f in enumerate(sys.dual_basis):
            np.add.at(C[j], np.searchsorted(nodes, f.nodes), f.coefficients)
        # coefficient function attached to node s_l is sum_ij a_ij c_jl e_i
        realized = FiniteRankOperator(nodes, sys.grid, realify((E @ A @ C).T))
    return ProjectionOperator(sys.basis, sys.dual_basis, A, realized, sys.lam)


def projection_diagnostics(p: ProjectionOperator) -> dict:
    """Residuals of the defining identities of ``p``."""
    P = p.realized
    idem = operator_norm(subtract(compose(P, P), P))
    fix = max(float(np.max(np.abs(apply(P, e) - e))) for e in p.basis)
    if isinstance(P, DenseOperator):
        rank = numerical_rank(P.matrix, 1.0)
    else:
        rank = numerical_rank(P.coeff_samples, 1.0)
    norm = operator_norm(P)
    return {
        "idempotence_error": idem,
        "basis_fix_error": fix,
        "rank": rank,
        "norm": norm,
        "coefficient_bound": p.coefficient_bound,
    }


def separation_check(sys: EigenSystemInput):
    """Do the eigenvectors separate the dual eigenvectors?

    Returns ``(True, None)`` when the square Gram matrix is invertible and
    ``(False, c)`` otherwise, where ``c`` is a nonzero coefficient vector
    such that ``sum_j c_j e*_j`` vanishes on every basis vector.
    """
    if sys.m != sys.n:
        raise InvalidInput(f"separation check needs a square system, got m={sys.m}, n={sys.n}")
    g = build_gram(sys)
    if g.mode != "singular":
        return True, None
    u, s, vh = np.linalg.svd(g.G)
    # c^T G = 0  <=>  G^H conj(c) = 0, so conj(c) is a left singular vector for the smallest s
    c = _canonical_phase(u[:, -1].conj())
    return False, realify(c / np.max(np.abs(c)))


def _shifted(op: DenseOperator, lam):
    a = op.matrix - lam * np.eye(op.n)
    return realify(a)


def _dense_only(op, what):
    if not isinstance(op, DenseOperator):
        raise InvalidInput(f"{what} needs a dense operator; materialize finite-rank operators with to_dense first")


def ascent_diagnostic(op: Operator, lam) -> AscentReport:
    """Compare ``dim ker(T - lam I)`` with ``dim ker(T - lam I)^2``."""
    _dense_only(op, "ascent_diagnostic")
    B = _shifted(op, lam)
    scale = np.linalg.norm(op.matrix, 2)
    d1 = op.n - numerical_rank(B, scale)
    d2 = op.n - numerical_rank(B @ B, scale**2)
    return AscentReport(d1, d2, d1 == d2)


def fixed_point_spaces(op: Operator, lam, ascent_hint=None) -> EigenSystemInput:
    """Normalized bases of ``ker(T - lam I)`` and ``ker(T* - lam I)``.

    For a dense operator the dual basis consists of coordinate functionals
    ``c`` with ``c^T (T - lam I) = 0``. A finite-rank operator is handled
    through its node matrix ``K``: for ``lam != 0`` every eigenfunction is
    ``sum_k v_k p_k`` with ``K v = lam v`` and every dual eigenfunctional is
    ``sum_k w_k delta_{t_k}`` with ``w^T K = lam w^T``.
    """
    if isinstance(op, FiniteRankOperator):
        if abs(lam) < RANK_RTOL:
            raise InvalidInput("the eigenvalue 0 of a finite-rank operator has an infinite-dimensional eigenspace")
        inner = fixed_point_spaces(DenseOperator(op.node_matrix), lam)
        basis = [realify(v @ op.coeff_samples / lam) for v in inner.basis]
        duals = [Functional(f.coefficients, op.nodes) for f in inner.dual_basis]
        return EigenSystemInput(lam, basis, duals, op.grid, ascent_hint).normalized()

    _dense_only(op, "fixed_point_spaces")
    B = _shifted(op, lam)
    scale = np.linalg.norm(op.matrix, 2)
    right = _null_space(B, scale)
    left = _null_space(B.T, scale)
    if right.shape[1] == 0:
        raise EmptyEigenspace(f"{lam} is not an eigenvalue")
    basis = []
    for v in right.T:
        v = _canonical_phase(v)
        basis.append(realify(v / np.max(np.abs(v))))
    duals = []
    for w in left.T:
        w = _canonical_phase(w)
        duals.append(Functional(realify(w / np.abs(w).sum())))
    return EigenSystemInput(lam, basis, duals, None, ascent_hint)
