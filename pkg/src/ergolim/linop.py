"""Linear operators on finite-dimensional spaces and on C[0, 1].

Two backends are provided:

``DenseOperator``
    a square matrix acting on coordinate vectors, normed by the sup-norm
    (so the operator norm is the maximum absolute row sum);

``FiniteRankOperator``
    ``f -> sum_k f(t_k) p_k`` on C[0, 1], where the coefficient functions
    ``p_k`` are stored as samples on a grid that contains every node.

Vectors are plain 1-d numpy arrays. For the finite-rank backend a vector is
the grid samples of a continuous function. Functionals are either coordinate
functionals ``v -> sum_i c_i v_i`` or finite combinations of point
evaluations ``f -> sum_l c_l f(s_l)``. The pairing is bilinear: nothing is
conjugated when a functional is applied.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import InvalidInput

MARKOV_TOL = 1e-12
IMAG_TOL = 1e-13
NODE_TOL = 1e-14
DEFAULT_GRID_POINTS = 1001

__all__ = [
    "Functional",
    "DenseOperator",
    "FiniteRankOperator",
    "Operator",
    "as_vector",
    "uniform_grid",
    "apply",
    "compose",
    "power",
    "operator_norm",
    "adjoint_apply",
    "linear_combination",
    "subtract",
    "to_dense",
    "grid_kernel",
    "identity",
]


def _freeze(a):
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


def realify(a, tol=IMAG_TOL):
    """Drop the imaginary part of ``a`` if it is everywhere below ``tol``."""
    a = np.asarray(a)
    if np.iscomplexobj(a) and (a.size == 0 or np.max(np.abs(a.imag)) <= tol):
        return a.real.copy()
    return a


def as_vector(v) -> np.ndarray:
    """Validate ``v`` as a finite, nonempty 1-d array."""
    v = np.asarray(v)
    if v.ndim != 1 or v.size < 1:
        raise InvalidInput(f"vector must be 1-d and nonempty, got shape {v.shape}")
    if not np.issubdtype(v.dtype, np.number):
        raise InvalidInput("vector entries must be numeric")
    if not np.all(np.isfinite(v)):
        raise InvalidInput("vector has non-finite entries")
    return v


def uniform_grid(n_points=DEFAULT_GRID_POINTS, include=()) -> np.ndarray:
    """Uniform grid on [0, 1] with the points ``include`` merged in."""
    if n_points < 2:
        raise InvalidInput("grid needs at least two points")
    grid = np.linspace(0.0, 1.0, n_points)
    extra = np.asarray(include, dtype=float).ravel()
    if extra.size:
        if np.any(extra < 0.0) or np.any(extra > 1.0):
            raise InvalidInput("grid points must lie in [0, 1]")
        # points within NODE_TOL of an existing grid point are replaced by it
        pos = np.clip(np.searchsorted(grid, extra), 1, n_points - 1)
        nearest = np.where(np.abs(grid[pos - 1] - extra) <= np.abs(grid[pos] - extra), pos - 1, pos)
        new = extra[np.abs(grid[nearest] - extra) > NODE_TOL]
        grid = np.union1d(grid, new)
    return grid


def _locate(grid, points):
    """Indices of ``points`` in ``grid``; every point must be a grid point."""
    points = np.atleast_1d(np.asarray(points, dtype=float))
    pos = np.clip(np.searchsorted(grid, points), 0, len(grid) - 1)
    left = np.clip(pos - 1, 0, len(grid) - 1)
    idx = np.where(np.abs(grid[left] - points) < np.abs(grid[pos] - points), left, pos)
    if np.any(np.abs(grid[idx] - points) > NODE_TOL):
        bad = points[np.abs(grid[idx] - points) > NODE_TOL]
        raise InvalidInput(f"points {bad[:5]} are not grid points")
    return idx


@dataclass(frozen=True, eq=False)
class Functional:
    """A continuous linear functional.

    With ``nodes=None`` this is the coordinate functional with the given
    coefficient vector. Otherwise it is ``f -> sum_l coefficients[l] * f(nodes[l])``.
    """

    coefficients: np.ndarray
    nodes: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients))
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise InvalidInput("functional coefficients must be a finite 1-d array")
        object.__setattr__(self, "coefficients", _freeze(realify(c)))
        if self.nodes is not None:
            t = np.atleast_1d(np.asarray(self.nodes, dtype=float))
            if t.shape != c.shape:
                raise InvalidInput("one coefficient per evaluation node is required")
            if np.any(t < 0.0) or np.any(t > 1.0):
                raise InvalidInput("evaluation nodes must lie in [0, 1]")
            object.__setattr__(self, "nodes", _freeze(t))

    @classmethod
    def coordinate(cls, coefficients):
        return cls(np.asarray(coefficients))

    @classmethod
    def point(cls, node):
        """The point evaluation ``delta_node``."""
        return cls(np.ones(1), np.array([float(node)]))

    @classmethod
    def combination(cls, nodes, coefficients):
        return cls(np.asarray(coefficients), np.asarray(nodes, dtype=float))

    @property
    def kind(self) -> str:
        return "coordinate" if self.nodes is None else "point-evaluation"

    def __call__(self, v, grid=None):
        v = as_vector(v)
        if self.nodes is None:
            if v.shape != self.coefficients.shape:
                raise InvalidInput(f"dimension mismatch: {v.shape} vs {self.coefficients.shape}")
            return self.coefficients @ v
        if grid is None:
            raise InvalidInput("point evaluation needs the sampling grid")
        if len(grid) != len(v):
            raise InvalidInput("vector is not sampled on the given grid")
        return self.coefficients @ v[_locate(grid, self.nodes)]

    def norm(self) -> float:
        """Dual norm with respect to the sup-norm, i.e. the l1 norm of the coefficients.

        Exact for coordinate functionals and for point evaluations at
        distinct nodes.
        """
        return float(np.abs(self.coefficients).sum())

    def normalized(self) -> "Functional":
        s = self.norm()
        if s == 0.0:
            raise InvalidInput("cannot normalize the zero functional")
        return Functional(self.coefficients / s, self.nodes)

    def scaled(self, factor) -> "Functional":
        return Functional(self.coefficients * factor, self.nodes)


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Square matrix acting on sup-normed coordinate vectors."""

    matrix: np.ndarray
    markov: bool = False
    backend = "dense"

    def __post_init__(self):
        a = np.asarray(self.matrix)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InvalidInput(f"operator matrix must be square, got shape {a.shape}")
        if not np.issubdtype(a.dtype, np.number) or not np.all(np.isfinite(a)):
            raise InvalidInput("operator matrix has non-finite entries")
        if not np.iscomplexobj(a):
            a = a.astype(float)
        a = realify(a)
        object.__setattr__(self, "matrix", _freeze(a))
        if self.markov:
            problems = markov_violations(self)
            if problems:
                raise InvalidInput("not a Markov matrix: " + "; ".join(problems))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def shape(self):
        return self.matrix.shape

    def __repr__(self):
        return f"DenseOperator(n={self.n}, markov={self.markov})"


@dataclass(frozen=True, eq=False)
class FiniteRankOperator:
    """``f -> sum_k f(t_k) p_k`` on C[0, 1].

    ``coeff_samples[k]`` holds ``p_k`` sampled on ``grid``. Nodes are snapped
    onto the grid, so point evaluations at nodes are exact.
    """

    nodes: np.ndarray
    grid: np.ndarray
    coeff_samples: np.ndarray
    markov: bool = False
    node_index: np.ndarray = field(init=False, repr=False)
    node_matrix: np.ndarray = field(init=False, repr=False)
    backend = "finite-rank"

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise InvalidInput("grid must be strictly increasing")
        if abs(grid[0]) > NODE_TOL or abs(grid[-1] - 1.0) > NODE_TOL:
            raise InvalidInput("grid must cover [0, 1]")
        nodes = np.atleast_1d(np.asarray(self.nodes, dtype=float))
        if nodes.ndim != 1 or nodes.size < 1 or np.any(np.diff(nodes) <= 0):
            raise InvalidInput("nodes must be strictly increasing")
        idx = _locate(grid, nodes)
        p = np.asarray(self.coeff_samples)
        if p.shape != (nodes.size, grid.size):
            raise InvalidInput(f"coeff_samples must have shape {(nodes.size, grid.size)}, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidInput("coefficient samples have non-finite entries")
        if not np.iscomplexobj(p):
            p = p.astype(float)
        p = realify(p)
        object.__setattr__(self, "grid", _freeze(grid))
        object.__setattr__(self, "nodes", _freeze(grid[idx]))
        object.__setattr__(self, "node_index", _freeze(idx))
        object.__setattr__(self, "coeff_samples", _freeze(p))
        # entry (i, j) is p_j(t_i)
        object.__setattr__(self, "node_matrix", _freeze(p[:, idx].T))
        if self.markov:
            problems = markov_violations(self)
            if problems:
                raise InvalidInput("not a Markov operator: " + "; ".join(problems))

    @property
    def n(self) -> int:
        return self.nodes.size

    def __repr__(self):
        return f"FiniteRankOperator(n={self.n}, grid={self.grid.size}, markov={self.markov})"


Operator = Union[DenseOperator, FiniteRankOperator]


def markov_violations(op: Operator, tol=MARKOV_TOL) -> list[str]:
    """Reasons why ``op`` fails to be a Markov operator (empty if it is one)."""
    a = op.matrix if isinstance(op, DenseOperator) else op.coeff_samples
    problems = []
    if np.iscomplexobj(a):
        return ["entries are complex"]
    if a.min() < -tol:
        problems.append(f"negative entry {a.min():.3e}")
    sums = a.sum(axis=1) if isinstance(op, DenseOperator) else a.sum(axis=0)
    worst = np.max(np.abs(sums - 1.0))
    if worst > tol:
        problems.append(f"row sums / partition of unity off by {worst:.3e}")
    return problems


def _check_same_backend(a, b):
    if type(a) is not type(b):
        raise InvalidInput(f"backend mismatch: {a.backend} vs {b.backend}")
    if isinstance(a, DenseOperator):
        if a.n != b.n:
            raise InvalidInput(f"dimension mismatch: {a.n} vs {b.n}")
    elif a.grid is not b.grid and not np.array_equal(a.grid, b.grid):
        raise InvalidInput("finite-rank operators live on different grids")


def identity(n: int) -> DenseOperator:
    return DenseOperator(np.eye(n), markov=True)


def apply(op: Operator, v) -> np.ndarray:
    """Apply ``op`` to a coordinate vector or to grid samples of a function."""
    v = as_vector(v)
    if isinstance(op, DenseOperator):
        if v.size != op.n:
            raise InvalidInput(f"dimension mismatch: vector {v.size}, operator {op.n}")
        return realify(op.matrix @ v)
    if v.size != op.grid.size:
        raise InvalidInput(f"vector has {v.size} samples, grid has {op.grid.size}")
    return realify(v[op.node_index] @ op.coeff_samples)


def compose(a: Operator, b: Operator) -> Operator:
    """The product ``a o b`` (apply ``b`` first).

    For finite-rank operators ``a f = sum_k f(t_k) p_k`` and
    ``b f = sum_j f(s_j) q_j`` the product keeps the nodes of ``b`` and has
    coefficient functions ``sum_k q_j(t_k) p_k``.
    """
    _check_same_backend(a, b)
    if isinstance(a, DenseOperator):
        out = realify(a.matrix @ b.matrix)
        markov = a.markov and b.markov and not markov_violations(DenseOperator(out))
        return DenseOperator(out, markov=markov)
    q_at_t = b.coeff_samples[:, a.node_index]
    out = realify(q_at_t @ a.coeff_samples)
    res = FiniteRankOperator(b.nodes, a.grid, out)
    if a.markov and b.markov and not markov_violations(res):
        res = FiniteRankOperator(b.nodes, a.grid, out, markov=True)
    return res


def power(op: Operator, m: int) -> Operator:
    """``op`` composed with itself ``m`` times, ``m >= 1``."""
    if int(m) != m or m < 1:
        raise InvalidInput("power requires an integer m >= 1; build the identity explicitly")
    result = op
    for _ in range(int(m) - 1):
        result = compose(result, op)
    return result


def operator_norm(op: Operator) -> float:
    """Operator norm induced by the sup-norm.

    Dense: maximum absolute row sum. Finite-rank: ``max_x sum_k |p_k(x)|``
    over the grid, which is the exact norm on C[0, 1] up to grid resolution.
    """
    if isinstance(op, DenseOperator):
        return float(np.abs(op.matrix).sum(axis=1).max())
    return float(np.abs(op.coeff_samples).sum(axis=0).max())


def adjoint_apply(op: Operator, f: Functional) -> Functional:
    """The functional ``f o op``."""
    if isinstance(op, DenseOperator):
        if f.nodes is not None:
            raise InvalidInput("point-evaluation functionals are not representable on a dense operator")
        if f.coefficients.size != op.n:
            raise InvalidInput("functional dimension does not match operator")
        return Functional(f.coefficients @ op.matrix)
    if f.nodes is None:
        raise InvalidInput("coordinate functionals are not representable on C[0, 1]")
    idx = _locate(op.grid, f.nodes)
    # delta_s o T = sum_k p_k(s) delta_{t_k}
    return Functional(op.coeff_samples[:, idx] @ f.coefficients, op.nodes)


def linear_combination(a: Operator, b: Operator, alpha=1.0, beta=1.0) -> Operator:
    """``alpha * a + beta * b``; finite-rank node sets are merged."""
    _check_same_backend(a, b)
    if isinstance(a, DenseOperator):
        return DenseOperator(alpha * a.matrix + beta * b.matrix)
    nodes = np.union1d(a.nodes, b.nodes)
    dtype = np.result_type(a.coeff_samples, b.coeff_samples, alpha, beta)
    coeffs = np.zeros((nodes.size, a.grid.size), dtype=dtype)
    coeffs[np.searchsorted(nodes, a.nodes)] += alpha * a.coeff_samples
    coeffs[np.searchsorted(nodes, b.nodes)] += beta * b.coeff_samples
    return FiniteRankOperator(nodes, a.grid, coeffs)


def subtract(a: Operator, b: Operator) -> Operator:
    return linear_combination(a, b, 1.0, -1.0)


def to_dense(op: Operator) -> DenseOperator:
    """Materialize ``op`` as a matrix.

    A finite-rank operator becomes its node matrix, which represents its
    action on the values at the nodes and carries the whole nonzero spectrum.
    """
    if isinstance(op, DenseOperator):
        return op
    return DenseOperator(op.node_matrix, markov=op.markov and not markov_violations(DenseOperator(op.node_matrix)))


def grid_kernel(op: FiniteRankOperator) -> DenseOperator:
    """The grid-to-grid matrix of a finite-rank operator (size grid x grid)."""
    if not isinstance(op, FiniteRankOperator):
        raise InvalidInput("grid_kernel needs a finite-rank operator")
    k = np.zeros((op.grid.size, op.grid.size), dtype=op.coeff_samples.dtype)
    k[:, op.node_index] = op.coeff_samples.T
    return DenseOperator(k)
