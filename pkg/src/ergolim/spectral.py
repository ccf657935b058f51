"""Spectra, peripheral eigenvalues, cyclic powers and contour-integral projections."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ContourFailed, ContourTooTight, ErgolimError, InvalidInput, NotCyclic
from .gram import EigenSystemInput, fixed_point_spaces, numerical_rank
from .linop import DenseOperator, FiniteRankOperator, Operator, operator_norm, realify, to_dense

MAX_DIM = 512
PERIPHERAL_TOL = 1e-9
ROOT_TOL = 1e-8
CLUSTER_TOL = 1e-6

__all__ = [
    "SpectrumReport",
    "ContourProjection",
    "CyclicPower",
    "spectrum",
    "peripheral_eigensystems",
    "cyclic_power",
    "contour_projection",
    "essential_radius_note",
    "subdominant_modulus",
]


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    spectral_radius: float
    peripheral: np.ndarray
    peripheral_are_roots_of_unity: bool
    cyclic_order_l: int | None
    # distinct peripheral values, snapped onto exact roots of unity when detected
    peripheral_distinct: tuple = ()
    root_orders: tuple = ()


@dataclass(frozen=True, eq=False)
class CyclicPower:
    l: int
    k_minimal: int
    k_paper: int


@dataclass(frozen=True, eq=False)
class ContourProjection:
    center: complex
    radius: float
    quadrature_points: int
    P: DenseOperator


def _matrix(op: Operator) -> np.ndarray:
    if isinstance(op, FiniteRankOperator):
        # the node matrix carries the whole nonzero spectrum
        return op.node_matrix
    return op.matrix


def _cluster(values, tol=CLUSTER_TOL):
    reps = []
    for v in values:
        if not any(abs(v - r) <= tol for r in reps):
            reps.append(v)
    return reps


def _root_order(lam, qmax):
    for q in range(1, qmax + 1):
        if abs(lam**q - 1.0) <= ROOT_TOL:
            return q
    return None


def _snap_root(lam, q):
    k = round(math.atan2(lam.imag, lam.real) * q / (2 * math.pi)) % q
    z = complex(math.cos(2 * math.pi * k / q), math.sin(2 * math.pi * k / q))
    re = 0.0 if abs(z.real) < 1e-15 else z.real
    im = 0.0 if abs(z.imag) < 1e-15 else z.imag
    return complex(re, im)


def spectrum(op: Operator) -> SpectrumReport:
    """All eigenvalues with multiplicity, plus the peripheral structure.

    A finite-rank operator is represented by its node matrix, which has the
    same nonzero eigenvalues.
    """
    a = _matrix(op)
    n = a.shape[0]
    if n > MAX_DIM:
        raise InvalidInput(f"dimension {n} exceeds the dense limit {MAX_DIM}")
    try:
        ev = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise ErgolimError(f"eigenvalue solver did not converge: {exc}") from exc
    ev = np.asarray(ev, dtype=complex)
    # sort by decreasing modulus, then by angle, for reproducible output
    order = np.lexsort((np.angle(ev), -np.round(np.abs(ev), 12)))
    ev = ev[order]
    radius = float(np.max(np.abs(ev)))
    peripheral = ev[np.abs(ev) >= radius - PERIPHERAL_TOL]
    distinct = _cluster(peripheral)
    orders = [_root_order(lam, n) for lam in distinct]
    roots = all(q is not None for q in orders)
    if roots:
        distinct = [_snap_root(lam, q) for lam, q in zip(distinct, orders)]
        l_order = math.lcm(*orders)
    else:
        l_order = None
    return SpectrumReport(
        realify(ev),
        radius,
        peripheral,
        roots,
        l_order,
        tuple(distinct),
        tuple(orders) if roots else (),
    )


def subdominant_modulus(op: Operator, targets, tol=1e-7) -> float:
    """``sup |mu|`` over eigenvalues not within ``tol`` of any target eigenvalue."""
    ev = spectrum(op).eigenvalues
    targets = np.atleast_1d(np.asarray(targets, dtype=complex))
    keep = [mu for mu in ev if np.min(np.abs(mu - targets)) > tol]
    return float(max((abs(mu) for mu in keep), default=0.0))


def peripheral_eigensystems(op: Operator) -> list[EigenSystemInput]:
    """Eigenvector/dual-eigenvector systems for every distinct peripheral eigenvalue."""
    rep = spectrum(op)
    systems = []
    for lam in rep.peripheral_distinct:
        systems.append(fixed_point_spaces(op, lam.real if lam.imag == 0 else lam))
    return systems


def cyclic_power(op: Operator) -> CyclicPower:
    """Powers ``k`` for which the peripheral spectrum of ``T^k`` collapses to ``{1}``.

    ``k_paper = l!`` with ``l`` the number of peripheral values always
    works for a cyclic peripheral spectrum; ``k_minimal`` is the lcm of the
    orders of the peripheral roots of unity.
    """
    dense = to_dense(op)
    if not dense.markov and operator_norm(dense) > 1.0 + 1e-12:
        raise InvalidInput("cyclic_power needs a contraction")
    rep = spectrum(dense)
    if not rep.peripheral_are_roots_of_unity:
        raise NotCyclic(f"peripheral eigenvalues {rep.peripheral_distinct} are not roots of unity")
    l = len(rep.peripheral_distinct)
    return CyclicPower(l, rep.cyclic_order_l, math.factorial(l))


def contour_projection(op: DenseOperator, lam, radius, n_quad=64) -> ContourProjection:
    """Spectral projection by the trapezoid rule on a circle around ``lam``.

    Uses ``(1 / 2 pi i) * contour integral of (z I - T)^{-1} dz``; with the
    resolvent written as ``(T - z I)^{-1}`` the same integral gives ``-P``.
    Every quadrature point is one LU factorization; the nodes are summed in
    a fixed order.
    """
    if not isinstance(op, DenseOperator):
        raise InvalidInput("contour_projection needs a dense operator")
    if n_quad < 16:
        raise InvalidInput("n_quad must be at least 16")
    if not radius > 0:
        raise InvalidInput("radius must be positive")
    center = complex(lam)
    T = op.matrix
    n = op.n
    ev = np.linalg.eigvals(T)
    gap = np.min(np.abs(np.abs(ev - center) - radius))
    if gap < radius * 1e-3:
        raise ContourTooTight(f"circle passes within {gap:.3e} of an eigenvalue")
    eye = np.eye(n)
    acc = np.zeros((n, n), dtype=complex)
    for k in range(n_quad):
        w = radius * np.exp(2j * np.pi * k / n_quad)
        shifted = (center + w) * eye - T
        if np.linalg.cond(shifted) > 1e12:
            raise ContourTooTight("resolvent is ill-conditioned on the contour")
        lu = scipy.linalg.lu_factor(shifted)
        # dz = i w dtheta and dtheta = 2 pi / N cancel the 1 / (2 pi i)
        acc += w * scipy.linalg.lu_solve(lu, eye)
    P = realify(acc / n_quad)
    if np.abs(P @ P - P).sum(axis=1).max() > 1e-6:
        raise ContourFailed("quadrature result is not idempotent")
    return ContourProjection(center, float(radius), int(n_quad), DenseOperator(P))


@dataclass(frozen=True, eq=False)
class EssentialRadiusNote:
    rank: int
    essential_radius: float


def essential_radius_note(op: Operator) -> EssentialRadiusNote:
    """Finite-rank and matrix operators have essential spectral radius 0."""
    if isinstance(op, DenseOperator):
        rank = numerical_rank(op.matrix)
    else:
        rank = numerical_rank(op.coeff_samples)
    return EssentialRadiusNote(rank, 0.0)
