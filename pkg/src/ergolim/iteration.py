"""Numerical limit theorems: ``T^m -> P``, rates, Cesaro means, cyclic powers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CommutationFailed, InvalidInput, SharedFixpointViolation
from .gram import ProjectionOperator, build_projection, fixed_point_spaces
from .linop import (
    DenseOperator,
    FiniteRankOperator,
    Operator,
    adjoint_apply,
    apply,
    compose,
    linear_combination,
    operator_norm,
    power,
    subtract,
)
from .spectral import cyclic_power, subdominant_modulus

DEFAULT_TOL = 1e-12
DEFAULT_MAX_M = 10_000
GROWTH_FACTOR = 10.0
FIT_FLOOR = 1e2 * np.finfo(float).eps
COMMUTE_TOL = 1e-10
IDENTITY_TOL = 1e-9
FIXPOINT_TOL = 1e-10
OSCILLATION_LEVEL = 0.1

__all__ = [
    "ConvergenceReport",
    "CesaroReport",
    "CyclicResult",
    "SequenceReport",
    "fit_geometric",
    "iterate_deviation",
    "powers_identity_check",
    "cesaro_deviation",
    "difference_decay",
    "cyclic_iterate",
    "shared_fixpoint_sequence",
]


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    entries: list
    fitted_rate: float | None
    fitted_C: float | None
    gamma_spectral: float | None
    verdict: str
    stop_reason: str
    tol: float = DEFAULT_TOL

    @property
    def deviations(self) -> np.ndarray:
        return np.array([d for _, d in self.entries])

    @property
    def last(self) -> float:
        return self.entries[-1][1]


@dataclass(frozen=True, eq=False)
class CesaroReport:
    entries: list
    verdict: str
    envelope_ratio: float | None = None

    @property
    def deviations(self) -> np.ndarray:
        return np.array([d for _, d in self.entries])


@dataclass(frozen=True, eq=False)
class CyclicResult:
    k_used: int
    report: ConvergenceReport
    projection: ProjectionOperator
    plain_oscillates: bool
    plain_window: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class SequenceReport:
    deviations: list
    verdict: str


def fit_geometric(ms, deviations):
    """Least-squares fit of ``log dev = log C + m log gamma`` over the tail half.

    Values below ``100 * eps`` are dropped. Returns ``(None, None)`` when
    fewer than two usable points remain.
    """
    ms = np.asarray(ms, dtype=float)
    dev = np.asarray(deviations, dtype=float)
    half = len(ms) // 2
    ms, dev = ms[half:], dev[half:]
    keep = dev > FIT_FLOOR
    if keep.sum() < 2:
        return None, None
    slope, intercept = np.polyfit(ms[keep], np.log(dev[keep]), 1)
    return float(np.exp(slope)), float(np.exp(intercept))


def _check_contraction(op):
    if operator_norm(op) > 1.0 + 1e-12:
        raise InvalidInput("operator norm exceeds 1")


def iterate_deviation(op: Operator, p: ProjectionOperator, max_m=DEFAULT_MAX_M, tol=DEFAULT_TOL) -> ConvergenceReport:
    """Record ``||T^m - P||`` for ``m = 1, 2, ...`` with one product per step."""
    if not tol > 0:
        raise InvalidInput("tol must be positive")
    if max_m < 1:
        raise InvalidInput("max_m must be at least 1")
    P = p.realized
    entries = []
    Tm = op
    initial = None
    stop = "max_iters"
    for m in range(1, int(max_m) + 1):
        dev = operator_norm(subtract(Tm, P))
        entries.append((m, dev))
        if initial is None:
            initial = dev
        if dev <= tol:
            stop = "tolerance_met"
            break
        if dev > GROWTH_FACTOR * initial:
            stop = "growth_detected"
            break
        if m < max_m:
            Tm = compose(Tm, op)
    if stop == "tolerance_met":
        verdict = "converged"
    elif stop == "growth_detected":
        verdict = "diverged"
    else:
        verdict = "oscillating"
    rate, C = fit_geometric([m for m, _ in entries], [d for _, d in entries])
    try:
        gamma = subdominant_modulus(op, [p.lam])
    except InvalidInput:
        gamma = None
    return ConvergenceReport(entries, rate, C, gamma, verdict, stop, tol)


def powers_identity_check(op: Operator, p: ProjectionOperator, lam=None, m_max=20) -> bool:
    """Check ``(T - TP)^m = T^m - lam^m P`` for ``m = 1..m_max``."""
    lam = p.lam if lam is None else complex(lam)
    P = p.realized
    TP = compose(op, P)
    PT = compose(P, op)
    err_tp = operator_norm(linear_combination(TP, P, 1.0, -lam))
    err_pt = operator_norm(linear_combination(PT, P, 1.0, -lam))
    if max(err_tp, err_pt) > COMMUTE_TOL:
        raise CommutationFailed(f"||TP - lam P|| = {err_tp:.3e}, ||PT - lam P|| = {err_pt:.3e}")
    S = subtract(op, TP)
    Sm, Tm = S, op
    for m in range(1, int(m_max) + 1):
        rhs = linear_combination(Tm, P, 1.0, -(lam**m))
        if operator_norm(subtract(Sm, rhs)) > IDENTITY_TOL:
            return False
        if m < m_max:
            Sm = compose(Sm, S)
            Tm = compose(Tm, op)
    return True


def _cesaro_verdict(devs, tol):
    if devs[-1] <= tol:
        return "converged", None
    if devs[0] > 0 and np.max(devs) > GROWTH_FACTOR * devs[0]:
        return "diverged", None
    n = len(devs)
    if n < 8:
        return "oscillating", None
    second = np.max(devs[n // 4 : n // 2])
    last = np.max(devs[3 * n // 4 :])
    ratio = float(last / second) if second > 0 else 0.0
    return ("converged" if ratio <= 0.75 else "oscillating"), ratio


def cesaro_deviation(op: Operator, p: ProjectionOperator, max_n=1000, tol=DEFAULT_TOL) -> CesaroReport:
    """``||a_n(T) - P||`` for the averages ``a_n = (1/n) sum_{k<n} T^k``, ``n = 1..max_n``.

    The verdict is ``converged`` when the last deviation is below ``tol`` or
    when the maximum over the last quarter of the window is at most 0.75 of
    the maximum over the second quarter (an O(1/n) envelope gives 1/3).

    On C[0, 1] the identity is not finite-rank. There ``a_n - P = I/n + F``
    with ``F`` finite-rank, and ``||I/n + F|| = 1/n + ||F||`` because C[0, 1]
    has the Daugavet property.
    """
    _check_contraction(op)
    P = p.realized
    entries = []
    if isinstance(op, DenseOperator):
        eye = np.eye(op.n)
        running = eye.astype(np.result_type(op.matrix, P.matrix))
        Tk = eye
        for n in range(1, int(max_n) + 1):
            entries.append((n, float(np.abs(running / n - P.matrix).sum(axis=1).max())))
            Tk = Tk @ op.matrix
            running = running + Tk
    else:
        running = None  # sum_{k=1}^{n-1} T^k
        Tk = op
        for n in range(1, int(max_n) + 1):
            if running is None:
                rest = operator_norm(P)
            else:
                rest = operator_norm(linear_combination(running, P, 1.0 / n, -1.0))
            entries.append((n, 1.0 / n + rest))
            running = Tk if running is None else linear_combination(running, Tk)
            Tk = compose(Tk, op)
    verdict, ratio = _cesaro_verdict(np.array([d for _, d in entries]), tol)
    return CesaroReport(entries, verdict, ratio)


def difference_decay(op: Operator, max_n=100) -> list:
    """``[(n, ||T^{n+1} - T^n||) for n = 1..max_n]``.

    Tends to 0 exactly when the peripheral spectrum is contained in {1}, so
    it detects rotating peripheral components without an eigensolver.
    """
    _check_contraction(op)
    out = []
    Tn = op
    for n in range(1, int(max_n) + 1):
        Tnext = compose(Tn, op)
        out.append((n, operator_norm(subtract(Tnext, Tn))))
        Tn = Tnext
    return out


def cyclic_iterate(op: DenseOperator, tol=DEFAULT_TOL, max_m=DEFAULT_MAX_M, k=None) -> CyclicResult:
    """Iterate ``T^k`` towards the projection onto ``ker(T^k - I)``.

    ``k`` defaults to the minimal cyclic power. When ``k > 1`` the plain
    iterates are also sampled to confirm that they keep a deviation of at
    least 0.1 from that projection in the second half of the window.
    """
    cp = cyclic_power(op)
    k = cp.k_minimal if k is None else int(k)
    Tk = power(op, k)
    P = build_projection(fixed_point_spaces(Tk, 1.0))
    report = iterate_deviation(Tk, P, max_m, tol)
    window = []
    oscillates = False
    if k > 1:
        span = max(4 * cp.k_minimal, 40)
        Tm = op
        for m in range(1, span + 1):
            window.append((m, operator_norm(subtract(Tm, P.realized))))
            Tm = compose(Tm, op)
        tail = [d for m, d in window if m > span // 2]
        oscillates = any(d >= OSCILLATION_LEVEL for d in tail)
    return CyclicResult(k, report, P, oscillates, window)


def _check_shared(op, p):
    lam = p.lam
    for e in p.basis:
        if np.max(np.abs(apply(op, e) - lam * e)) > FIXPOINT_TOL:
            raise SharedFixpointViolation("operator does not fix the reference eigenvectors")
    for f in p.dual_basis:
        g = adjoint_apply(op, f)
        if isinstance(op, FiniteRankOperator):
            # compare on the merged node set
            nodes = np.union1d(g.nodes, f.nodes)
            diff = np.zeros(nodes.size, dtype=complex)
            np.add.at(diff, np.searchsorted(nodes, g.nodes), g.coefficients)
            np.add.at(diff, np.searchsorted(nodes, f.nodes), -lam * f.coefficients)
        else:
            diff = g.coefficients - lam * f.coefficients
        if np.abs(diff).sum() > FIXPOINT_TOL:
            raise SharedFixpointViolation("operator does not fix the reference dual eigenvectors")


def shared_fixpoint_sequence(ops, p: ProjectionOperator, k_seq, tol=DEFAULT_TOL) -> SequenceReport:
    """``||T_n^{k_n} - P||`` for operators sharing the fixed points behind ``p``."""
    ops = list(ops)
    k_seq = [int(k) for k in k_seq]
    if len(ops) != len(k_seq) or not ops:
        raise InvalidInput("need one power per operator")
    if k_seq[0] < 1 or any(b <= a for a, b in zip(k_seq, k_seq[1:])):
        raise InvalidInput("powers must be strictly increasing positive integers")
    devs = []
    for op, k in zip(ops, k_seq):
        _check_shared(op, p)
        devs.append(operator_norm(subtract(power(op, k), p.realized)))
    return SequenceReport(devs, "converged" if devs[-1] <= tol else "oscillating")
