import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergolim.errors import CommutationFailed, InvalidInput, SharedFixpointViolation
from ergolim.gallery import TWO_STATE, TWO_STATE_STATIONARY, GallerySpec, make, periodic_block_chain
from ergolim.gram import EigenSystemInput, build_projection, fixed_point_spaces
from ergolim.iteration import (
    cesaro_deviation,
    cyclic_iterate,
    difference_decay,
    fit_geometric,
    iterate_deviation,
    powers_identity_check,
    shared_fixpoint_sequence,
)
from ergolim.linop import DenseOperator, Functional, grid_kernel, operator_norm, power, subtract

from conftest import cycle, inf_norm


def two_state_projection():
    return build_projection(EigenSystemInput(1.0, [np.ones(2)], [Functional(TWO_STATE_STATIONARY)]))


def mixed(alpha):
    return make(GallerySpec("mixed_chain", alpha=alpha)).op


def gallery_item(kind, **kw):
    return make(GallerySpec(kind, **kw))


# ---------------------------------------------------- iterate_deviation


def test_two_state_deviations_match_powering_oracle(two_state, two_state_limit):
    rep = iterate_deviation(two_state, two_state_projection())
    assert rep.verdict == "converged" and rep.stop_reason == "tolerance_met"
    for m, dev in rep.entries[:40]:
        brute = inf_norm(np.linalg.matrix_power(TWO_STATE, m) - two_state_limit)
        assert dev == pytest.approx(brute, abs=1e-13)
        assert dev == pytest.approx(0.7 ** (m - 1) * 28 / 30, abs=1e-13)
    assert rep.entries[0][1] == pytest.approx(0.933333333333333, abs=1e-14)
    assert rep.entries[1][1] == pytest.approx(0.653333333333333, abs=1e-14)
    assert rep.fitted_rate == pytest.approx(0.7, abs=1e-3)
    assert rep.gamma_spectral == pytest.approx(0.7, abs=1e-12)


def test_intro_strictly_decreasing(intro):
    rep = iterate_deviation(intro.op, intro.known_limit, tol=1e-10)
    devs = rep.deviations
    assert rep.verdict == "converged" and devs[-1] <= 1e-10
    assert np.all(np.diff(devs) < 0)
    sub = np.sort(np.abs(np.linalg.eigvals(intro.op.node_matrix)))[0]
    assert rep.fitted_rate == pytest.approx(sub, abs=1e-3)


def test_projection_is_its_own_limit(two_state_limit):
    p = two_state_projection()
    rep = iterate_deviation(DenseOperator(two_state_limit), p)
    assert rep.entries == [(1, 0.0)]
    assert rep.fitted_rate is None


def test_growth_is_reported_as_diverged():
    p = build_projection(EigenSystemInput(1.0, [np.ones(1)], [Functional([1.0])]))
    rep = iterate_deviation(DenseOperator([[1.5]]), p)
    assert rep.verdict == "diverged" and rep.stop_reason == "growth_detected"


def test_swap_oscillates():
    op = DenseOperator(cycle(2))
    p = build_projection(fixed_point_spaces(op, 1.0))
    rep = iterate_deviation(op, p, max_m=200)
    assert rep.verdict == "oscillating" and len(rep.entries) == 200
    np.testing.assert_allclose(rep.deviations, 1.0)


def test_iterate_rejects_bad_arguments(two_state):
    with pytest.raises(InvalidInput):
        iterate_deviation(two_state, two_state_projection(), tol=0.0)
    with pytest.raises(InvalidInput):
        iterate_deviation(two_state, two_state_projection(), max_m=0)


def test_fit_geometric_exact_series():
    ms = np.arange(1, 41)
    rate, C = fit_geometric(ms, 3.0 * 0.6**ms)
    assert rate == pytest.approx(0.6, rel=1e-12) and C == pytest.approx(3.0, rel=1e-10)
    assert fit_geometric([1, 2], [1e-20, 1e-20]) == (None, None)


@pytest.mark.parametrize("kind,kw", [
    ("intro_hat", {}),
    ("bernstein", {"n": 3}),
    ("stochastic_random", {"n": 5, "seed": 2}),
])
def test_consistency_incremental_vs_direct(kind, kw):
    item = gallery_item(kind, **kw)
    rep = iterate_deviation(item.op, item.known_limit, max_m=25)
    for m, dev in rep.entries[::6]:
        direct = operator_norm(subtract(power(item.op, m), item.known_limit.realized))
        assert abs(dev - direct) <= 1e-12


def test_rate_sandwich_on_random_chains():
    # lazy versions 0.9 I + 0.1 M mix slowly enough to give long histories
    checked = 0
    for seed in range(30):
        item = gallery_item("stochastic_random", n=3 + seed % 5, seed=seed)
        lazy = DenseOperator(0.9 * np.eye(item.op.n) + 0.1 * item.op.matrix, markov=True)
        p = build_projection(fixed_point_spaces(lazy, 1.0))
        rep = iterate_deviation(lazy, p)
        devs = rep.deviations
        if len(devs) < 50 or devs[0] / devs[-1] < 1e4:
            continue
        checked += 1
        assert abs(rep.fitted_rate - rep.gamma_spectral) <= 0.05
    assert checked == 30


def test_rate_sandwich_bernstein():
    for n in (5, 10):
        item = gallery_item("bernstein", n=n)
        rep = iterate_deviation(item.op, item.known_limit)
        assert len(rep.entries) >= 50
        assert abs(rep.fitted_rate - rep.gamma_spectral) <= 0.05
        assert rep.gamma_spectral == pytest.approx((n - 1) / n, abs=1e-10)


@pytest.mark.parametrize("kind,kw", [
    ("mixed_chain", {"alpha": 0.1}),
    ("mixed_chain", {"alpha": 0.5}),
    ("mixed_chain", {"alpha": 0.9}),
    ("mixed_chain", {"alpha": 1.0}),
    ("intro_hat", {}),
    ("bernstein", {"n": 2}),
])
def test_constant_bound(kind, kw):
    item = gallery_item(kind, **kw)
    rep = iterate_deviation(item.op, item.known_limit)
    assert 1.0 <= rep.fitted_C <= 1.0 / rep.fitted_rate + 0.5


def test_constant_bound_counterexample_bernstein3():
    # in the sup norm the transient constant exceeds 1/gamma: the bound
    # C <= 1/gamma is not universal for Markov operators
    item = gallery_item("bernstein", n=3)
    rep = iterate_deviation(item.op, item.known_limit)
    assert rep.verdict == "converged"
    assert rep.fitted_C > 1.0 / rep.fitted_rate
    # the geometric bound itself still holds with the fitted constant
    ms = np.array([m for m, _ in rep.entries])
    assert np.all(rep.deviations <= rep.fitted_C * rep.fitted_rate**ms * 1.01)


@pytest.mark.parametrize("kind,kw", [
    ("mixed_chain", {"alpha": 0.8}),
    ("intro_hat", {}),
    ("bernstein", {"n": 5}),
])
def test_monotone_envelope(kind, kw):
    item = gallery_item(kind, **kw)
    devs = iterate_deviation(item.op, item.known_limit).deviations
    tail = devs[len(devs) // 2 :]
    assert np.all(np.diff(tail) <= 0)


# ------------------------------------------------ powers_identity_check


def test_powers_identity_two_state(two_state):
    assert powers_identity_check(two_state, two_state_projection(), m_max=20)


def test_powers_identity_swap_at_minus_one():
    op = DenseOperator(cycle(2))
    p = build_projection(fixed_point_spaces(op, -1.0))
    assert powers_identity_check(op, p, m_max=10)
    # both sides by explicit powering
    T, P = op.matrix, p.realized.matrix
    for m in range(1, 11):
        lhs = np.linalg.matrix_power(T - T @ P, m)
        rhs = np.linalg.matrix_power(T, m) - (-1.0) ** m * P
        assert inf_norm(lhs - rhs) <= 1e-12


def test_powers_identity_m1(two_state):
    assert powers_identity_check(two_state, two_state_projection(), m_max=1)


def test_powers_identity_precondition(two_state):
    other = build_projection(EigenSystemInput(1.0, [np.ones(2)], [Functional([0.5, 0.5])]))
    with pytest.raises(CommutationFailed):
        powers_identity_check(two_state, other)


def test_powers_identity_finite_rank(intro):
    assert powers_identity_check(intro.op, intro.known_limit, m_max=15)


# ----------------------------------------------------- cesaro_deviation


def test_cesaro_swap_brute_force():
    T = cycle(2)
    op = DenseOperator(T)
    p = build_projection(fixed_point_spaces(op, 1.0))
    rep = cesaro_deviation(op, p, max_n=60)
    P = np.full((2, 2), 0.5)
    for n, dev in rep.entries:
        a_n = sum(np.linalg.matrix_power(T, k) for k in range(n)) / n
        assert dev == pytest.approx(inf_norm(a_n - P), abs=1e-14)
        assert dev == pytest.approx(1.0 / n if n % 2 else 0.0, abs=1e-14)
    assert rep.verdict == "converged"


def test_cesaro_two_state_below_geometric_bound(two_state):
    rep = cesaro_deviation(two_state, two_state_projection(), max_n=300)
    # ||T^k - P|| = (4/3) 0.7^k for every k >= 0
    C = 4.0 / 3.0
    for n, dev in rep.entries:
        assert dev <= C / (n * 0.3) + 1e-12
    assert rep.verdict == "converged"


def test_cesaro_identity():
    op = DenseOperator(np.eye(3))
    p = build_projection(fixed_point_spaces(op, 1.0))
    rep = cesaro_deviation(op, p, max_n=20)
    assert np.all(rep.deviations == 0.0) and rep.verdict == "converged"


def test_cesaro_finite_rank_matches_grid_oracle():
    # a_n - P = I/n + F on a sampled grid, computed with the full kernel
    item = gallery_item("bernstein", n=3, grid_points=201)
    rep = cesaro_deviation(item.op, item.known_limit, max_n=12)
    K = grid_kernel(item.op).matrix
    Pk = grid_kernel(item.known_limit.realized).matrix
    N = K.shape[0]
    running, Tk = np.eye(N), np.eye(N)
    for n, dev in rep.entries:
        assert dev == pytest.approx(inf_norm(running / n - Pk), abs=1e-12)
        Tk = Tk @ K
        running = running + Tk


@pytest.mark.parametrize("kind,kw", [
    ("intro_hat", {}),
    ("bernstein", {"n": 3}),
    ("schoenberg", {"degree": 2, "knots": 3}),
    ("stochastic_random", {"n": 6, "seed": 11}),
    ("mixed_chain", {"alpha": 0.3}),
])
def test_cesaro_dominance_on_gallery(kind, kw):
    item = gallery_item(kind, **kw)
    assert iterate_deviation(item.op, item.known_limit).verdict == "converged"
    rep = cesaro_deviation(item.op, item.known_limit, max_n=400)
    assert rep.verdict == "converged"
    assert rep.deviations[-1] < rep.deviations[len(rep.deviations) // 4]


# ----------------------------------------------------- difference_decay


def test_difference_decay_two_state(two_state):
    out = difference_decay(two_state, 40)
    for n, d in out:
        brute = inf_norm(np.linalg.matrix_power(TWO_STATE, n + 1) - np.linalg.matrix_power(TWO_STATE, n))
        assert d == pytest.approx(brute, abs=1e-14)
        assert d == pytest.approx(0.3 * 0.7 ** (n - 1) * 28 / 30, abs=1e-14)


def test_difference_decay_swap_constant():
    out = difference_decay(DenseOperator(cycle(2)), 50)
    assert all(abs(d - 2.0) <= 1e-12 for _, d in out)


def test_difference_decay_identity():
    assert all(d == 0.0 for _, d in difference_decay(DenseOperator(np.eye(3)), 10))


def test_difference_decay_rejects_expansions():
    with pytest.raises(InvalidInput):
        difference_decay(DenseOperator([[2.0]]), 3)


# -------------------------------------------------------- cyclic_iterate


def test_cyclic_swap():
    res = cyclic_iterate(DenseOperator(cycle(2)))
    assert res.k_used == 2
    assert res.report.entries[0] == (1, 0.0)
    np.testing.assert_allclose(res.projection.realized.matrix, np.eye(2), atol=1e-14)
    assert res.plain_oscillates


def test_cyclic_three_cycle():
    res = cyclic_iterate(DenseOperator(cycle(3)))
    assert res.k_used == 3 and res.report.verdict == "converged" and len(res.report.entries) == 1


def test_cyclic_block_chain_brute_force():
    op = periodic_block_chain(seed=4)
    res = cyclic_iterate(op)
    assert res.k_used == 2 and res.report.verdict == "converged"
    limit = np.linalg.matrix_power(op.matrix, 2 * 400)
    assert inf_norm(res.projection.realized.matrix - limit) <= 1e-10
    assert res.plain_oscillates
    # geometric convergence of T^{2m}
    assert res.report.fitted_rate < 1.0


def test_cyclic_factorial_power():
    res = cyclic_iterate(DenseOperator(cycle(3)), k=6)
    assert res.k_used == 6 and res.report.verdict == "converged"


# ----------------------------------------------- shared_fixpoint_sequence


def test_shared_fixpoint_mixed_family(two_state_limit):
    alphas = [1.0 / (n + 1) for n in range(1, 9)]
    ops = [mixed(a) for a in alphas]
    ks = list(range(1, 9))
    rep = shared_fixpoint_sequence(ops, two_state_projection(), ks)
    for a, k, dev in zip(alphas, ks, rep.deviations):
        brute = inf_norm(np.linalg.matrix_power(a * TWO_STATE + (1 - a) * two_state_limit, k) - two_state_limit)
        assert dev == pytest.approx(brute, abs=1e-14)
        assert dev == pytest.approx(4.0 / 3.0 * (0.7 * a) ** k, abs=1e-14)
    assert rep.deviations[-1] < rep.deviations[0]


def test_shared_fixpoint_constant_sequence(two_state):
    p = two_state_projection()
    rep = shared_fixpoint_sequence([two_state] * 10, p, range(1, 11))
    direct = iterate_deviation(two_state, p, max_m=10).deviations
    np.testing.assert_allclose(rep.deviations, direct, atol=1e-15)


def test_shared_fixpoint_single(two_state, two_state_limit):
    rep = shared_fixpoint_sequence([two_state], two_state_projection(), [3])
    assert rep.deviations == [pytest.approx(inf_norm(np.linalg.matrix_power(TWO_STATE, 3) - two_state_limit))]


def test_shared_fixpoint_violation(two_state):
    other = DenseOperator([[0.5, 0.5], [0.5, 0.5]], markov=True)
    with pytest.raises(SharedFixpointViolation):
        shared_fixpoint_sequence([two_state, other], two_state_projection(), [1, 2])


def test_shared_fixpoint_powers_must_increase(two_state):
    with pytest.raises(InvalidInput):
        shared_fixpoint_sequence([two_state, two_state], two_state_projection(), [2, 2])


def test_shared_fixpoint_finite_rank(intro):
    b2 = gallery_item("bernstein", n=2)
    # bernstein(2) has the same grid as intro_hat and fixes {1, x} and {delta_0, delta_1}
    rep = shared_fixpoint_sequence([intro.op, b2.op], intro.known_limit, [5, 40])
    assert rep.deviations[1] == pytest.approx(0.5**39, rel=1e-6)


# ------------------------------------------------------------ properties


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 1.0), st.integers(1, 60))
def test_property_mixed_chain_closed_form(alpha, m):
    rep = iterate_deviation(mixed(alpha), two_state_projection(), max_m=m, tol=1e-300)
    assert rep.entries[-1][1] == pytest.approx(4.0 / 3.0 * (0.7 * alpha) ** m, rel=1e-8, abs=1e-14)
