import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ifp import markov
from ifp.errors import InvalidParameter, NotIrreducible
from ifp.model import constant, lognormal


def random_stochastic(rng, n, sparsity=0.0):
    P = rng.random((n, n))
    P[rng.random((n, n)) < sparsity] = 0.0
    np.fill_diagonal(P, P.diagonal() + 0.1)
    return P / P.sum(axis=1, keepdims=True)


# --- validation and stationary laws ------------------------------------------------


def test_stationary_examples():
    np.testing.assert_array_equal(markov.stationary_distribution([[1.0]]), [1.0])
    np.testing.assert_allclose(markov.stationary_distribution([[0.5, 0.5], [0.5, 0.5]]), [0.5, 0.5])
    np.testing.assert_allclose(markov.stationary_distribution([[0.9, 0.1], [0.2, 0.8]]), [2 / 3, 1 / 3], atol=1e-14)


def test_stationary_against_eigenvector():
    rng = np.random.default_rng(3)
    for n in (3, 7, 20):
        P = random_stochastic(rng, n, sparsity=0.3)
        pi = markov.stationary_distribution(P)
        np.testing.assert_allclose(pi, oracles.stationary_eig(P), atol=1e-12)
        np.testing.assert_allclose(pi @ P, pi, atol=1e-14)


def test_reducible_chain_rejected():
    with pytest.raises(NotIrreducible):
        markov.stationary_distribution([[1.0, 0.0], [0.5, 0.5]])
    assert not markov.is_irreducible(np.eye(3))
    assert markov.is_irreducible([[0, 1], [1, 0]])


@pytest.mark.parametrize("P", [
    [[0.5, 0.6], [0.5, 0.5]],
    [[1.1, -0.1], [0.5, 0.5]],
    [[0.5, 0.5]],
    [[0.5, 0.5 + 2e-12], [0.5, 0.5]],
])
def test_bad_transition_matrices(P):
    with pytest.raises(InvalidParameter):
        markov.as_transition_matrix(P)


def test_row_sum_tolerance_boundary():
    markov.as_transition_matrix([[0.5, 0.5 + 5e-13], [0.5, 0.5]])


# --- Rouwenhorst -------------------------------------------------------------------


def test_rouwenhorst_two_states():
    ch = markov.rouwenhorst(2, 0.0, 0.0, 1.0)
    np.testing.assert_array_equal(ch.states, [-1.0, 1.0])
    np.testing.assert_array_equal(ch.transition, [[0.5, 0.5], [0.5, 0.5]])


@pytest.mark.parametrize("n", [2, 5, 15])
@pytest.mark.parametrize("rho", [0.0, 0.5, 0.99])
@pytest.mark.parametrize("mu, sigma", [(0.99, 0.007), (-3.0, 0.2), (0.0, 1.0)])
def test_rouwenhorst_moments(n, rho, mu, sigma):
    ch = markov.rouwenhorst(n, mu, rho, sigma)
    pi = ch.stationary()
    assert np.all(np.diff(ch.states) > 0)
    assert abs(pi @ ch.states - mu) <= 1e-10
    assert abs(pi @ (ch.states - mu) ** 2 - sigma ** 2) <= 1e-8
    assert np.all(ch.transition > 0)
    assert markov.is_irreducible(ch.transition)
    # first-order autocorrelation of the chain equals rho
    x = ch.states - mu
    assert abs((pi * x) @ ch.transition @ x / sigma ** 2 - rho) <= 1e-10


@pytest.mark.parametrize("args", [(5, 0.0, 1.0, 0.1), (5, 0.0, -0.1, 0.1), (5, 0.0, 0.5, 0.0), (1, 0.0, 0.5, 0.1)])
def test_rouwenhorst_rejects(args):
    with pytest.raises(InvalidParameter):
        markov.rouwenhorst(*args)


# --- spectral radius ---------------------------------------------------------------


def test_spectral_radius_examples():
    assert markov.spectral_radius(np.eye(3)) == pytest.approx(1.0, rel=1e-12)
    assert markov.spectral_radius([[0.0, 2.0], [2.0, 0.0]]) == pytest.approx(2.0, rel=1e-10)
    assert markov.spectral_radius(np.zeros((4, 4))) == 0.0


def test_spectral_radius_matches_dense_eig():
    rng = np.random.default_rng(0)
    for n in (2, 5, 40, 100):
        M = rng.random((n, n)) * (rng.random((n, n)) < 0.5)
        M += np.eye(n, k=1) + np.eye(n, k=-(n - 1))  # cycle keeps it irreducible
        assert markov.spectral_radius(M) == pytest.approx(oracles.perron_root(M), rel=1e-10)


def test_spectral_radius_periodic_large():
    # a 100-cycle is periodic and too big for the dense fallback
    n = 100
    M = 3.0 * np.roll(np.eye(n), 1, axis=1)
    assert markov.spectral_radius(M) == pytest.approx(3.0, rel=1e-10)


def test_spectral_radius_rejects_negative():
    with pytest.raises(InvalidParameter):
        markov.spectral_radius([[1.0, -0.1], [0.0, 1.0]])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 10_000))
def test_stochastic_matrix_has_radius_one(n, seed):
    P = random_stochastic(np.random.default_rng(seed), n, sparsity=0.4)
    assert markov.spectral_radius(P) == pytest.approx(1.0, abs=1e-10)


# --- growth rates --------------------------------------------------------------------


def test_growth_rate_constant_and_iid():
    P = [[0.9, 0.1], [0.2, 0.8]]
    G, L = markov.growth_rate(P, [0.95, 0.95])
    assert G == pytest.approx(0.95, abs=1e-12)
    np.testing.assert_allclose(L, 0.95 * np.array(P))
    G, _ = markov.growth_rate([[0.25, 0.75], [0.25, 0.75]], [0.8, 1.2])
    assert G == pytest.approx(0.25 * 0.8 + 0.75 * 1.2, abs=1e-12)


def test_growth_rate_against_dense():
    rng = np.random.default_rng(11)
    for n in (2, 6, 15):
        P = random_stochastic(rng, n)
        m = rng.uniform(0.5, 1.5, n)
        G, _ = markov.growth_rate(P, m)
        assert G == pytest.approx(oracles.growth_rate_dense(P, m), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000), st.sampled_from([0.5, 2.0]))
def test_growth_rate_unit_means_and_homogeneity(n, seed, k):
    rng = np.random.default_rng(seed)
    P = random_stochastic(rng, n, sparsity=0.3)
    G1, _ = markov.growth_rate(P, np.ones(n))
    assert G1 == pytest.approx(1.0, abs=1e-10)
    m = rng.uniform(0.1, 2.0, n)
    G, _ = markov.growth_rate(P, m)
    Gk, _ = markov.growth_rate(P, k * m)
    assert Gk == pytest.approx(k * G, rel=1e-10)


def _power_norm(L, k):
    # rescale every step to avoid underflow and keep the log of the scale
    M, logs = np.eye(len(L)), 0.0
    for _ in range(k):
        M = M @ L
        top = M.max()
        M, logs = M / top, logs + np.log(top)
    return np.exp((logs + np.log(M.sum(axis=1).max())) / k)


@pytest.mark.parametrize("rho", [0.0, 0.5, 0.9, 0.99])
@pytest.mark.parametrize("sigma", [0.001, 0.01, 0.02])
def test_growth_rate_matches_power_norm(rho, sigma):
    ch = markov.rouwenhorst(15, 0.99, rho, sigma)
    G, L = markov.growth_rate(ch.transition, ch.states)
    if rho <= 0.5:
        assert abs(_power_norm(L, 64) - _power_norm(L, 128)) < 1e-3
    # the gap shrinks like 1/k, so persistent chains need longer products
    a, b = _power_norm(L, 4096), _power_norm(L, 8192)
    assert abs(a - b) < 1e-3
    assert abs(b - G) < abs(a - G) + 1e-15
    assert abs(b - G) < 1e-3


def test_growth_rate_bad_means():
    with pytest.raises(InvalidParameter):
        markov.growth_rate([[1.0]], [-1.0])
    with pytest.raises(InvalidParameter):
        markov.growth_rate([[0.5, 0.5], [0.5, 0.5]], [1.0])


# --- Monte Carlo oracle ----------------------------------------------------------------


def test_mc_oracle_deterministic_products():
    P = [[0.9, 0.1], [0.2, 0.8]]
    est, se = markov.mc_growth_oracle(P, constant(1.0).for_states(2), 50, 10_000, seed=0)
    assert (est, se) == (1.0, 0.0)
    est, se = markov.mc_growth_oracle(P, constant(0.95).for_states(2), 50, 10_000, seed=0)
    assert (est, se) == (0.95, 0.0)


def test_mc_oracle_thread_invariant():
    P = [[0.9, 0.1], [0.2, 0.8]]
    prim = lognormal([-0.11, 0.09], [0.1, 0.1])
    a = markov.mc_growth_oracle(P, prim, 60, 20_000, seed=4, threads=1, chunk=20_000)
    b = markov.mc_growth_oracle(P, prim, 60, 20_000, seed=4, threads=3, chunk=3_000)
    assert a == b


def test_mc_oracle_long_horizon_no_overflow():
    # products of 5000 factors near 2 overflow unless accumulated in logs
    est, _ = markov.mc_growth_oracle([[1.0]], lognormal([np.log(2.0)], [0.01]), 5000, 10_000, seed=1)
    assert est == pytest.approx(2.0 * np.exp(0.5e-4), rel=1e-3)


@pytest.mark.parametrize("n, paths", [(49, 10_000), (50, 9_999)])
def test_mc_oracle_minimum_sizes(n, paths):
    with pytest.raises(InvalidParameter):
        markov.mc_growth_oracle([[1.0]], constant(1.0), n, paths, seed=0)
