import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linear_sum_assignment

from conftest import random_circle, random_disk
from quasicmv.cocycle import log_norms_of, phase_grid, szego_matrices, walk_matrices
from quasicmv.frequency import GOLDEN
from quasicmv.sampling import VerblunskySequence, ZhangForm, cosine_phase
from quasicmv.walk import (P_SWAP, CoinSequence, DegenerateCoinError, LightConeError, build_walk,
                           cmv_to_coins, coin_from_alpha, coins_from_alpha_function,
                           gauge_residual, gz_propagate, gz_solution_check, gz_step,
                           random_coins, simulate, walk_to_cmv)


def constant_coins(C, lo, hi):
    return CoinSequence(lo, hi, np.broadcast_to(np.asarray(C, complex), (hi - lo + 1, 2, 2)).copy())


def match_spectra(a, b):
    cost = np.abs(np.subtract.outer(a, b))
    r, c = linear_sum_assignment(cost)
    return cost[r, c].max()


def test_identity_coins_shift_right():
    U = build_walk(constant_coins(np.eye(2), -5, 5))
    e = np.zeros(U.size)
    e[U.flat_index(0, 0)] = 1
    out = U.matrix @ e
    assert out[U.flat_index(1, 0)] == 1 and np.count_nonzero(out) == 1
    e[:] = 0
    e[U.flat_index(0, 1)] = 1
    out = U.matrix @ e
    assert out[U.flat_index(-1, 1)] == 1 and np.count_nonzero(out) == 1


def test_flip_coin_swaps_direction_and_spin():
    U = build_walk(constant_coins([[0, 1], [1, 0]], -5, 5))
    e = np.zeros(U.size)
    e[U.flat_index(0, 0)] = 1
    out = U.matrix @ e
    assert out[U.flat_index(-1, 1)] == 1 and np.count_nonzero(out) == 1
    e[:] = 0
    e[U.flat_index(0, 1)] = 1
    out = U.matrix @ e
    assert out[U.flat_index(1, 0)] == 1 and np.count_nonzero(out) == 1


def test_update_rule_columns(rng):
    coins = random_coins(rng, 0, 9)
    U = build_walk(coins).to_dense()
    for n in range(1, 9):
        C = coins[n]
        for spin in (0, 1):
            col = U[:, 2 * n + spin]
            assert col[2 * (n + 1)] == C[0, spin] and col[2 * (n - 1) + 1] == C[1, spin]
            assert np.count_nonzero(col) == 2


def test_interior_unitarity_analytic_coins():
    f = ZhangForm(0.9, theta=cosine_phase(0.2))
    U = build_walk(coins_from_alpha_function(f, GOLDEN, 0.1, (0, 99)))
    D = U.to_dense()
    G = D @ D.conj().T
    inner = U.interior
    assert np.abs(G[np.ix_(inner, inner)] - np.eye(len(inner))).max() < 1e-12
    np.testing.assert_array_equal(U.truncated_rows, [0, U.size - 1])


def test_coverage_error(rng):
    with pytest.raises(ValueError):
        build_walk(random_coins(rng, 0, 5), (-1, 5))


def test_non_unitary_coin_rejected():
    with pytest.raises(ValueError):
        constant_coins([[1, 1], [0, 1]], 0, 3)


def test_constant_coin_has_trivial_gauge():
    a = 0.6
    gp = walk_to_cmv(constant_coins(coin_from_alpha(a), 0, 9))
    np.testing.assert_array_equal(gp.lam, 1)
    np.testing.assert_allclose(gp.alphas.alpha[1::2], a)
    np.testing.assert_array_equal(gp.alphas.alpha[0::2], 0)


@pytest.mark.parametrize("lo", [0, -7, 3])
def test_gauge_conjugation_random_coins(rng, lo):
    coins = random_coins(rng, lo, lo + 39)
    U = build_walk(coins)
    gp = walk_to_cmv(coins)
    assert gauge_residual(U, gp) < 1e-10
    assert np.all(np.abs(gp.lam) == pytest.approx(1))
    np.testing.assert_allclose(gp.alphas.rho[1::2], np.abs(coins.coins[:, 0, 0]), atol=1e-14)
    assert match_spectra(np.linalg.eigvals(U.to_dense()),
                         np.linalg.eigvals(gp.operator().to_dense())) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(-10, 10), st.integers(2, 30), st.integers(0, 2 ** 32 - 1))
def test_gauge_round_trip(lo, length, seed):
    rng = np.random.default_rng(seed)
    coins = random_coins(rng, lo, lo + length)
    back = cmv_to_coins(walk_to_cmv(coins), lo, lo + length)
    np.testing.assert_allclose(back.coins, coins.coins, atol=1e-10)


def test_degenerate_coin_rejected():
    with pytest.raises(DegenerateCoinError):
        walk_to_cmv(constant_coins([[0, 1], [1, 0]], 0, 4))
    with pytest.raises(DegenerateCoinError):
        walk_to_cmv(constant_coins(np.eye(2), 0, 4))


def test_gz_step_zero_coefficients():
    E = np.exp(0.8j)
    s = gz_step(0, 0, E)
    np.testing.assert_allclose(s.ME, [[1 / E, 0], [0, E]], atol=1e-15)
    np.testing.assert_allclose(s.SE, [[E, 0], [0, 1 / E]], atol=1e-15)


def test_gz_step_reproduces_walk_cocycle(rng):
    a = random_disk(rng, 1)[0]
    E = random_circle(rng)
    s = gz_step(0, a, E)
    rho = np.sqrt(1 - abs(a) ** 2)
    np.testing.assert_allclose(s.SE, np.array([[E, -np.conj(a)], [-a, 1 / E]]) / rho, rtol=1e-14)
    np.testing.assert_allclose(s.SE, walk_matrices(a, E), rtol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_gz_step_algebra(seed):
    rng = np.random.default_rng(seed)
    af, ag = random_disk(rng, 2, 0.99)
    E = random_circle(rng)
    s = gz_step(af, ag, E)
    assert np.linalg.det(s.ME) == pytest.approx(1, abs=1e-12)
    np.testing.assert_allclose(s.ME, s.Mf @ s.Mg, rtol=1e-15)
    assert np.abs(P_SWAP @ s.ME @ P_SWAP - s.SE).max() <= 1e-14 * np.abs(s.SE).max()


def test_gz_step_domain():
    with pytest.raises(ValueError):
        gz_step(1.0, 0, 1)
    with pytest.raises(ValueError):
        gz_step(0, 0, 2)


def test_two_step_gz_equals_two_step_szego(rng):
    # S(0) S(alpha) at z equals z P M^E P with E = z
    for _ in range(10):
        a = random_disk(rng, 1)[0]
        z = random_circle(rng)
        two = szego_matrices(0, z) @ szego_matrices(a, z)
        s = gz_step(0, a, z)
        np.testing.assert_allclose(two, z * (P_SWAP @ s.ME @ P_SWAP), atol=1e-14)


def test_gz_and_walk_cocycle_exponents_agree():
    f = ZhangForm(0.8, theta=cosine_phase(0.2))
    E = np.exp(0.9j)
    xs = phase_grid(64)
    walk = log_norms_of(lambda x: walk_matrices(f.evaluate(x), E), GOLDEN, xs, 128).mean()
    gz = log_norms_of(lambda x: P_SWAP @ walk_matrices(f.evaluate(x), E) @ P_SWAP,
                      GOLDEN, xs, 128).mean()
    assert abs(walk - gz) < 1e-6


def test_gz_constant_solution_for_free_case():
    seq = VerblunskySequence.from_array(np.zeros(60), lo=-1)
    w, ls = gz_propagate(seq, 1.0, 0, 50, init=(1.0, 1.0))
    np.testing.assert_array_equal(w, 1.0)
    np.testing.assert_array_equal(ls, 0.0)
    assert gz_solution_check(seq, 1.0, (0, 50)) == 0.0


def test_gz_solution_on_localized_instance():
    f = ZhangForm(0.95, theta=cosine_phase(0.1))
    a = np.zeros(104, complex)
    a[1::2] = f.evaluate(GOLDEN * np.arange(52))
    seq = VerblunskySequence.from_array(a, lo=-1)
    assert gz_solution_check(seq, np.exp(0.4j), (0, 100)) < 1e-8


def test_simulate_one_step(rng):
    coins = random_coins(rng, -5, 5)
    U = build_walk(coins)
    psi = np.zeros(U.size, complex)
    psi[U.flat_index(0, 0)] = 1
    tr = simulate(U, psi, 1)
    C = coins[0]
    assert tr.distribution[1, 6] == pytest.approx(abs(C[0, 0]) ** 2)
    assert tr.distribution[1, 4] == pytest.approx(abs(C[1, 0]) ** 2)


def test_simulate_ballistic_shift(tmp_path):
    U = build_walk(constant_coins(np.eye(2), -60, 60))
    psi = np.zeros(U.size, complex)
    psi[U.flat_index(0, 0)] = 1
    tr = simulate(U, psi, 50)
    np.testing.assert_allclose(tr.second_moment, np.arange(51) ** 2)
    assert tr.norm_drift < 1e-10 * 50
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,second_moment,return_probability,participation_ratio"
    assert len(lines) == 52


def test_simulate_light_cone(rng):
    U = build_walk(random_coins(rng, -30, 30))
    psi = np.zeros(U.size, complex)
    psi[U.flat_index(0, 1)] = 1
    tr = simulate(U, psi, 25)
    sites = tr.sites
    for t in range(26):
        assert tr.distribution[t, np.abs(sites) > t].sum() == 0
    assert tr.norm_drift < 1e-10 * 25
    with pytest.raises(LightConeError):
        simulate(U, psi, 30)
    with pytest.raises(ValueError):
        simulate(U, 2 * psi, 3)
