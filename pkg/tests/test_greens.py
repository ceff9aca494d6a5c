import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_circle, random_sequence
from quasicmv.cmv import build
from quasicmv.greens import (NearSingularError, char_poly, eigen_reconstruct, greens_direct,
                             greens_formula, left_bound_ratio, paving_check, restriction,
                             transfer_phi_identity)
from quasicmv.sampling import VerblunskySequence


def dense_char(seq, a, b, beta, gamma, z):
    E = restriction(seq, a, b, beta, gamma).to_dense()
    return np.linalg.det(z * np.eye(b - a + 1) - E), np.linalg.eigvals(E)


@pytest.mark.parametrize("a,b", [(0, 7), (1, 8), (-3, 3), (2, 3)])
def test_char_poly_against_dense_determinant(rng, a, b):
    s = random_sequence(rng, a - 1, b + 1)
    beta, gamma = random_circle(rng, 2)
    z = random_circle(rng) * 0.999 + 0.01j
    z = z / abs(z)
    det, eig = dense_char(s, a, b, beta, gamma, z)
    cp = char_poly(s, (a, b), beta, gamma, z)
    assert cp.Phi == pytest.approx(det, rel=1e-12)
    assert cp.Phi == pytest.approx(np.prod(z - eig), rel=1e-10)
    assert cp.phi == pytest.approx(det / np.prod(s.rho[a - s.lo:b - s.lo]), rel=1e-12)


def test_char_poly_single_site(rng):
    s = random_sequence(rng, 0, 5)
    beta, gamma = random_circle(rng, 2)
    z = random_circle(rng)
    cp = char_poly(s, (3, 3), beta, gamma, z)
    assert cp.Phi == pytest.approx(z - beta * np.conj(gamma), rel=1e-14)
    assert cp.phi == cp.Phi


def test_char_poly_rejects_non_unimodular_phase(rng):
    s = random_sequence(rng, 0, 5)
    with pytest.raises(ValueError):
        char_poly(s, (1, 3), 0.5, 1.0, 1.0)


@pytest.mark.parametrize("a,b", [(0, 9), (1, 10), (4, 4)])
def test_greens_direct_inverts_pencil(rng, a, b):
    s = random_sequence(rng, a - 1, b + 1)
    beta, gamma = random_circle(rng, 2)
    z = np.exp(0.37j)
    g = greens_direct(s, (a, b), beta, gamma, z)
    E = restriction(s, a, b, beta, gamma)
    dense = np.linalg.inv(z * E.L.toarray().conj().T - E.M.toarray())
    np.testing.assert_allclose(g.G, dense, atol=1e-12 * np.abs(dense).max())
    assert g.residual(E) < 1e-12
    eig = np.linalg.eigvals(E.to_dense())
    assert g.distance == pytest.approx(np.abs(z - eig).min(), rel=1e-10)
    assert g(a, b) == g.G[0, -1]


def test_greens_near_singular(rng):
    s = random_sequence(rng, -1, 12)
    E = restriction(s, 0, 11, 1, 1).to_dense()
    lam = np.linalg.eigvals(E)[3]
    lam = lam / abs(lam)
    with pytest.raises(NearSingularError) as err:
        greens_direct(s, (0, 11), 1, 1, lam * np.exp(1e-9j))
    assert err.value.distance < 1e-8


def test_greens_csv(tmp_path, rng):
    s = random_sequence(rng, -1, 5)
    g = greens_direct(s, (0, 4), 1, 1j, np.exp(0.2j))
    g.to_csv(tmp_path / "g.csv")
    rows = (tmp_path / "g.csv").read_text().splitlines()
    assert rows[0] == "j,k,re,im,logmag" and len(rows) == 26
    j, k, re, im, lm = rows[8].split(",")
    v = g(int(j), int(k))
    assert float(re) == v.real and float(im) == v.imag


@pytest.mark.parametrize("a,b", [(0, 11), (1, 12), (-4, 5), (3, 6)])
def test_greens_formula_matches_direct(rng, a, b):
    s = random_sequence(rng, a - 1, b + 1)
    beta, gamma = random_circle(rng, 2)
    z = random_circle(rng)
    g = greens_direct(s, (a, b), beta, gamma, z)
    for j in range(a, b + 1):
        for k in range(a, b + 1):
            got = greens_formula(s, (a, b), beta, gamma, j, k, z)
            assert got == pytest.approx(abs(g(j, k)), rel=1e-10)


def test_greens_formula_free_case():
    s = VerblunskySequence.from_array(np.zeros(12), lo=-1)
    z = np.exp(0.9j)
    g = greens_direct(s, (0, 9), 1j, -1, z)
    for j, k in [(0, 0), (0, 9), (9, 9), (3, 7), (7, 3)]:
        assert greens_formula(s, (0, 9), 1j, -1, j, k, z) == pytest.approx(abs(g(j, k)), rel=1e-10)


@pytest.mark.parametrize("a,b", [(0, 0), (0, 1), (1, 9), (2, 40), (-7, 120)])
def test_phi_transfer_identity(rng, a, b):
    s = random_sequence(rng, a - 1, b + 1, rmax=0.9)
    beta, gamma = random_circle(rng, 2)
    z = random_circle(rng)
    r = transfer_phi_identity(s, (a, b), beta, gamma, z)
    assert r.residual < 1e-11
    assert 0 < r.C <= np.sqrt(2) * (1 + 1e-12) * 2
    if a == b:
        hand = np.array([[z - beta * np.conj(gamma), z + beta * np.conj(gamma)],
                         [z + beta * np.conj(gamma), z - beta * np.conj(gamma)]])
        np.testing.assert_allclose(r.lhs, hand, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(-10, 10), st.integers(1, 80), st.integers(0, 2 ** 32 - 1))
def test_left_bound_ratio_at_most_one(a, length, seed):
    rng = np.random.default_rng(seed)
    s = random_sequence(rng, a - 1, a + length + 1, rmax=0.99)
    assert left_bound_ratio(s, a, a + length, random_circle(rng), random_circle(rng)) <= 1 + 1e-12


@pytest.mark.parametrize("a,b", [(10, 20), (11, 20), (10, 21), (11, 21)])
def test_eigen_reconstruction_four_parities(rng, a, b):
    s = random_sequence(rng, -1, 33)
    E = build(s, (0, 32), beta=1, gamma=-1j).to_dense()
    w, V = np.linalg.eig(E)
    i = int(np.argmax(np.abs(V[a:b + 1]).sum(axis=0)))
    z, xi = w[i] / abs(w[i]), V[:, i]
    beta, gamma = random_circle(rng, 2)
    rec = eigen_reconstruct(s, (a, b), beta, gamma, z, xi, 0)
    np.testing.assert_allclose(rec, xi[a:b + 1], atol=1e-11)


def test_eigen_reconstruction_of_zero(rng):
    s = random_sequence(rng, -1, 20)
    rec = eigen_reconstruct(s, (5, 12), 1, 1, np.exp(0.1j), np.zeros(20), 0)
    assert np.all(rec == 0)
    with pytest.raises(ValueError):
        eigen_reconstruct(s, (0, 12), 1, 1, 1j, np.zeros(20), 0)


def test_paving_on_uniformly_hyperbolic_sequence():
    s = VerblunskySequence.from_array(np.full(130, 0.99), lo=-1)
    rep = paving_check(s, (0, 119), 20, 1.0)
    assert rep.hypothesis_holds and rep.conclusion_holds
    assert rep.c > 0 and rep.message == "conclusion holds"
    fixed = paving_check(s, (0, 119), 20, 1.0, c_target=rep.c / 2)
    assert fixed.hypothesis_margin > rep.hypothesis_margin


def test_paving_free_case_has_no_decay():
    s = VerblunskySequence.from_array(np.zeros(70), lo=-1)
    rep = paving_check(s, (0, 59), 10, np.exp(0.3j))
    assert not rep.hypothesis_holds
    assert rep.message == "hypothesis not satisfied"
