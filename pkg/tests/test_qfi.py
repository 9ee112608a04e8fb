import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twomode_metro import fockspace as fs
from twomode_metro import qfi
from twomode_metro.dynamics import Generator, spin_generator
from twomode_metro.errors import InvalidArgument
from twomode_metro.estimation import povm_number_difference, povm_photon_counting

Y = (0.0, 1.0, 0.0)
Z = (0.0, 0.0, 1.0)


def _dense_qfi(rho, G):
    # independent oracle: solve rho L + L rho = 2 d(rho) for the symmetric
    # logarithmic derivative by vectorization, then F = tr(d(rho) L)
    d = rho.shape[0]
    eye = np.eye(d)
    A = np.kron(rho, eye) + np.kron(eye, rho.T)
    drho = -1j * (G @ rho - rho @ G)
    L, *_ = np.linalg.lstsq(A, 2 * drho.reshape(-1), rcond=1e-13)
    L = L.reshape(d, d)
    return float(np.trace(drho @ L).real)


def test_noon_qfi():
    b = fs.build_basis(4)
    for N in (1, 2, 3, 4):
        s = fs.noon_state(N, b)
        gz = spin_generator(b, Z)
        assert qfi.qfi_pure(s, gz).value == pytest.approx(N**2, abs=1e-12)
        assert qfi.qfi_mixed(s, gz).value == pytest.approx(N**2, abs=1e-10)


def test_fock_state_qfi_z_is_zero():
    b = fs.build_basis(3)
    s = fs.fock_state(2, 1, b)
    assert qfi.qfi_mixed(s, spin_generator(b, Z)).value == pytest.approx(0.0, abs=1e-12)
    # twin-Fock |1,1>: F_Q[J_x] = 4 Var(J_x) = 4
    assert qfi.qfi(fs.fock_state(1, 1, b), spin_generator(b, (1, 0, 0))) == pytest.approx(4.0)


def test_maximally_mixed_has_zero_qfi():
    b = fs.build_basis(2)
    rho = np.eye(b.dim) / b.dim
    res = qfi.qfi_mixed(fs.mixed_state(b, rho), spin_generator(b, Y))
    assert res.value == pytest.approx(0.0, abs=1e-12)


def test_qfi_pure_rejects_mixed():
    b = fs.build_basis(1)
    with pytest.raises(InvalidArgument):
        qfi.qfi_pure(fs.random_mixed_state(0, b), spin_generator(b, Y))


def test_non_hermitian_generator_rejected():
    b = fs.build_basis(1)
    s = fs.fock_state(1, 0, b)
    G = np.zeros((b.dim, b.dim), complex)
    G[0, 1] = 1.0
    with pytest.raises(InvalidArgument):
        qfi.qfi_mixed(s, G)


@given(st.integers(0, 10**6), st.integers(1, 4))
def test_mixed_matches_oracle(seed, rank):
    b = fs.build_basis(2)
    s = fs.random_mixed_state(seed, b, rank=rank)
    G = fs.spin_operators(b).along((0.3, 0.4, -0.5)).toarray()
    assert qfi.qfi_mixed(s, G).value == pytest.approx(_dense_qfi(s.density_matrix(), G), rel=1e-6)


@given(st.integers(0, 10**6))
def test_pure_paths_agree(seed):
    b = fs.build_basis(3)
    s = fs.random_pure_state(seed, b)
    g = spin_generator(b, (1.0, -2.0, 0.5))
    assert qfi.qfi_mixed(s, g).value == pytest.approx(qfi.qfi_pure(s, g).value, rel=1e-9)


def test_rank_one_path_on_large_basis():
    p = fs.CavesParams(2.0, 0.0, 1.0)
    s = fs.caves_state(p)
    assert s.basis.dim > qfi.PURE_DENSE_LIMIT
    g = spin_generator(s.basis, Y)
    assert qfi.qfi_mixed(s, g).value == pytest.approx(qfi.qfi_pure(s, g).value, rel=1e-12)


@given(st.integers(0, 10**6))
def test_block_path_matches_dense(seed):
    b = fs.build_basis(3)
    s = fs.random_block_state(seed, b, rank=2)
    g = spin_generator(b, (0.2, 0.9, -0.1))
    dense = fs.mixed_state(b, s.density_matrix() + 0j)
    G = g.matrix.toarray()
    assert qfi.qfi_mixed(s, g).value == pytest.approx(_dense_qfi(dense.density_matrix(), G), rel=1e-6)


@given(st.integers(0, 10**6))
def test_qfi_convex(seed):
    b = fs.build_basis(2)
    s1, s2 = fs.random_mixed_state([seed, 1], b), fs.random_mixed_state([seed, 2], b)
    g = spin_generator(b, Y)
    mix = fs.mixed_state(b, 0.5 * (s1.density_matrix() + s2.density_matrix()))
    assert qfi.qfi(mix, g) <= 0.5 * (qfi.qfi(s1, g) + qfi.qfi(s2, g)) + 1e-9


@given(st.integers(0, 10**6))
def test_qfi_invariant_under_generated_rotation(seed):
    b = fs.build_basis(3)
    s = fs.random_mixed_state(seed, b, rank=2)
    g = spin_generator(b, Y)
    rotated = g.rotate(s, 0.37)
    assert qfi.qfi(rotated, g) == pytest.approx(qfi.qfi(s, g), rel=1e-8, abs=1e-10)


@given(st.integers(0, 10**6), st.booleans())
def test_spin_matrix_quadratic_form(seed, pure):
    b = fs.build_basis(3)
    s = fs.random_pure_state(seed, b) if pure else fs.random_mixed_state(seed, b, rank=3)
    F = qfi.qfi_spin_matrix(s)
    n = np.random.default_rng(seed).normal(size=3)
    n /= np.linalg.norm(n)
    assert n @ F @ n == pytest.approx(qfi.qfi(s, spin_generator(b, n)), rel=1e-8, abs=1e-10)


def test_spin_matrix_block_path():
    b = fs.build_basis(4)
    s = fs.random_separable_state(3, 4, 2, b)
    F = qfi.qfi_spin_matrix(s)
    for n in np.eye(3):
        assert n @ F @ n == pytest.approx(qfi.qfi(s, spin_generator(b, n)), rel=1e-10)


def test_classical_fisher_photon_counting_saturates():
    b = fs.build_basis(6)
    s = fs.noon_state(3, b)
    g = spin_generator(b, Y)
    for theta in (0.3, 0.7, 1.2):
        F = qfi.classical_fisher(s, g, theta, povm_photon_counting(b), richardson=True)
        assert F == pytest.approx(qfi.qfi(s, g), rel=1e-6)


@given(st.integers(0, 10**6), st.floats(0.1, 3.0))
def test_classical_below_quantum(seed, theta):
    b = fs.build_basis(3)
    s = fs.random_mixed_state(seed, b, rank=2)
    g = spin_generator(b, Y)
    F_E = qfi.classical_fisher(s, g, theta, povm_number_difference(b), richardson=True)
    assert F_E <= qfi.qfi(s, g) + 1e-6


def test_classical_fisher_richardson_consistent():
    p = fs.CavesParams(1.0, 0.0, 0.3)
    s = fs.caves_state(p, fs.build_basis(12, 20))
    g = spin_generator(s.basis, Y)
    povm = povm_number_difference(s.basis)
    a = qfi.classical_fisher(s, g, 1.2, povm)
    r = qfi.classical_fisher(s, g, 1.2, povm, richardson=True)
    assert a == pytest.approx(r, rel=1e-6)


def test_generator_wraps_dense_matrix():
    b = fs.build_basis(2)
    G = fs.spin_operators(b).Jz.toarray()
    gen = Generator(b, G)
    assert gen.number_conserving
    s = fs.random_pure_state(4, b)
    assert qfi.qfi(s, gen) == pytest.approx(4 * s.variance(G))
