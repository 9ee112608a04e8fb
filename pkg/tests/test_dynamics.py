import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twomode_metro import fockspace as fs
from twomode_metro.dynamics import Generator, is_block_diagonal_operator, spin_generator


def test_pi_rotation_about_y_swaps_modes():
    b = fs.build_basis(3)
    out = spin_generator(b, (0, 1, 0)).rotate(fs.fock_state(3, 0, b), math.pi)
    assert abs(out.vector[b.index(0, 3)]) == pytest.approx(1.0)


@given(st.integers(0, 10**6), st.floats(-4, 4), st.sampled_from(["pure", "dense", "blocks"]))
def test_rotation_paths_agree_with_dense_unitary(seed, theta, kind):
    b = fs.build_basis(2, 3)
    s = {
        "pure": lambda: fs.random_pure_state(seed, b),
        "dense": lambda: fs.random_mixed_state(seed, b, rank=2),
        "blocks": lambda: fs.random_block_state(seed, b),
    }[kind]()
    g = spin_generator(b, (0.4, -0.2, 0.9))
    U = g.dense_unitary(theta)
    assert np.allclose(U.conj().T @ U, np.eye(b.dim), atol=1e-12)
    ref = U @ s.density_matrix() @ U.conj().T
    assert np.allclose(g.rotate(s, theta).density_matrix(), ref, atol=1e-12)


def test_rotation_keeps_block_representation():
    b = fs.build_basis(3)
    s = fs.random_block_state(2, b)
    assert spin_generator(b, (0, 1, 0)).rotate(s, 0.3).blocks is not None


def test_non_conserving_generator():
    b = fs.build_basis(2)
    G = np.zeros((b.dim, b.dim), complex)
    i, j = b.index(0, 0), b.index(1, 0)
    G[i, j] = G[j, i] = 1.0
    assert not is_block_diagonal_operator(b, G)
    gen = Generator(b, G)
    assert not gen.number_conserving
    out = gen.rotate(fs.fock_state(0, 0, b), math.pi / 2)
    assert abs(out.vector[j]) == pytest.approx(1.0)
