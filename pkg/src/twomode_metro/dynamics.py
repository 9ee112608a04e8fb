"""Unitary phase imprinting rho -> exp(-i theta G) rho exp(+i theta G)."""
from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument
from .fockspace import (
    DENSE_DIM_LIMIT,
    FockBasis,
    TwoModeState,
    _unit,
    block_spin_operator,
)

HERMITIAN_TOL = 1e-10


def check_hermitian(G, tol: float = HERMITIAN_TOL) -> None:
    diff = G - G.conj().T
    err = abs(diff).max() if sp.issparse(diff) else np.abs(diff).max(initial=0)
    if err > tol:
        raise InvalidArgument(f"generator is not Hermitian (max deviation {err:.3g})")


def is_block_diagonal_operator(basis: FockBasis, G) -> bool:
    coo = sp.coo_matrix(G)
    if coo.nnz == 0:
        return True
    N = basis.total_N
    mask = N[coo.row] != N[coo.col]
    return not np.any(np.abs(coo.data[mask]) > 0)


class Generator:
    """Hermitian generator with a cached eigendecomposition.

    Number-conserving generators are diagonalized block by block, which is
    what makes rotations of large truncated bases affordable.
    """

    def __init__(self, basis: FockBasis, matrix=None, *, blocks=None):
        self.basis = basis
        self._matrix = matrix
        if blocks is not None:
            self.blocks = blocks
        else:
            check_hermitian(matrix)
            if is_block_diagonal_operator(basis, matrix):
                csr = sp.csr_matrix(matrix)
                self.blocks = {
                    N: csr[idx][:, idx].toarray() for N, idx in basis.block_index.items()
                }
            else:
                self.blocks = None
        if self.blocks is not None:
            self.eig = {N: np.linalg.eigh(b) for N, b in self.blocks.items()}
        else:
            if basis.dim > DENSE_DIM_LIMIT:
                raise InvalidArgument("non-number-conserving generator on a large basis")
            self.eig = np.linalg.eigh(np.asarray(sp.csr_matrix(matrix).toarray()))

    @property
    def number_conserving(self) -> bool:
        return self.blocks is not None

    @property
    def matrix(self):
        if self._matrix is None:
            self._matrix = sp.block_diag(
                [self.blocks[N] for N in sorted(self.blocks)], format="csr"
            )
            # block_diag stacks blocks in N order; permute back to basis order
            order = np.concatenate([self.basis.block_index[N] for N in sorted(self.blocks)])
            P = sp.csr_matrix(
                (np.ones(len(order)), (order, np.arange(len(order)))),
                shape=(self.basis.dim, self.basis.dim),
            )
            self._matrix = (P @ self._matrix @ P.T).tocsr()
        return self._matrix

    def block_unitary(self, N: int, theta: float) -> np.ndarray:
        w, V = self.eig[N]
        return (V * np.exp(-1j * theta * w)) @ V.conj().T

    def dense_unitary(self, theta: float) -> np.ndarray:
        if self.blocks is None:
            w, V = self.eig
            return (V * np.exp(-1j * theta * w)) @ V.conj().T
        U = np.zeros((self.basis.dim, self.basis.dim), complex)
        for N, idx in self.basis.block_index.items():
            U[np.ix_(idx, idx)] = self.block_unitary(N, theta)
        return U

    def rotate(self, state: TwoModeState, theta: float) -> TwoModeState:
        if theta == 0:
            return state
        basis = self.basis
        if state.vector is not None:
            if self.blocks is None:
                w, V = self.eig
                v = V @ (np.exp(-1j * theta * w) * (V.conj().T @ state.vector))
            else:
                v = np.empty_like(state.vector)
                for N, idx in basis.block_index.items():
                    w, V = self.eig[N]
                    v[idx] = V @ (np.exp(-1j * theta * w) * (V.conj().T @ state.vector[idx]))
            return TwoModeState(basis, vector=v, trace_tail=state.trace_tail, validate=False)
        if state.blocks is not None and self.blocks is not None:
            out = {}
            for N, b in state.blocks.items():
                U = self.block_unitary(N, theta)
                out[N] = U @ b @ U.conj().T
            return TwoModeState(basis, blocks=out, trace_tail=state.trace_tail, validate=False)
        U = self.dense_unitary(theta)
        rho = U @ state.density_matrix() @ U.conj().T
        return TwoModeState(basis, matrix=rho, trace_tail=state.trace_tail, validate=False)


@lru_cache(maxsize=64)
def _spin_generator(basis: FockBasis, n: tuple[float, float, float]) -> Generator:
    blocks = {N: block_spin_operator(basis, N, n) for N in basis.block_index}
    return Generator(basis, blocks=blocks)


def spin_generator(basis: FockBasis, direction: Sequence[float]) -> Generator:
    n = tuple(float(x) for x in _unit(direction))
    return _spin_generator(basis, n)


def as_generator(basis: FockBasis, generator) -> Generator:
    if isinstance(generator, Generator):
        return generator
    return Generator(basis, generator)
