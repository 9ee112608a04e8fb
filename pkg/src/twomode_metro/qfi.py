"""Quantum and classical Fisher information for unitary phase imprinting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dynamics import Generator, as_generator, check_hermitian
from .errors import InvalidArgument
from .fockspace import TwoModeState

EIG_SUM_THRESHOLD = 1e-12
PROB_FLOOR = 1e-12
# pure states above this dimension use the rank-one spectrum instead of dense eigh
PURE_DENSE_LIMIT = 1024


@dataclass(frozen=True)
class QfiResult:
    value: float
    spectral_terms_used: int
    discarded_weight: float

    def __float__(self) -> float:
        return self.value


def _spectral_sum(lam: np.ndarray, V: np.ndarray, G: np.ndarray):
    """2 sum_{kl} (l_k - l_l)^2 / (l_k + l_l) |<k|G|l>|^2 over kept pairs."""
    lam = np.clip(lam, 0.0, None)
    Gt = V.conj().T @ G @ V
    W = np.abs(Gt) ** 2
    S = lam[:, None] + lam[None, :]
    keep = S > EIG_SUM_THRESHOLD
    D = (lam[:, None] - lam[None, :]) ** 2
    value = 2.0 * np.sum(D[keep] / S[keep] * W[keep])
    return float(value), int(keep.sum()), float(W[~keep].sum())


def qfi_mixed(state: TwoModeState, generator) -> QfiResult:
    """Spectral QFI from the eigendecomposition of rho.

    Block-diagonal states under number-conserving generators are
    diagonalized block by block.  Pure states on bases too large for a dense
    density matrix use their exact rank-one spectrum.
    """
    basis = state.basis
    if not isinstance(generator, Generator):
        check_hermitian(generator)
    gen = as_generator(basis, generator)

    if state.is_pure and basis.dim > PURE_DENSE_LIMIT:
        G = gen.matrix
        v = state.vector
        w = G @ v
        mean = np.vdot(v, w)
        gv2 = np.vdot(w, w).real
        value = 4.0 * (gv2 - abs(mean) ** 2)
        frob2 = float(abs(sp.csr_matrix(G).multiply(sp.csr_matrix(G).conj())).sum())
        discarded = frob2 - 2 * gv2 + abs(mean) ** 2
        return QfiResult(max(value, 0.0), 2 * basis.dim - 1, max(discarded, 0.0))

    block_path = gen.number_conserving and (
        state.blocks is not None or (state.matrix is not None and state.is_block_diagonal(0.0))
    )
    if block_path:
        total, used, discarded = 0.0, 0, 0.0
        for N in basis.block_index:
            rho_N = state.block(N)
            if not np.any(rho_N):
                continue
            lam, V = np.linalg.eigh(rho_N)
            v, u, d = _spectral_sum(lam, V, gen.blocks[N])
            total += v
            used += u
            discarded += d
        return QfiResult(total, used, discarded)

    rho = state.density_matrix()
    G = gen.matrix
    G = G.toarray() if sp.issparse(G) else np.asarray(G)
    lam, V = np.linalg.eigh(rho)
    return QfiResult(*_spectral_sum(lam, V, G))


def qfi_pure(state: TwoModeState, generator) -> QfiResult:
    """4 (Delta G)^2 for a pure state."""
    if not state.is_pure:
        raise InvalidArgument("qfi_pure needs a pure state")
    G = generator.matrix if isinstance(generator, Generator) else generator
    if not isinstance(generator, Generator):
        check_hermitian(G)
    return QfiResult(max(4.0 * state.variance(G), 0.0), 1, 0.0)


def qfi(state: TwoModeState, generator) -> float:
    if state.is_pure:
        return qfi_pure(state, generator).value
    return qfi_mixed(state, generator).value


def _fisher_from_probs(p0, dp) -> float:
    keep = p0 > PROB_FLOOR
    return float(np.sum(dp[keep] ** 2 / p0[keep]))


def classical_fisher(
    state: TwoModeState,
    generator,
    theta: float,
    povm,
    dtheta: float = 1e-5,
    richardson: bool = False,
) -> float:
    """sum_lambda (dP/dtheta)^2 / P with a central-difference derivative.

    With ``richardson`` the derivative combines steps h and h/2, cancelling
    the O(h^2) error term.
    """
    if dtheta <= 0:
        raise InvalidArgument("dtheta must be positive")
    povm.check()
    gen = as_generator(state.basis, generator)

    def probs(t):
        return povm.probabilities(gen.rotate(state, t))

    p0 = probs(theta)
    d1 = (probs(theta + dtheta) - probs(theta - dtheta)) / (2 * dtheta)
    if richardson:
        h = dtheta / 2
        d2 = (probs(theta + h) - probs(theta - h)) / (2 * h)
        d1 = (4 * d2 - d1) / 3
    return _fisher_from_probs(p0, d1)


def spin_moments(state: TwoModeState) -> tuple[np.ndarray, np.ndarray]:
    """Mean spin <J_i> and symmetrized second moments Re<J_i J_j>."""
    from .fockspace import spin_operators

    ops = spin_operators(state.basis)
    J = (ops.Jx, ops.Jy, ops.Jz)
    mean = np.empty(3)
    second = np.empty((3, 3))
    if state.is_pure:
        w = [Ji @ state.vector for Ji in J]
        for i in range(3):
            mean[i] = np.vdot(state.vector, w[i]).real
            for j in range(i, 3):
                second[i, j] = second[j, i] = np.vdot(w[i], w[j]).real
        return mean, second
    for i in range(3):
        mean[i] = state.expect(J[i]).real
        for j in range(i, 3):
            second[i, j] = second[j, i] = state.expect(J[i] @ J[j]).real
    return mean, second


def qfi_spin_matrix(state: TwoModeState) -> np.ndarray:
    """3x3 matrix F with F_Q[rho, J_n] = n^T F n for every unit n."""
    if state.is_pure:
        mean, second = spin_moments(state)
        return 4.0 * (second - np.outer(mean, mean))
    from .fockspace import block_spin_operator

    basis = state.basis
    axes = np.eye(3)
    F = np.zeros((3, 3))

    def accumulate(lam, V, ops):
        lam = np.clip(lam, 0.0, None)
        S = lam[:, None] + lam[None, :]
        keep = S > EIG_SUM_THRESHOLD
        K = np.zeros_like(S)
        K[keep] = (lam[:, None] - lam[None, :])[keep] ** 2 / S[keep]
        Gt = [V.conj().T @ G @ V for G in ops]
        for i in range(3):
            for j in range(i, 3):
                v = 2.0 * np.sum(K * (Gt[i] * Gt[j].T).real)
                F[i, j] += v
                if j != i:
                    F[j, i] += v

    if state.blocks is not None or state.is_block_diagonal(0.0):
        for N in basis.block_index:
            rho_N = state.block(N)
            if not np.any(rho_N):
                continue
            lam, V = np.linalg.eigh(rho_N)
            accumulate(lam, V, [block_spin_operator(basis, N, a) for a in axes])
        return F
    from .fockspace import spin_operators

    ops = spin_operators(basis)
    lam, V = np.linalg.eigh(state.density_matrix())
    accumulate(lam, V, [ops.Jx.toarray(), ops.Jy.toarray(), ops.Jz.toarray()])
    return F
