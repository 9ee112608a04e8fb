"""Mach-Zehnder phase imprinting, POVM sampling and maximum-likelihood estimation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dynamics import spin_generator
from .errors import EstimatorUndefined, InvalidArgument, InvalidPovm, NumericalInconsistency
from .fockspace import DENSE_DIM_LIMIT, FockBasis, TwoModeState
from .qfi import classical_fisher

POVM_SUM_TOL = 1e-8
POVM_PSD_TOL = -1e-10
PROB_TOTAL_TOL = 1e-8
LOG_FLOOR = 1e-300
GOLDEN = (math.sqrt(5) - 1) / 2


def evolve(state: TwoModeState, theta: float, direction: Sequence[float]) -> TwoModeState:
    """exp(-i theta J_n) rho exp(+i theta J_n), applied block by block."""
    return spin_generator(state.basis, direction).rotate(state, theta)


# ---------------------------------------------------------------------------
# POVMs
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Povm:
    basis: FockBasis
    labels: tuple
    elements: tuple
    number_conserving: bool = field(init=False)
    # basis index -> outcome position, when every element is a diagonal projector
    diagonal_outcome: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.labels) != len(self.elements) or not self.labels:
            raise InvalidPovm("labels and elements must be non-empty and of equal length")
        elems = tuple(sp.csr_matrix(E, dtype=complex) for E in self.elements)
        object.__setattr__(self, "elements", elems)
        N = self.basis.total_N
        nc = True
        for E in elems:
            coo = E.tocoo()
            if np.any(np.abs(coo.data[N[coo.row] != N[coo.col]]) > 1e-10):
                nc = False
                break
        object.__setattr__(self, "number_conserving", nc)
        object.__setattr__(self, "diagonal_outcome", self._diagonal_map(elems))
        object.__setattr__(self, "_label_index", {lab: i for i, lab in enumerate(self.labels)})

    def _diagonal_map(self, elems):
        out = np.full(self.basis.dim, -1)
        for k, E in enumerate(elems):
            coo = E.tocoo()
            if np.any(coo.row != coo.col):
                return None
            on = coo.row[np.abs(coo.data - 1) < 1e-14]
            if len(on) != np.count_nonzero(coo.data) or np.any(out[on] >= 0):
                return None
            out[on] = k
        return out if np.all(out >= 0) else None

    def __len__(self) -> int:
        return len(self.labels)

    def index_of(self, label: Hashable) -> int:
        try:
            return self._label_index[label]
        except KeyError:
            raise InvalidArgument(f"{label!r} is not an outcome of this POVM") from None

    def check(self) -> None:
        dim = self.basis.dim
        total = sum(self.elements, sp.csr_matrix((dim, dim), dtype=complex))
        dev = total - sp.identity(dim, format="csr", dtype=complex)
        err = spla.norm(dev, np.inf) if dev.nnz else 0.0
        if err > POVM_SUM_TOL:
            raise InvalidPovm(f"POVM elements sum to identity only within {err:.3g}")
        for lab, E in zip(self.labels, self.elements):
            herm = E - E.conj().T
            if herm.nnz and abs(herm).max() > 1e-10:
                raise InvalidPovm(f"element {lab!r} is not Hermitian")
            if self.diagonal_outcome is not None:
                continue
            if dim > DENSE_DIM_LIMIT:
                raise InvalidPovm("cannot verify positivity of a dense POVM on a large basis")
            if np.linalg.eigvalsh(E.toarray()).min() < POVM_PSD_TOL:
                raise InvalidPovm(f"element {lab!r} is not positive semidefinite")

    def raw_probabilities(self, state: TwoModeState) -> np.ndarray:
        """tr[E(lambda) rho] for every outcome, without clipping."""
        if self.diagonal_outcome is not None:
            return np.bincount(
                self.diagonal_outcome, weights=_diagonal(state), minlength=len(self)
            )
        return np.array([state.expect(E).real for E in self.elements])

    def probabilities(self, state: TwoModeState) -> np.ndarray:
        p = np.clip(self.raw_probabilities(state), 0.0, None)
        total = p.sum()
        if abs(total - 1) >= PROB_TOTAL_TOL:
            raise NumericalInconsistency(f"outcome probabilities sum to {total!r}")
        return p / total


def _diagonal(state: TwoModeState) -> np.ndarray:
    if state.vector is not None:
        return np.abs(state.vector) ** 2
    if state.matrix is not None:
        return np.diag(state.matrix).real.copy()
    d = np.zeros(state.basis.dim)
    for N, b in state.blocks.items():
        d[state.basis.block_index[N]] = np.diag(b).real
    return d


def _diagonal_povm(basis: FockBasis, keys: np.ndarray) -> Povm:
    labels = sorted(set(keys.tolist()))
    elements = []
    for lab in labels:
        elements.append(sp.diags((keys == lab).astype(float)).tocsr())
    povm = Povm(basis, tuple(labels), tuple(elements))
    povm.check()
    return povm


def povm_number_difference(basis: FockBasis) -> Povm:
    """Projectors onto J_z eigenspaces, outcome lambda = (n_a - n_b) / 2."""
    return _diagonal_povm(basis, 0.5 * (basis.n_a - basis.n_b))


def povm_parity(basis: FockBasis, port: str = "b") -> Povm:
    """Even (+1) / odd (-1) occupation of one output port."""
    if port not in ("a", "b"):
        raise InvalidArgument("port must be 'a' or 'b'")
    n = basis.n_a if port == "a" else basis.n_b
    return _diagonal_povm(basis, np.where(n % 2 == 0, 1, -1))


def povm_photon_counting(basis: FockBasis) -> Povm:
    """Joint occupation (n_a, n_b) of both output ports."""
    idx = np.arange(basis.dim)
    elements = [sp.csr_matrix(([1.0], ([i], [i])), shape=(basis.dim, basis.dim)) for i in idx]
    labels = tuple(map(tuple, basis.index_map.tolist()))
    povm = Povm(basis, labels, tuple(elements))
    povm.check()
    return povm


def povm_identity(basis: FockBasis) -> Povm:
    povm = Povm(basis, (0,), (sp.identity(basis.dim, format="csr"),))
    povm.check()
    return povm


# ---------------------------------------------------------------------------
# sampling and likelihood
# ---------------------------------------------------------------------------

def outcome_probabilities(state, theta, direction, povm: Povm) -> np.ndarray:
    return povm.probabilities(evolve(state, theta, direction))


def sample_indices(state, theta, direction, povm: Povm, m: int, rng) -> np.ndarray:
    if m < 1:
        raise InvalidArgument("m must be >= 1")
    p = outcome_probabilities(state, theta, direction, povm)
    return rng.choice(len(p), size=m, p=p)


def sample_outcomes(state, theta, direction, povm: Povm, m: int, rng) -> list:
    """m i.i.d. outcome labels drawn from P(lambda|theta) = tr[E(lambda) rho(theta)]."""
    idx = sample_indices(state, theta, direction, povm, m, rng)
    return [povm.labels[i] for i in idx]


class LikelihoodModel:
    """P(lambda|theta) for a fixed state, rotation axis and POVM, with a grid cache."""

    def __init__(self, state: TwoModeState, direction: Sequence[float], povm: Povm):
        self.state = state
        self.povm = povm
        self.generator = spin_generator(state.basis, direction)
        self._grid: tuple | None = None
        self._fast = state.is_pure and povm.diagonal_outcome is not None and (
            self.generator.number_conserving
        )
        if self._fast:
            # amplitudes in each block's generator eigenbasis
            self._coeffs = {}
            for N, idx in state.basis.block_index.items():
                v = state.vector[idx]
                if np.any(v):
                    w, V = self.generator.eig[N]
                    self._coeffs[N] = (idx, w, V, V.conj().T @ v)

    def probabilities(self, theta: float) -> np.ndarray:
        if not self._fast:
            return self.povm.probabilities(self.generator.rotate(self.state, theta))
        diag = np.zeros(self.state.basis.dim)
        for idx, w, V, c in self._coeffs.values():
            diag[idx] = np.abs(V @ (np.exp(-1j * theta * w) * c)) ** 2
        p = np.bincount(self.povm.diagonal_outcome, weights=diag, minlength=len(self.povm))
        total = p.sum()
        if abs(total - 1) >= PROB_TOTAL_TOL:
            raise NumericalInconsistency(f"outcome probabilities sum to {total!r}")
        return p / total

    def log_probabilities(self, theta: float) -> np.ndarray:
        return np.log(np.maximum(self.probabilities(theta), LOG_FLOOR))

    def grid(self, window: tuple[float, float], points: int) -> tuple[np.ndarray, np.ndarray]:
        key = (float(window[0]), float(window[1]), int(points))
        if self._grid is None or self._grid[0] != key:
            thetas = np.linspace(window[0], window[1], points)
            table = np.array([self.log_probabilities(t) for t in thetas])
            self._grid = (key, thetas, table)
        return self._grid[1], self._grid[2]

    def fisher(self, theta: float, dtheta: float = 1e-5) -> float:
        p0 = self.probabilities(theta)
        dp = (self.probabilities(theta + dtheta) - self.probabilities(theta - dtheta)) / (
            2 * dtheta
        )
        keep = p0 > 1e-12
        return float(np.sum(dp[keep] ** 2 / p0[keep]))


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _ml_from_counts(
    counts: np.ndarray,
    model: LikelihoodModel,
    window: tuple[float, float],
    grid_points: int,
    tol: float,
) -> float:
    thetas, table = model.grid(window, grid_points)
    nz = np.nonzero(counts)[0]
    ll = table[:, nz] @ counts[nz]
    if np.ptp(ll) <= 1e-12 * max(1.0, np.abs(ll).max()):
        raise EstimatorUndefined("log-likelihood is flat over the window")
    i = int(np.argmax(ll))
    lo = thetas[max(i - 1, 0)]
    hi = thetas[min(i + 1, len(thetas) - 1)]

    def f(t):
        return float(model.log_probabilities(t)[nz] @ counts[nz])

    return _golden_max(f, lo, hi, tol)


def ml_estimate(
    samples,
    state: TwoModeState,
    direction: Sequence[float],
    povm: Povm,
    window: tuple[float, float],
    *,
    grid_points: int = 1000,
    tol: float = 1e-6,
    model: LikelihoodModel | None = None,
) -> float:
    """Maximize sum_i log P(lambda_i|theta) over ``window``.

    Coarse grid search followed by golden-section refinement around the best
    grid point.
    """
    if window[0] >= window[1]:
        raise InvalidArgument("window must satisfy theta_min < theta_max")
    if model is None:
        model = LikelihoodModel(state, direction, povm)
    idx = np.array([povm.index_of(s) for s in samples], dtype=int)
    counts = np.bincount(idx, minlength=len(povm)).astype(float)
    return _ml_from_counts(counts, model, window, grid_points, tol)


# ---------------------------------------------------------------------------
# Monte Carlo runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EstimationRun:
    theta_true: float
    m: int
    n_trials: int
    seed: int
    window: tuple[float, float]
    estimates: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.estimates))

    @property
    def std(self) -> float:
        return float(np.std(self.estimates, ddof=1)) if self.n_trials > 1 else 0.0

    @property
    def rms_error(self) -> float:
        return float(np.sqrt(np.mean((self.estimates - self.theta_true) ** 2)))

    @property
    def bias_ok(self) -> bool:
        """|mean - theta| < 3 std / sqrt(n_trials)."""
        return abs(self.mean - self.theta_true) < 3 * self.std / math.sqrt(self.n_trials)


def default_window(theta0: float) -> tuple[float, float]:
    return (theta0 - math.pi / 4, theta0 + math.pi / 4)


def run_estimation(
    state: TwoModeState,
    theta_true: float,
    direction: Sequence[float],
    povm: Povm,
    m: int,
    n_trials: int,
    seed: int,
    window: tuple[float, float] | None = None,
    *,
    grid_points: int = 1000,
    tol: float = 1e-6,
) -> EstimationRun:
    """n_trials independent ML estimates from m measurements each.

    Trial ``i`` draws from ``default_rng([seed, i])`` so runs are reproducible
    and independent of evaluation order.
    """
    if m < 1 or n_trials < 1:
        raise InvalidArgument("m and n_trials must be >= 1")
    window = default_window(theta_true) if window is None else tuple(window)
    if not window[0] <= theta_true <= window[1]:
        raise InvalidArgument("theta_true lies outside the estimation window")
    model = LikelihoodModel(state, direction, povm)
    p = model.probabilities(theta_true)
    estimates = np.empty(n_trials)
    for i in range(n_trials):
        rng = np.random.default_rng([seed, i])
        draws = rng.choice(len(p), size=m, p=p)
        counts = np.bincount(draws, minlength=len(p)).astype(float)
        estimates[i] = _ml_from_counts(counts, model, window, grid_points, tol)
    return EstimationRun(theta_true, m, n_trials, seed, window, estimates)


def find_working_point(
    state: TwoModeState,
    direction: Sequence[float],
    povm: Povm,
    lo: float = 0.05,
    hi: float = math.pi - 0.05,
    points: int = 64,
) -> tuple[float, float]:
    """(theta, F_E) maximizing the classical Fisher information on a coarse scan."""
    model = LikelihoodModel(state, direction, povm)
    thetas = np.linspace(lo, hi, points)
    fis = np.array([model.fisher(t) for t in thetas])
    i = int(np.argmax(fis))
    return float(thetas[i]), float(fis[i])


def fisher_along(state, direction, povm, theta, dtheta=1e-5, richardson=False) -> float:
    """classical_fisher for a spin rotation axis."""
    return classical_fisher(
        state, spin_generator(state.basis, direction), theta, povm, dtheta, richardson
    )
