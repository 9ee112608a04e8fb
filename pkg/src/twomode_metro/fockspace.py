"""Truncated two-mode Fock space, Schwinger spin operators and state constructors.

Basis states |n_a, n_b> are ordered lexicographically in (n_a, n_b), so the
flat index is ``n_a * (cutoff_b + 1) + n_b``.  Everything number-conserving is
block diagonal in the total particle number N = n_a + n_b; many routines
below work block by block and never form a dense full-space matrix.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.spatial.transform import Rotation
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import InvalidArgument, NotIncoherentError, TruncationError

TAIL_THRESHOLD = 1e-10
AUTO_CUTOFF_CAP = 4000
DENSE_DIM_LIMIT = 4096

NORM_TOL = 1e-10
HERM_TOL = 1e-10
PSD_TOL = -1e-10
BLOCK_TOL = 1e-10


# ---------------------------------------------------------------------------
# basis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FockBasis:
    """Two-mode Fock basis with per-mode occupation cutoffs.

    ``cutoff_b`` defaults to ``cutoff_a``; the symmetric case has dimension
    ``(cutoff + 1)**2``.
    """

    cutoff_a: int
    cutoff_b: int

    @property
    def cutoff(self) -> int:
        return max(self.cutoff_a, self.cutoff_b)

    @property
    def dim(self) -> int:
        return (self.cutoff_a + 1) * (self.cutoff_b + 1)

    @property
    def max_N(self) -> int:
        return self.cutoff_a + self.cutoff_b

    @property
    def complete_max_N(self) -> int:
        """Largest N whose block is not cut by the truncation."""
        return min(self.cutoff_a, self.cutoff_b)

    @cached_property
    def index_map(self) -> np.ndarray:
        """(dim, 2) integer array of occupations (n_a, n_b) per basis index."""
        na, nb = np.meshgrid(
            np.arange(self.cutoff_a + 1), np.arange(self.cutoff_b + 1), indexing="ij"
        )
        return np.stack([na.ravel(), nb.ravel()], axis=1)

    @property
    def n_a(self) -> np.ndarray:
        return self.index_map[:, 0]

    @property
    def n_b(self) -> np.ndarray:
        return self.index_map[:, 1]

    @cached_property
    def total_N(self) -> np.ndarray:
        return self.index_map.sum(axis=1)

    @cached_property
    def block_index(self) -> dict[int, np.ndarray]:
        out = {}
        for N in range(self.max_N + 1):
            lo, hi = max(0, N - self.cutoff_b), min(N, self.cutoff_a)
            na = np.arange(lo, hi + 1)
            out[N] = na * (self.cutoff_b + 1) + (N - na)
        return out

    def index(self, n_a: int, n_b: int) -> int:
        if not (0 <= n_a <= self.cutoff_a and 0 <= n_b <= self.cutoff_b):
            raise InvalidArgument(f"occupation ({n_a}, {n_b}) outside truncation")
        return n_a * (self.cutoff_b + 1) + n_b

    def block_occupations(self, N: int) -> np.ndarray:
        """n_a values of the N-block, in basis order."""
        return self.n_a[self.block_index[N]]


def build_basis(cutoff: int, cutoff_b: int | None = None) -> FockBasis:
    if cutoff_b is None:
        cutoff_b = cutoff
    for c in (cutoff, cutoff_b):
        if int(c) != c or c < 1:
            raise InvalidArgument(f"cutoff must be an integer >= 1, got {c!r}")
    return FockBasis(int(cutoff), int(cutoff_b))


# ---------------------------------------------------------------------------
# spin operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpinOperators:
    basis: FockBasis
    Jx: sp.csr_matrix
    Jy: sp.csr_matrix
    Jz: sp.csr_matrix
    Ntot: sp.csr_matrix

    def along(self, n: Sequence[float]) -> sp.csr_matrix:
        n = _unit(n)
        return (n[0] * self.Jx + n[1] * self.Jy + n[2] * self.Jz).tocsr()


def _raise_a_lower_b(basis: FockBasis) -> sp.csr_matrix:
    """a^dagger b on the truncated basis."""
    na, nb = basis.n_a, basis.n_b
    src = np.nonzero((nb >= 1) & (na + 1 <= basis.cutoff_a))[0]
    dst = src + (basis.cutoff_b + 1) - 1
    vals = np.sqrt((na[src] + 1.0) * nb[src])
    return sp.csr_matrix((vals, (dst, src)), shape=(basis.dim, basis.dim))


@lru_cache(maxsize=16)
def spin_operators(basis: FockBasis) -> SpinOperators:
    """Schwinger representation of J_x, J_y, J_z and N on ``basis``."""
    ab = _raise_a_lower_b(basis)
    ba = ab.T.tocsr()
    na, nb = basis.n_a.astype(float), basis.n_b.astype(float)
    Jx = ((ab + ba) * 0.5).astype(complex).tocsr()
    Jy = ((ab - ba) * (-0.5j)).tocsr()
    Jz = sp.diags(0.5 * (na - nb)).astype(complex).tocsr()
    Ntot = sp.diags(na + nb).astype(complex).tocsr()
    return SpinOperators(basis, Jx, Jy, Jz, Ntot)


def block_spin_operator(basis: FockBasis, N: int, n: Sequence[float]) -> np.ndarray:
    """Dense J_n restricted to the N-block, built directly from occupations."""
    n = _unit(n)
    na = basis.block_occupations(N).astype(float)
    nb = N - na
    d = len(na)
    J = np.diag(0.5 * n[2] * (na - nb)).astype(complex)
    if d > 1:
        # consecutive block entries differ by one particle moved b -> a
        amp = np.sqrt((na[:-1] + 1.0) * nb[:-1])
        up = 0.5 * amp * (n[0] - 1j * n[1])  # <i+1| (n_x J_x + n_y J_y) |i>
        J[np.arange(1, d), np.arange(d - 1)] = up
        J[np.arange(d - 1), np.arange(1, d)] = up.conj()
    return J


def _unit(n: Sequence[float]) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    norm = np.linalg.norm(n)
    if n.shape != (3,) or norm == 0:
        raise InvalidArgument("direction must be a non-zero 3-vector")
    return n / norm


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpinFrame:
    n1: tuple[float, float, float]
    n2: tuple[float, float, float]
    n3: tuple[float, float, float]

    def __post_init__(self):
        m = self.matrix
        if np.abs(m.T @ m - np.eye(3)).max() > 1e-12:
            raise InvalidArgument("frame vectors are not orthonormal")
        if np.abs(np.cross(m[:, 0], m[:, 1]) - m[:, 2]).max() > 1e-12:
            raise InvalidArgument("frame is not right-handed")

    @property
    def matrix(self) -> np.ndarray:
        """Columns are n1, n2, n3."""
        return np.column_stack([self.n1, self.n2, self.n3]).astype(float)

    @classmethod
    def from_vectors(cls, n1, n2) -> "SpinFrame":
        n1 = _unit(n1)
        n2 = np.asarray(n2, float) - np.dot(n2, n1) * n1
        n2 = _unit(n2)
        n3 = np.cross(n1, n2)
        return cls(tuple(n1), tuple(n2), tuple(n3))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "SpinFrame":
        m = Rotation.random(random_state=rng).as_matrix()
        return cls.from_vectors(m[:, 0], m[:, 1])

    def rotated_about_n3(self, angle: float) -> "SpinFrame":
        m = self.matrix
        c, s = math.cos(angle), math.sin(angle)
        n1 = c * m[:, 0] + s * m[:, 1]
        n2 = -s * m[:, 0] + c * m[:, 1]
        return SpinFrame.from_vectors(n1, n2)


def mach_zehnder_frame() -> SpinFrame:
    """Rotation axis n2 = y and squeezing direction n3 = x (so n1 = -z)."""
    return SpinFrame((0.0, 0.0, -1.0), (0.0, 1.0, 0.0), (1.0, 0.0, 0.0))


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TwoModeState:
    """Pure or mixed state on a :class:`FockBasis`.

    Exactly one of ``vector`` (pure), ``matrix`` (dense mixed) or ``blocks``
    (block-diagonal mixed, keyed by total N, local block coordinates) is set.
    """

    basis: FockBasis
    vector: np.ndarray | None = None
    matrix: np.ndarray | None = None
    blocks: dict[int, np.ndarray] | None = None
    trace_tail: float = 0.0
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        given = [x is not None for x in (self.vector, self.matrix, self.blocks)]
        if sum(given) != 1:
            raise InvalidArgument("exactly one of vector, matrix, blocks must be given")
        if self.trace_tail < 0:
            raise InvalidArgument("trace_tail must be non-negative")
        if self.validate:
            self._check()

    def _check(self):
        d = self.basis.dim
        if self.vector is not None:
            if self.vector.shape != (d,):
                raise InvalidArgument(f"vector must have shape ({d},)")
            if abs(np.linalg.norm(self.vector) - 1) > NORM_TOL:
                raise InvalidArgument("pure state is not normalized")
            return
        mats = [self.matrix] if self.matrix is not None else list(self.blocks.values())
        if self.matrix is not None and self.matrix.shape != (d, d):
            raise InvalidArgument(f"matrix must have shape ({d}, {d})")
        if self.blocks is not None:
            for N, b in self.blocks.items():
                k = len(self.basis.block_index[N])
                if b.shape != (k, k):
                    raise InvalidArgument(f"block {N} must have shape ({k}, {k})")
        trace = 0.0
        for m in mats:
            if np.abs(m - m.conj().T).max(initial=0) > HERM_TOL:
                raise InvalidArgument("density matrix is not Hermitian")
            if m.size and np.linalg.eigvalsh(m).min() < PSD_TOL:
                raise InvalidArgument("density matrix is not positive semidefinite")
            trace += np.trace(m).real
        if abs(trace - 1) > NORM_TOL:
            raise InvalidArgument(f"density matrix trace is {trace}, expected 1")

    # -- representation helpers --------------------------------------------

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    @property
    def kind(self) -> str:
        return "pure" if self.is_pure else "mixed"

    def density_matrix(self) -> np.ndarray:
        """Dense full-space density matrix (only for moderate dimensions)."""
        if self.basis.dim > DENSE_DIM_LIMIT:
            raise InvalidArgument(
                f"dimension {self.basis.dim} too large for a dense density matrix"
            )
        if self.matrix is not None:
            return self.matrix
        if self.vector is not None:
            return np.outer(self.vector, self.vector.conj())
        rho = np.zeros((self.basis.dim, self.basis.dim), complex)
        for N, b in self.blocks.items():
            idx = self.basis.block_index[N]
            rho[np.ix_(idx, idx)] = b
        return rho

    def block(self, N: int) -> np.ndarray:
        """Unnormalized projection 1_N rho 1_N in local block coordinates."""
        idx = self.basis.block_index[N]
        if self.vector is not None:
            v = self.vector[idx]
            return np.outer(v, v.conj())
        if self.matrix is not None:
            return self.matrix[np.ix_(idx, idx)]
        b = self.blocks.get(N)
        return np.zeros((len(idx), len(idx)), complex) if b is None else b

    def block_weights(self) -> np.ndarray:
        """Q_N for N = 0 .. basis.max_N."""
        if self.vector is not None:
            p = np.abs(self.vector) ** 2
        elif self.matrix is not None:
            p = np.diag(self.matrix).real
        else:
            q = np.zeros(self.basis.max_N + 1)
            for N, b in self.blocks.items():
                q[N] = np.trace(b).real
            return q
        return np.bincount(self.basis.total_N, weights=p, minlength=self.basis.max_N + 1)

    def off_block_norm(self) -> float:
        """Frobenius norm of all coherences between different N."""
        if self.blocks is not None:
            return 0.0
        if self.vector is not None:
            q = self.block_weights()
            return math.sqrt(max(0.0, 1.0 - float(np.sum(q**2))))
        N = self.basis.total_N
        mask = N[:, None] != N[None, :]
        return float(np.linalg.norm(self.matrix[mask]))

    def is_block_diagonal(self, tol: float = BLOCK_TOL) -> bool:
        return self.off_block_norm() <= tol

    # -- expectations -------------------------------------------------------

    def expect(self, op) -> complex:
        """tr(op rho) for a dense or sparse operator."""
        if self.vector is not None:
            v = self.vector
            return complex(np.vdot(v, op @ v))
        if self.matrix is not None:
            if sp.issparse(op):
                return complex(op.multiply(self.matrix.T).sum())
            return complex(np.einsum("ij,ji->", op, self.matrix))
        # block-diagonal rho only sees the diagonal blocks of op
        op = sp.csr_matrix(op)
        total = 0j
        for N, b in self.blocks.items():
            idx = self.basis.block_index[N]
            sub = op[idx][:, idx].toarray()
            total += np.einsum("ij,ji->", sub, b)
        return complex(total)

    def variance(self, op) -> float:
        if self.vector is not None:
            w = op @ self.vector
            mean = np.vdot(self.vector, w).real
            return float(np.vdot(w, w).real - mean**2)
        mean = self.expect(op).real
        return float(self.expect(op @ op).real - mean**2)

    def mean_N(self) -> float:
        q = self.block_weights()
        return float(np.dot(np.arange(len(q)), q))

    def mean_N2(self) -> float:
        q = self.block_weights()
        return float(np.dot(np.arange(len(q)) ** 2, q))

    def purity(self) -> float:
        if self.vector is not None:
            return 1.0
        if self.matrix is not None:
            return float(np.sum(np.abs(self.matrix) ** 2))
        return float(sum(np.sum(np.abs(b) ** 2) for b in self.blocks.values()))


def pure_state(basis: FockBasis, vector, trace_tail: float = 0.0) -> TwoModeState:
    """Normalize ``vector`` and wrap it."""
    v = np.asarray(vector, dtype=complex)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise InvalidArgument("zero vector")
    return TwoModeState(basis, vector=v / norm, trace_tail=trace_tail)


def mixed_state(basis: FockBasis, matrix, trace_tail: float = 0.0) -> TwoModeState:
    m = np.asarray(matrix, dtype=complex)
    return TwoModeState(basis, matrix=m, trace_tail=trace_tail)


def fock_state(n_a: int, n_b: int, basis: FockBasis) -> TwoModeState:
    v = np.zeros(basis.dim, complex)
    v[basis.index(n_a, n_b)] = 1.0
    return TwoModeState(basis, vector=v)


def noon_state(N: int, basis: FockBasis) -> TwoModeState:
    if N < 1:
        raise InvalidArgument("NOON state needs N >= 1")
    v = np.zeros(basis.dim, complex)
    v[basis.index(N, 0)] = v[basis.index(0, N)] = 1 / math.sqrt(2)
    return TwoModeState(basis, vector=v)


# ---------------------------------------------------------------------------
# single-mode amplitudes and the Caves state
# ---------------------------------------------------------------------------

class ModeVector(NamedTuple):
    amplitudes: np.ndarray
    trace_tail: float


def required_cutoff_coherent(alpha_mag: float, tail: float = TAIL_THRESHOLD) -> int:
    """Smallest cutoff c with P(n > c) < tail for a coherent state."""
    mean = float(alpha_mag) ** 2
    if mean == 0:
        return 0
    c = int(mean)
    while poisson.sf(c, mean) >= tail:
        c += max(1, int(math.sqrt(mean) / 4))
    while c > 0 and poisson.sf(c - 1, mean) < tail:
        c -= 1
    return c


def _squeezed_log_weights(r: float, kmax: int) -> np.ndarray:
    """log P(2k) for k = 0 .. kmax."""
    k = np.arange(kmax + 1)
    return (
        gammaln(2 * k + 1)
        - 2 * gammaln(k + 1)
        - k * math.log(4.0)
        + 2 * k * math.log(math.tanh(r))
        - math.log(math.cosh(r))
    )


def _squeezed_tail(r: float, cutoff: int) -> float:
    t2 = math.tanh(r) ** 2
    if t2 == 0.0:
        return 0.0
    k0 = cutoff // 2 + 1
    # terms decay at least as fast as t2**k; sum until negligible
    kmax = k0 + int(math.ceil(80.0 / max(-math.log(t2), 1e-12))) + 10
    lw = _squeezed_log_weights(r, kmax)[k0:]
    return float(np.exp(lw).sum())


def required_cutoff_squeezed(r: float, tail: float = TAIL_THRESHOLD) -> int:
    if math.tanh(r) ** 2 == 0.0:
        return 0
    lo, hi = 0, 2
    while _squeezed_tail(r, hi) >= tail:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _squeezed_tail(r, mid) >= tail:
            lo = mid
        else:
            hi = mid
    return hi


def _resolve_mode_cutoff(basis: FockBasis, mode: str) -> int:
    if mode == "a":
        return basis.cutoff_a
    if mode == "b":
        return basis.cutoff_b
    raise InvalidArgument("mode must be 'a' or 'b'")


def coherent_state(
    alpha: complex, basis: FockBasis, mode: str = "a", tail: float = TAIL_THRESHOLD
) -> ModeVector:
    c = _resolve_mode_cutoff(basis, mode)
    mag, phase = abs(alpha), np.angle(alpha)
    if mag == 0:
        v = np.zeros(c + 1, complex)
        v[0] = 1
        return ModeVector(v, 0.0)
    lost = float(poisson.sf(c, mag**2))
    if lost >= tail:
        need = required_cutoff_coherent(mag, tail)
        raise TruncationError(
            f"coherent state |alpha|={mag:g} loses {lost:.3g} beyond cutoff {c}; "
            f"need cutoff >= {need}",
            required_cutoff=need,
        )
    n = np.arange(c + 1)
    logmag = -0.5 * mag**2 + n * math.log(mag) - 0.5 * gammaln(n + 1)
    v = np.exp(logmag + 1j * n * phase)
    return ModeVector(v / np.linalg.norm(v), lost)


def squeezed_vacuum(
    zeta: complex, basis: FockBasis, mode: str = "b", tail: float = TAIL_THRESHOLD
) -> ModeVector:
    c = _resolve_mode_cutoff(basis, mode)
    r, theta = abs(zeta), np.angle(zeta)
    v = np.zeros(c + 1, complex)
    if r == 0:
        v[0] = 1
        return ModeVector(v, 0.0)
    lost = _squeezed_tail(r, c)
    if lost >= tail:
        need = required_cutoff_squeezed(r, tail)
        raise TruncationError(
            f"squeezed vacuum r={r:g} loses {lost:.3g} beyond cutoff {c}; "
            f"need cutoff >= {need}",
            required_cutoff=need,
        )
    kmax = c // 2
    k = np.arange(kmax + 1)
    logmag = 0.5 * _squeezed_log_weights(r, kmax)
    # (-e^{i theta} tanh r)^k
    v[2 * k] = np.exp(logmag + 1j * k * (math.pi + theta))
    return ModeVector(v / np.linalg.norm(v), lost)


@dataclass(frozen=True)
class CavesParams:
    """Coherent |alpha> in mode a, squeezed vacuum |zeta> in mode b."""

    alpha_mag: float
    phi_alpha: float = 0.0
    r: float = 0.0
    theta_zeta: float | None = None

    def __post_init__(self):
        if self.alpha_mag < 0 or self.r < 0:
            raise InvalidArgument("alpha_mag and r must be non-negative")
        if self.theta_zeta is None:
            # phase locking 2 phi_alpha = theta_zeta
            object.__setattr__(self, "theta_zeta", 2 * self.phi_alpha)

    @property
    def alpha(self) -> complex:
        return self.alpha_mag * np.exp(1j * self.phi_alpha)

    @property
    def zeta(self) -> complex:
        return self.r * np.exp(1j * self.theta_zeta)

    @property
    def mean_N(self) -> float:
        return self.alpha_mag**2 + math.sinh(self.r) ** 2

    @property
    def phase_locked(self) -> bool:
        d = (2 * self.phi_alpha - self.theta_zeta) / (2 * math.pi)
        return abs(d - round(d)) < 1e-12


def auto_cutoff(params: CavesParams, tail: float = TAIL_THRESHOLD) -> FockBasis:
    """Smallest per-mode cutoffs keeping each mode's tail below ``tail``."""
    ca = max(1, required_cutoff_coherent(params.alpha_mag, tail))
    cb = max(1, required_cutoff_squeezed(params.r, tail))
    if max(ca, cb) > AUTO_CUTOFF_CAP:
        raise TruncationError(
            f"auto cutoff {max(ca, cb)} exceeds cap {AUTO_CUTOFF_CAP}",
            required_cutoff=max(ca, cb),
        )
    return build_basis(ca, cb)


def caves_state(
    params: CavesParams, basis: FockBasis | None = None, tail: float = TAIL_THRESHOLD
) -> TwoModeState:
    if basis is None:
        basis = auto_cutoff(params, tail)
    a = coherent_state(params.alpha, basis, "a", tail)
    b = squeezed_vacuum(params.zeta, basis, "b", tail)
    v = np.outer(a.amplitudes, b.amplitudes).ravel()
    lost = 1 - (1 - a.trace_tail) * (1 - b.trace_tail)
    return TwoModeState(basis, vector=v / np.linalg.norm(v), trace_tail=lost)


# ---------------------------------------------------------------------------
# symmetric embeddings of single-particle states
# ---------------------------------------------------------------------------

def _check_block_complete(basis: FockBasis, N: int):
    if N > basis.complete_max_N:
        raise InvalidArgument(
            f"N={N} exceeds the largest untruncated block {basis.complete_max_N}"
        )


def _embed_block(basis: FockBasis, N: int, amps_by_na: np.ndarray) -> np.ndarray:
    """Full-space vector from amplitudes indexed by n_a = 0..N."""
    v = np.zeros(basis.dim, complex)
    na = basis.block_occupations(N)
    v[basis.block_index[N]] = amps_by_na[na]
    return v


def identical_product_amplitudes(N: int, u: complex, v: complex) -> np.ndarray:
    """(u a^dag + v b^dag)^N / sqrt(N!) |0>, amplitudes indexed by n_a."""
    k = np.arange(N + 1)
    logc = 0.5 * (gammaln(N + 1) - gammaln(k + 1) - gammaln(N - k + 1))
    with np.errstate(divide="ignore"):
        out = np.exp(logc) * np.power(complex(u), k) * np.power(complex(v), N - k)
    return out


def spin_coherent_state(
    N: int, polar: float, azimuth: float, basis: FockBasis
) -> TwoModeState:
    """N particles in cos(polar/2)|a> + e^{i azimuth} sin(polar/2)|b>.

    Mean spin points along (sin p cos a, sin p sin a, cos p) with length N/2.
    """
    _check_block_complete(basis, N)
    u, w = math.cos(polar / 2), np.exp(1j * azimuth) * math.sin(polar / 2)
    amps = identical_product_amplitudes(N, u, w)
    return pure_state(basis, _embed_block(basis, N, amps))


def spin_coherent_along(N: int, n: Sequence[float], basis: FockBasis) -> TwoModeState:
    n = _unit(n)
    polar = math.acos(np.clip(n[2], -1, 1))
    return spin_coherent_state(N, polar, math.atan2(n[1], n[0]), basis)


def symmetrized_product_state(
    phis: Sequence[tuple[complex, complex]], basis: FockBasis
) -> TwoModeState:
    """Bosonic embedding of prod_j (u_j a^dag + v_j b^dag) |0>, normalized.

    For distinct single-particle states this is generally entangled,
    e.g. |a>|b> symmetrizes to the twin-Fock state |1, 1>.
    """
    N = len(phis)
    _check_block_complete(basis, N)
    poly = np.array([1.0 + 0j])  # coefficients in powers of x (mode a)
    for u, w in phis:
        poly = np.convolve(poly, np.array([w, u], complex))
    k = np.arange(N + 1)
    amps = poly * np.exp(0.5 * (gammaln(k + 1) + gammaln(N - k + 1)))
    return pure_state(basis, _embed_block(basis, N, amps))


def _random_qubit(rng: np.random.Generator) -> tuple[complex, complex]:
    z = rng.normal(size=2) + 1j * rng.normal(size=2)
    z /= np.linalg.norm(z)
    return complex(z[0]), complex(z[1])


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_separable_state(
    seed,
    max_N: int,
    n_terms: int,
    basis: FockBasis | None = None,
    *,
    min_N: int = 0,
    phi: tuple[complex, complex] | None = None,
) -> TwoModeState:
    """Incoherent mixture over N of mixtures of identical-particle products.

    Block weights Q_N are a uniform simplex draw over ``min_N..max_N``; each
    N-block is a ``n_terms``-component mixture of |phi>^N with Haar-random
    single-particle |phi> (or the fixed ``phi`` if given).
    """
    rng = _as_rng(seed)
    if basis is None:
        basis = build_basis(max(1, max_N))
    if not 0 <= min_N <= max_N:
        raise InvalidArgument("need 0 <= min_N <= max_N")
    if n_terms < 1:
        raise InvalidArgument("n_terms must be >= 1")
    _check_block_complete(basis, max_N)
    Ns = np.arange(min_N, max_N + 1)
    Q = rng.dirichlet(np.ones(len(Ns)))
    blocks = {}
    for N, q in zip(Ns, Q):
        P = rng.dirichlet(np.ones(n_terms))
        rho = np.zeros((N + 1, N + 1), complex)
        for p in P:
            u, w = phi if phi is not None else _random_qubit(rng)
            amp = identical_product_amplitudes(int(N), u, w)
            amp /= np.linalg.norm(amp)
            rho += p * np.outer(amp, amp.conj())
        # local block coordinates follow basis order; n_a = 0..N for complete blocks
        blocks[int(N)] = q * rho
    return TwoModeState(basis, blocks=blocks)


def random_separable_coherent_state(
    seed,
    max_N: int,
    n_terms: int,
    basis: FockBasis | None = None,
    *,
    min_N: int = 0,
) -> TwoModeState:
    """Mixture of pure states sum_N sqrt(Q_N) e^{i chi_N} |phi_N>^N.

    Each component superposes identical-particle products from different
    N-blocks with random weights, phases and single-particle states.
    """
    rng = _as_rng(seed)
    if basis is None:
        basis = build_basis(max(1, max_N))
    if not 0 <= min_N <= max_N:
        raise InvalidArgument("need 0 <= min_N <= max_N")
    if n_terms < 1:
        raise InvalidArgument("n_terms must be >= 1")
    _check_block_complete(basis, max_N)
    if basis.dim > DENSE_DIM_LIMIT:
        raise InvalidArgument("basis too large for a dense coherent mixture")
    Ns = range(min_N, max_N + 1)
    p = rng.dirichlet(np.ones(n_terms))
    rho = np.zeros((basis.dim, basis.dim), complex)
    for pk in p:
        Q = rng.dirichlet(np.ones(len(Ns)))
        chi = rng.uniform(0, 2 * np.pi, size=len(Ns))
        psi = np.zeros(basis.dim, complex)
        for N, q, c in zip(Ns, Q, chi):
            u, w = _random_qubit(rng)
            amp = identical_product_amplitudes(N, u, w)
            amp /= np.linalg.norm(amp)
            psi += math.sqrt(q) * np.exp(1j * c) * _embed_block(basis, N, amp)
        psi /= np.linalg.norm(psi)
        rho += pk * np.outer(psi, psi.conj())
    rho = 0.5 * (rho + rho.conj().T)
    return TwoModeState(basis, matrix=rho)


def _support(basis: FockBasis, max_N: int | None) -> np.ndarray:
    if max_N is None:
        return np.arange(basis.dim)
    return np.flatnonzero(basis.total_N <= max_N)


def random_pure_state(seed, basis: FockBasis, max_N: int | None = None) -> TwoModeState:
    """Haar-random pure state on the basis states with N <= max_N."""
    rng = _as_rng(seed)
    idx = _support(basis, max_N)
    v = np.zeros(basis.dim, complex)
    v[idx] = rng.normal(size=idx.size) + 1j * rng.normal(size=idx.size)
    return pure_state(basis, v / np.linalg.norm(v))


def _ginibre_density(rng: np.random.Generator, d: int, rank: int) -> np.ndarray:
    A = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


def random_mixed_state(
    seed, basis: FockBasis, rank: int = 2, max_N: int | None = None
) -> TwoModeState:
    """Ginibre-random density matrix of the given rank, with coherences across N."""
    if rank < 1:
        raise InvalidArgument("rank must be >= 1")
    rng = _as_rng(seed)
    idx = _support(basis, max_N)
    rho = np.zeros((basis.dim, basis.dim), complex)
    rho[np.ix_(idx, idx)] = _ginibre_density(rng, idx.size, rank)
    return mixed_state(basis, 0.5 * (rho + rho.conj().T))


def random_block_state(
    seed, basis: FockBasis, rank: int = 2, max_N: int | None = None
) -> TwoModeState:
    """Random block-diagonal state: Dirichlet weights times Ginibre blocks."""
    if rank < 1:
        raise InvalidArgument("rank must be >= 1")
    rng = _as_rng(seed)
    Ns = [N for N in basis.block_index if max_N is None or N <= max_N]
    Q = rng.dirichlet(np.ones(len(Ns)))
    blocks = {}
    for N, q in zip(Ns, Q):
        d = basis.block_index[N].size
        blocks[N] = q * _ginibre_density(rng, d, min(rank, d))
    return TwoModeState(basis, blocks=blocks)


# ---------------------------------------------------------------------------
# superselection projection and block decomposition
# ---------------------------------------------------------------------------

def ssr_project(state: TwoModeState) -> TwoModeState:
    """sum_N 1_N rho 1_N, stored block-diagonally."""
    if state.blocks is not None:
        return state
    blocks = {N: state.block(N).copy() for N in state.basis.block_index}
    return TwoModeState(
        state.basis, blocks=blocks, trace_tail=state.trace_tail, validate=False
    )


@dataclass(frozen=True, eq=False)
class BlockSpectrum:
    basis: FockBasis
    weights: np.ndarray  # Q_N for N = 0 .. basis.max_N
    block_states: dict[int, np.ndarray]  # normalized rho^(N), only where Q_N > 0

    def recompose(self) -> TwoModeState:
        blocks = {N: self.weights[N] * r for N, r in self.block_states.items()}
        return TwoModeState(self.basis, blocks=blocks)


def decompose_blocks(state: TwoModeState, tol: float = BLOCK_TOL) -> BlockSpectrum:
    off = state.off_block_norm()
    if off > tol:
        raise NotIncoherentError(f"off-block coherence norm {off:.3g} exceeds {tol:g}")
    Q = state.block_weights()
    Q = np.where(Q < 0, 0.0, Q)
    states = {}
    for N, q in enumerate(Q):
        if q > 0:
            states[N] = state.block(N) / q
    return BlockSpectrum(state.basis, Q, states)


# ---------------------------------------------------------------------------
# text serialization
# ---------------------------------------------------------------------------

_HEADER = "# twomode-state v1"


def dumps_state(state: TwoModeState) -> str:
    """Cutoffs, kind and dense complex entries (row-major, 17 significant digits)."""
    out = io.StringIO()
    out.write(f"{_HEADER}\n")
    out.write(f"cutoff_a {state.basis.cutoff_a}\ncutoff_b {state.basis.cutoff_b}\n")
    out.write(f"trace_tail {state.trace_tail:.17g}\n")
    if state.is_pure:
        out.write("kind pure\n")
        data = state.vector
    else:
        out.write("kind mixed\n")
        data = state.density_matrix().ravel()
    for z in data:
        out.write(f"{z.real:.17g} {z.imag:.17g}\n")
    return out.getvalue()


def loads_state(text: str) -> TwoModeState:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != _HEADER:
        raise InvalidArgument("not a twomode-state v1 document")
    meta = {}
    i = 1
    while i < len(lines) and lines[i].split()[0] in {"cutoff_a", "cutoff_b", "trace_tail", "kind"}:
        key, val = lines[i].split()
        meta[key] = val
        i += 1
    basis = build_basis(int(meta["cutoff_a"]), int(meta["cutoff_b"]))
    vals = np.array([complex(float(a), float(b)) for a, b in map(str.split, lines[i:])])
    tail = float(meta.get("trace_tail", 0.0))
    if meta["kind"] == "pure":
        return TwoModeState(basis, vector=vals, trace_tail=tail)
    return TwoModeState(basis, matrix=vals.reshape(basis.dim, basis.dim), trace_tail=tail)
