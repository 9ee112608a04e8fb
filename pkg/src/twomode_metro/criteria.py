"""Entanglement and squeezing criteria, sensitivity bounds and Caves-state oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .dynamics import spin_generator
from .errors import InvalidArgument, InvalidMoments
from .fockspace import CavesParams, SpinFrame, TwoModeState, _unit, mach_zehnder_frame
from .qfi import qfi_mixed, qfi_pure, spin_moments

# strict-inequality margin for the entangled / squeezed flags
FLAG_MARGIN = 1e-9
XI_DENOM_MIN = 1e-12
FQ_ZERO = 1e-12


def fisher_information(state: TwoModeState, direction: Sequence[float]) -> float:
    gen = spin_generator(state.basis, direction)
    if state.is_pure:
        return qfi_pure(state, gen).value
    return qfi_mixed(state, gen).value


def chi_squared(state: TwoModeState, direction: Sequence[float], fq: float | None = None) -> float:
    """<N> / F_Q[rho, J_n]; +inf when the state is insensitive to J_n."""
    mean_N = state.mean_N()
    if mean_N <= 0:
        raise InvalidArgument("chi^2 is undefined for the vacuum")
    if fq is None:
        fq = fisher_information(state, direction)
    if fq <= FQ_ZERO:
        return math.inf
    return mean_N / fq


def xi_squared(state: TwoModeState, frame: SpinFrame) -> float:
    """<N> (Delta J_n3)^2 / (<J_n1>^2 + <J_n2>^2); +inf for a vanishing denominator."""
    mean, second = spin_moments(state)
    m = frame.matrix
    n1, n2, n3 = m[:, 0], m[:, 1], m[:, 2]
    denom = np.dot(mean, n1) ** 2 + np.dot(mean, n2) ** 2
    if denom <= XI_DENOM_MIN:
        return math.inf
    var3 = n3 @ second @ n3 - np.dot(mean, n3) ** 2
    return state.mean_N() * var3 / denom


def aligned_frame(state: TwoModeState, frame: SpinFrame) -> SpinFrame:
    """Rotate (n1, n2) about n3 so that <J_n2> = 0 and <J_n1> >= 0.

    This leaves xi^2 unchanged and makes n2 the rotation axis for which
    chi^2 <= xi^2 holds.
    """
    mean, _ = spin_moments(state)
    m = frame.matrix
    angle = math.atan2(np.dot(mean, m[:, 1]), np.dot(mean, m[:, 0]))
    return frame.rotated_about_n3(angle)


# ---------------------------------------------------------------------------
# Caves-state closed forms (phase-locked, 2 phi_alpha = theta_zeta)
# ---------------------------------------------------------------------------

def _require_locked(params: CavesParams):
    if not params.phase_locked:
        raise InvalidArgument("closed forms assume 2*phi_alpha == theta_zeta")


def caves_fq_analytic(params: CavesParams) -> float:
    _require_locked(params)
    a2, s2 = params.alpha_mag**2, math.sinh(params.r) ** 2
    return a2 * math.exp(2 * params.r) + s2


def caves_chi2_analytic(params: CavesParams) -> float:
    _require_locked(params)
    a2, s2 = params.alpha_mag**2, math.sinh(params.r) ** 2
    den = a2 * math.exp(2 * params.r) + s2
    if den == 0:
        return math.inf
    return (a2 + s2) / den


def caves_xi2_analytic(params: CavesParams) -> float:
    """Squeezing parameter for n3 = x; +inf at the pole |alpha|^2 = sinh^2 r."""
    _require_locked(params)
    a2, s2 = params.alpha_mag**2, math.sinh(params.r) ** 2
    gap = (a2 - s2) ** 2
    if gap <= 1e-24 * max(1.0, a2 + s2) ** 2:
        return math.inf
    return (a2 + s2) * (a2 * math.exp(-2 * params.r) + s2) / gap


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

def _check_m(m):
    if int(m) != m or m < 1:
        raise InvalidArgument(f"m must be an integer >= 1, got {m!r}")


def shot_noise_limit(mean_N: float, m: int = 1) -> float:
    """1 / sqrt(m <N>)."""
    _check_m(m)
    if mean_N <= 0:
        raise InvalidArgument("mean_N must be positive")
    return 1.0 / math.sqrt(m * mean_N)


class HeisenbergBounds(NamedTuple):
    bound_inc: float  # max[1/sqrt(m<N^2>), 1/(m<N>)], SSR-respecting states
    bound_hl: float  # 1/(m<N>), Heisenberg limit at fixed total resources
    bound_coh: float  # 1/sqrt(m<N^2>), coherent states with coherent POVMs


def heisenberg_bounds(mean_N: float, mean_N2: float, m: int = 1) -> HeisenbergBounds:
    _check_m(m)
    if mean_N <= 0:
        raise InvalidArgument("mean_N must be positive")
    if mean_N2 < mean_N**2 * (1 - 1e-12):
        raise InvalidMoments(f"<N^2>={mean_N2!r} is below <N>^2={mean_N**2!r}")
    coh = 1.0 / math.sqrt(m * mean_N2)
    hl = 1.0 / (m * mean_N)
    return HeisenbergBounds(max(coh, hl), hl, coh)


def qcr_bound(fq: float, m: int = 1) -> float:
    _check_m(m)
    return math.inf if fq <= 0 else 1.0 / math.sqrt(m * fq)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

REPORT_COLUMNS = (
    "mean_N", "mean_N2", "fq", "chi2", "xi2", "dtheta_qcr", "sn_limit",
    "bound_inc", "bound_hl", "bound_coh", "m", "entangled", "squeezed",
    "n1_x", "n1_y", "n1_z", "n2_x", "n2_y", "n2_z", "n3_x", "n3_y", "n3_z",
)


@dataclass(frozen=True)
class MetroReport:
    mean_N: float
    mean_N2: float
    fq: float
    chi2: float
    xi2: float
    dtheta_qcr: float
    sn_limit: float
    hl_bounds: HeisenbergBounds
    m: int
    frame: SpinFrame

    @property
    def entangled(self) -> bool:
        return self.chi2 < 1 - FLAG_MARGIN

    @property
    def squeezed(self) -> bool:
        return self.xi2 < 1 - FLAG_MARGIN

    @property
    def xi2_infinite(self) -> bool:
        return math.isinf(self.xi2)

    def row(self) -> dict:
        f = self.frame
        vals = dict(
            mean_N=self.mean_N, mean_N2=self.mean_N2, fq=self.fq, chi2=self.chi2,
            xi2=self.xi2, dtheta_qcr=self.dtheta_qcr, sn_limit=self.sn_limit,
            bound_inc=self.hl_bounds.bound_inc, bound_hl=self.hl_bounds.bound_hl,
            bound_coh=self.hl_bounds.bound_coh, m=self.m,
            entangled=self.entangled, squeezed=self.squeezed,
        )
        for name, vec in (("n1", f.n1), ("n2", f.n2), ("n3", f.n3)):
            for axis, x in zip("xyz", vec):
                vals[f"{name}_{axis}"] = float(x)
        return {k: vals[k] for k in REPORT_COLUMNS}


def report(state: TwoModeState, frame: SpinFrame | None = None, m: int = 1) -> MetroReport:
    """All criteria and bounds; the rotation axis is ``frame.n2``."""
    _check_m(m)
    frame = mach_zehnder_frame() if frame is None else frame
    mean_N, mean_N2 = state.mean_N(), state.mean_N2()
    fq = fisher_information(state, frame.n2)
    return MetroReport(
        mean_N=mean_N,
        mean_N2=mean_N2,
        fq=fq,
        chi2=chi_squared(state, frame.n2, fq=fq),
        xi2=xi_squared(state, frame),
        dtheta_qcr=qcr_bound(fq, m),
        sn_limit=shot_noise_limit(mean_N, m),
        hl_bounds=heisenberg_bounds(mean_N, mean_N2, m),
        m=int(m),
        frame=frame,
    )


def axis_scan(state: TwoModeState) -> dict[str, float]:
    """chi^2 along x, y and z."""
    return {
        name: chi_squared(state, _unit(vec))
        for name, vec in (("x", (1, 0, 0)), ("y", (0, 1, 0)), ("z", (0, 0, 1)))
    }
