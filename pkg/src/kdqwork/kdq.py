"""Characteristic functions, per-mode joint (quasi)probabilities and work cumulants.

Work statistics of one momentum mode live in the 4-dimensional Fock
block spanned by {|0>, c+_p|0>, c+_{-p}|0>, c+_p c+_{-p}|0>}.  The
single-occupancy (odd) states carry zero energy and are frozen by the
pair-conserving dynamics, so everything nontrivial happens in the
2-dimensional even sector, where a quadratic form with 2x2 block A is
represented by sigma_x A sigma_x.  Consequently the characteristic
factor of a mode reduces to

    g_p(u) = 2 + tr[ exp(-beta M0) exp(-i u M1) exp(+i u U^dag M2 U) ]

with M_j = omega_j [[cos phi_j, sin phi_j], [sin phi_j, -cos phi_j]] and
U the mode propagator; the leading 2 is the odd-sector trace.  Each
exponential has the closed form c*I + s*(M/omega) because M^2 = omega^2 I.

Two schemes are supported:

* ``"kdq"``  - q_{m,n} = Tr[rho P1_n U^dag P2_m U]           (quasiprobability)
* ``"tpm"``  - p_{m,n} = Tr[P1_n rho P1_n U^dag P2_m U]      (projective protocol)

ordered so that sum_{m,n} q_{m,n} e^{i u (E2_m - E1_n)} * g_p(0) equals
g_p(u) identically.  Work moments are extracted from these 9-point
distributions exactly (no numerical differentiation); per-mode cumulants
are additive across modes and reported per site via the weight/(2 pi)
measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ModePropagator, PropagatorSet
from .errors import BranchTrackingFailure, MomentumMismatch, ProjectorError
from .model import FrameSet, ModeFrame, ModelSpec, MomentumGrid, frames_for_grid

KDQ = "kdq"
TPM = "tpm"

_PROJECTOR_TOL = 1e-10


def _check_scheme(scheme: str) -> str:
    s = str(scheme).lower()
    if s not in (KDQ, TPM):
        raise ValueError(f"scheme must be 'kdq' or 'tpm', got {scheme!r}")
    return s


def _nmat(phi):
    """Stacked [[cos, sin], [sin, -cos]] over a phi array: shape (..., 2, 2)."""
    c, s = np.cos(phi), np.sin(phi)
    out = np.empty(np.shape(phi) + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = s
    out[..., 1, 0] = s
    out[..., 1, 1] = -c
    return out


def _even(mat):
    """Even-sector representation: conjugation by sigma_x (index swap)."""
    return mat[..., ::-1, ::-1]


def mode_char_factor(spec: ModelSpec, frame0: ModeFrame, frame1: ModeFrame,
                     frame2: ModeFrame, prop: ModePropagator, u: complex) -> complex:
    """Characteristic factor g_p(u) of one mode, entire in u.

    g_p(0) = 2 (1 + cosh(beta omega0)) is the mode partition function.
    """
    for f in (frame1, frame2):
        if abs(f.p - frame0.p) > 1e-12:
            raise MomentumMismatch("frames built at different momenta")
    if abs(prop.p - frame0.p) > 1e-12:
        raise MomentumMismatch("propagator momentum differs from the frames'")
    b = spec.beta
    n0, n1, n2 = _nmat(frame0.phi), _nmat(frame1.phi), _nmat(frame2.phi)
    I = np.eye(2)
    E0 = np.cosh(b * frame0.omega) * I - np.sinh(b * frame0.omega) * n0
    E1 = np.cos(u * frame1.omega) * I - 1j * np.sin(u * frame1.omega) * n1
    U = prop.matrix
    E2 = U.conj().T @ (np.cos(u * frame2.omega) * I + 1j * np.sin(u * frame2.omega) * n2) @ U
    return complex(2.0 + np.trace(E0 @ E1 @ E2))


# ---------------------------------------------------------------------------
# Batched 9-outcome joint distributions


def _batch_joint(beta, f0: FrameSet, f1: FrameSet, f2: FrameSet,
                 props: PropagatorSet, scheme: str):
    """Joint weights for all modes.

    Returns
    -------
    e1, e2 : (3, n) arrays of level energies (-omega, 0, +omega order).
    q : (3, 3, n) complex array, q[m, n] for final level m, initial level n.
    zmode : (n,) mode partition functions 2 (1 + cosh(beta omega0)).
    """
    scheme = _check_scheme(scheme)
    n = len(f0)
    ch, sh = np.cosh(beta * f0.omega), np.sinh(beta * f0.omega)
    zmode = 2.0 * (1.0 + ch)
    I = np.broadcast_to(np.eye(2), (n, 2, 2))

    rho_e = (ch[:, None, None] * I - sh[:, None, None] * _even(_nmat(f0.phi))) / zmode[:, None, None]
    n1e, n2e = _even(_nmat(f1.phi)), _even(_nmat(f2.phi))
    P1 = [(I - n1e) / 2.0, (I + n1e) / 2.0]   # initial -omega1, +omega1
    P2 = [(I - n2e) / 2.0, (I + n2e) / 2.0]   # final   -omega2, +omega2

    defect = max(np.abs(P @ P - P).max() for P in (*P1, *P2))
    if defect > _PROJECTOR_TOL:
        raise ProjectorError(f"projector idempotency defect {defect:.3e}")

    Ue = np.empty((n, 2, 2), dtype=complex)
    Ue[:, 0, 0] = np.conj(props.z)
    Ue[:, 0, 1] = props.s
    Ue[:, 1, 0] = -np.conj(props.s)
    Ue[:, 1, 1] = props.z
    Ud = np.conj(np.swapaxes(Ue, -1, -2))

    q = np.zeros((3, 3, n), dtype=complex)
    q[1, 1] = 2.0 / zmode  # frozen odd sector: both energies zero
    for ni, Pn in zip((0, 2), P1):
        src = rho_e @ Pn if scheme == KDQ else Pn @ rho_e @ Pn
        mid = src @ Ud
        for mi, Pm in zip((0, 2), P2):
            q[mi, ni] = np.trace(mid @ Pm @ Ue, axis1=-2, axis2=-1)

    e1 = np.stack([-f1.omega, np.zeros(n), f1.omega])
    e2 = np.stack([-f2.omega, np.zeros(n), f2.omega])
    return e1, e2, q, zmode


@dataclass(frozen=True)
class Outcome:
    """One (initial energy, final energy) cell of a per-mode distribution."""

    e1: float
    e2: float
    w: float
    q: complex


@dataclass(frozen=True)
class KDQDistribution:
    """Per-mode joint distribution over the 3x3 energy-level grid."""

    outcomes: tuple
    p: float
    scheme: str

    def total(self) -> complex:
        return sum(o.q for o in self.outcomes)

    def marginal_initial(self):
        """Weights summed over the final index, keyed by e1 (true probabilities)."""
        out = {}
        for o in self.outcomes:
            out[o.e1] = out.get(o.e1, 0.0) + o.q
        return out

    def marginal_final(self):
        out = {}
        for o in self.outcomes:
            out[o.e2] = out.get(o.e2, 0.0) + o.q
        return out

    def moment(self, k: int) -> complex:
        return sum(o.q * o.w ** k for o in self.outcomes)


def mode_kdq_distribution(spec: ModelSpec, frames, prop: ModePropagator,
                          scheme: str = KDQ) -> KDQDistribution:
    """Joint work distribution of one mode under the chosen scheme.

    Parameters
    ----------
    frames : (ModeFrame, ModeFrame, ModeFrame)
        Frames at h0, h1, h2, all at the propagator's momentum.

    The nine outcomes pair e1 in {-omega1, 0, +omega1} with
    e2 in {-omega2, 0, +omega2}; the two zero-energy single-occupancy
    levels are merged into one rank-2 projector.
    """
    frame0, frame1, frame2 = frames
    for f in (frame0, frame1, frame2):
        if abs(f.p - prop.p) > 1e-12:
            raise MomentumMismatch("frame/propagator momentum mismatch")
    f0 = FrameSet(p=np.array([frame0.p]), omega=np.array([frame0.omega]),
                  phi=np.array([frame0.phi]), h=0.0)
    f1 = FrameSet(p=np.array([frame1.p]), omega=np.array([frame1.omega]),
                  phi=np.array([frame1.phi]), h=0.0)
    f2 = FrameSet(p=np.array([frame2.p]), omega=np.array([frame2.omega]),
                  phi=np.array([frame2.phi]), h=0.0)
    props = PropagatorSet(p=np.array([prop.p]), z=np.array([prop.z]),
                          s=np.array([prop.s]))
    e1, e2, q, _ = _batch_joint(spec.beta, f0, f1, f2, props, scheme)
    outcomes = []
    for ni in range(3):
        for mi in range(3):
            outcomes.append(Outcome(
                e1=float(e1[ni, 0]), e2=float(e2[mi, 0]),
                w=float(e2[mi, 0] - e1[ni, 0]), q=complex(q[mi, ni, 0])))
    return KDQDistribution(outcomes=tuple(outcomes), p=float(prop.p),
                           scheme=_check_scheme(scheme))


def _grid_joint(spec: ModelSpec, grid: MomentumGrid, props: PropagatorSet, scheme: str):
    f0 = frames_for_grid(spec, grid, spec.h0)
    f1 = frames_for_grid(spec, grid, spec.h1)
    f2 = frames_for_grid(spec, grid, spec.h2)
    return _batch_joint(spec.beta, f0, f1, f2, props, scheme)


# ---------------------------------------------------------------------------
# Characteristic function on a grid


def _log_ratio_tracked(e1, e2, q, u: complex):
    """log of r_p(u) = sum q exp(i u w) per mode, branch-continuous from u = 0.

    Walks u along a straight path in steps small enough that no mode's
    phase advances by more than pi/2 per step.
    """
    w = (e2[:, None, :] - e1[None, :, :]).reshape(9, -1)  # (9, n)
    qf = q.reshape(9, -1)
    wmax = np.abs(w).max()
    nsteps = max(1, int(np.ceil(abs(u) * wmax / (np.pi / 2))))
    for _ in range(24):
        v = u * np.linspace(0.0, 1.0, nsteps + 1)[:, None, None]
        r = np.sum(qf[None, :, :] * np.exp(1j * v * w[None, :, :]), axis=1)  # (K+1, n)
        if np.abs(r).min() < 1e-300:
            raise BranchTrackingFailure("per-mode ratio underflowed along the u path")
        steps = np.angle(r[1:] / r[:-1])
        if np.abs(steps).max() <= np.pi / 2:
            theta = steps.sum(axis=0)
            return np.log(np.abs(r[-1])) + 1j * theta
        nsteps *= 2
    raise BranchTrackingFailure("phase steps did not settle below pi/2")


def char_function(spec: ModelSpec, grid: MomentumGrid, props: PropagatorSet,
                  u: complex, scheme: str = KDQ) -> complex:
    """Characteristic function of the work distribution.

    FiniteChain grids return the finite product over modes of
    g_p(u)/g_p(0); quadrature grids return the per-site generating
    function exp[(1/2 pi) * integral of log(g_p(u)/g_p(0)) dp] with the
    complex-log branch tracked continuously from u = 0.
    """
    scheme = _check_scheme(scheme)
    e1, e2, q, _ = _grid_joint(spec, grid, props, scheme)
    logr = _log_ratio_tracked(e1, e2, q, u)
    if grid.kind == "chain":
        return complex(np.exp(np.sum(logr)))
    return complex(np.exp(np.sum(grid.weights * logr) / (2.0 * np.pi)))


# ---------------------------------------------------------------------------
# Work moments


@dataclass(frozen=True, eq=False)
class WorkMoments:
    """Work cumulant densities (per site); complex for ramp-driven KDQ."""

    mean: float
    variance: complex
    third_cumulant: complex
    fourth_cumulant: complex
    fourth_central: complex  # kappa4 + 3 kappa2^2
    per_mode_cumulants: np.ndarray  # (4, n_modes), complex

    def __post_init__(self):
        self.per_mode_cumulants.setflags(write=False)


def work_moments(spec: ModelSpec, grid: MomentumGrid, props: PropagatorSet,
                 scheme: str = KDQ) -> WorkMoments:
    """Cumulants of the work density from exact per-mode distributions.

    Cumulants are additive over modes because the characteristic function
    factorizes, so each density is sum_p weight_p kappa_k(p) / (2 pi).
    """
    e1, e2, q, _ = _grid_joint(spec, grid, props, _check_scheme(scheme))
    w = e2[:, None, :] - e1[None, :, :]          # (3, 3, n)
    m1 = np.sum(q * w, axis=(0, 1))
    m2 = np.sum(q * w ** 2, axis=(0, 1))
    m3 = np.sum(q * w ** 3, axis=(0, 1))
    m4 = np.sum(q * w ** 4, axis=(0, 1))
    k1 = m1
    k2 = m2 - m1 ** 2
    k3 = m3 - 3 * m2 * m1 + 2 * m1 ** 3
    k4 = m4 - 4 * m3 * m1 - 3 * m2 ** 2 + 12 * m2 * m1 ** 2 - 6 * m1 ** 4
    per_mode = np.stack([k1, k2, k3, k4])
    meas = grid.weights / (2.0 * np.pi)
    d1, d2, d3, d4 = (np.sum(meas * k) for k in per_mode)
    return WorkMoments(
        mean=float(d1.real),
        variance=complex(d2),
        third_cumulant=complex(d3),
        fourth_cumulant=complex(d4),
        fourth_central=complex(d4 + 3.0 * d2 ** 2),
        per_mode_cumulants=per_mode,
    )
