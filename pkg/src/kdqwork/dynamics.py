"""Per-mode time evolution operators for quenches and linear ramps.

Each momentum mode evolves under its own 2x2 block, so the propagator

    U_p = [[z, -conj(s)], [s, conj(z)]],   |z|^2 + |s|^2 = 1

is fixed by the pair (z, s) solving

    i (dz/dt, ds/dt)^T = [[Om(t), Dl], [Dl, -Om(t)]] (z, s)^T,
    Om(t) = 2 (h(t) - Tp),   Dl = 2 Dp,   z(0) = 1, s(0) = 0.

The generator is the full mode block of the chain Hamiltonian; this is
what makes the momentum-space propagator agree with dense real-space
evolution of the same chain.  A sudden quench has no evolution window,
so (z, s) = (1, 0) exactly.

Ramps are integrated with an embedded Dormand-Prince 5(4) scheme,
vectorized over all requested modes with a shared adaptive step whose
error control is keyed to the worst mode.  A post-hoc unitarity check
retries at tighter tolerance until |(|z|^2+|s|^2) - 1| <= 1e-10.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IntegrationFailure, MomentumMismatch
from .model import LinearRamp, ModeFrame, ModelSpec, MomentumGrid, SuddenQuench, fourier_couplings

UNITARITY_TOL = 1e-10
# Below this pairing amplitude the s-equation decouples; use the exact
# pure-phase solution instead of dividing by Dl downstream.
DEGENERATE_DELTA = 1e-14

# Dormand-Prince 5(4) tableau.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                   187 / 2100, 1 / 40])
_DP_E = _DP_B5 - _DP_B4


@dataclass(frozen=True)
class RampIntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class ModePropagator:
    """SU(2) parameters (z, s) of one mode's evolution operator."""

    z: complex
    s: complex
    p: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.z, -np.conj(self.s)], [self.s, np.conj(self.z)]])

    @property
    def unitarity_defect(self) -> float:
        return abs(abs(self.z) ** 2 + abs(self.s) ** 2 - 1.0)


@dataclass(frozen=True, eq=False)
class PropagatorSet:
    """Propagators for every mode of a grid (z, s arrays aligned with grid.p)."""

    p: np.ndarray
    z: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        for a in (self.p, self.z, self.s):
            a.setflags(write=False)

    def __len__(self):
        return self.p.size

    def __getitem__(self, i) -> ModePropagator:
        return ModePropagator(z=complex(self.z[i]), s=complex(self.s[i]), p=float(self.p[i]))

    @property
    def unitarity_defect(self) -> np.ndarray:
        return np.abs(np.abs(self.z) ** 2 + np.abs(self.s) ** 2 - 1.0)


def sudden_propagator(p: float) -> ModePropagator:
    """Quench limit: no evolution window, (z, s) = (1, 0)."""
    return ModePropagator(z=1.0 + 0.0j, s=0.0 + 0.0j, p=float(p))


def _ramp_window(spec: ModelSpec):
    """Duration and signed slope of the ramp; delta is a speed (> 0)."""
    delta = spec.protocol.delta
    span = spec.h2 - spec.h1
    duration = abs(span) / delta
    slope = 0.0 if duration == 0.0 else span / duration
    return duration, slope


def _integrate_modes(spec: ModelSpec, p: np.ndarray, cfg: RampIntegratorConfig):
    """DP54 integration of (z, s) for all momenta in p, shared adaptive step."""
    duration, slope = _ramp_window(spec)
    n = p.size
    z = np.ones(n, dtype=complex)
    s = np.zeros(n, dtype=complex)
    if duration == 0.0:
        return z, s

    Tp, Dp = fourier_couplings(spec, p)
    Tp = np.atleast_1d(Tp)
    Dl = 2.0 * np.atleast_1d(Dp)
    degenerate = np.abs(Dl) < DEGENERATE_DELTA

    def rhs(t, y):
        om = 2.0 * (spec.h1 + slope * t - Tp)
        return np.stack([
            -1j * (om * y[0] + Dl * y[1]),
            -1j * (Dl * y[0] - om * y[1]),
        ])

    rel, abs_ = cfg.rel_tol, cfg.abs_tol
    for _ in range(6):
        y = _dp54(rhs, np.stack([z, s]), duration, rel, abs_, cfg.max_steps)
        drift = np.abs(np.abs(y[0]) ** 2 + np.abs(y[1]) ** 2 - 1.0)
        if drift.max() <= 10.0 * UNITARITY_TOL:
            break
        rel, abs_ = rel / 10.0, abs_ / 10.0
    else:
        raise IntegrationFailure(
            f"norm drift {drift.max():.3e} signals accuracy loss beyond refinement")
    # Project back onto the unitary manifold; the radial drift is pure
    # integration error, the exact flow conserves |z|^2 + |s|^2.
    norm = np.sqrt(np.abs(y[0]) ** 2 + np.abs(y[1]) ** 2)
    zs, ss = y[0] / norm, y[1] / norm

    if degenerate.any():
        # Exact pure-phase solution where the pairing vanishes.
        phase = 2.0 * ((spec.h1 + spec.h2) / 2.0 - Tp[degenerate]) * duration
        zs = zs.copy()
        ss = ss.copy()
        zs[degenerate] = np.exp(-1j * phase)
        ss[degenerate] = 0.0
    return zs, ss


def _dp54(rhs, y0, t_end, rel_tol, abs_tol, max_steps):
    """Dormand-Prince 5(4), max-norm error control over all components."""
    t = 0.0
    y = y0.astype(complex)
    f0 = rhs(t, y)
    scale0 = abs_tol + rel_tol * np.abs(y).max()
    d0 = np.abs(y).max() / scale0
    d1 = np.abs(f0).max() / scale0
    h = t_end if d0 < 1e-5 or d1 < 1e-5 else min(0.01 * d0 / d1, t_end)
    h = min(h, t_end)

    steps = 0
    while t < t_end:
        if steps >= max_steps:
            raise IntegrationFailure(f"max_steps={max_steps} exceeded at t={t:.6g}")
        h = min(h, t_end - t)
        k = [rhs(t, y)]
        for i in range(1, 7):
            yi = y + h * sum(a * ki for a, ki in zip(_DP_A[i], k))
            k.append(rhs(t + _DP_C[i] * h, yi))
        y5 = y + h * sum(b * ki for b, ki in zip(_DP_B5, k) if b != 0.0)
        err = h * sum(e * ki for e, ki in zip(_DP_E, k) if e != 0.0)
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y5))
        err_norm = np.max(np.abs(err) / scale)
        steps += 1
        if err_norm <= 1.0:
            t += h
            y = y5
        factor = 0.9 * (max(err_norm, 1e-16)) ** (-0.2)
        h *= min(5.0, max(0.2, factor))
    return y


def ramp_propagator(spec: ModelSpec, p: float, cfg: RampIntegratorConfig | None = None) -> ModePropagator:
    """Integrate the linear-ramp evolution of a single mode.

    Raises
    ------
    IntegrationFailure
        If the tolerance cannot be met within max_steps.
    """
    if not isinstance(spec.protocol, LinearRamp):
        raise ValueError("ramp_propagator requires a LinearRamp protocol")
    cfg = cfg or RampIntegratorConfig()
    z, s = _integrate_modes(spec, np.atleast_1d(np.asarray(p, dtype=float)), cfg)
    return ModePropagator(z=complex(z[0]), s=complex(s[0]), p=float(p))


def propagators_for_grid(spec: ModelSpec, grid: MomentumGrid,
                         cfg: RampIntegratorConfig | None = None) -> PropagatorSet:
    """Propagators for all grid modes (identity set for sudden quenches)."""
    if isinstance(spec.protocol, SuddenQuench):
        n = len(grid)
        return PropagatorSet(p=grid.p.copy(), z=np.ones(n, dtype=complex),
                             s=np.zeros(n, dtype=complex))
    cfg = cfg or RampIntegratorConfig()
    z, s = _integrate_modes(spec, grid.p, cfg)
    return PropagatorSet(p=grid.p.copy(), z=z, s=s)


def _eigvec_plus(phi):
    """Positive-energy eigenvector (cos(phi/2), sin(phi/2)) of a mode block."""
    return np.array([np.cos(phi / 2.0), np.sin(phi / 2.0)])


def transition_probability(prop: ModePropagator, frame_i: ModeFrame, frame_j: ModeFrame) -> float:
    """Probability of staying on the positive-energy branch, |v+_j^dag U v+_i|^2.

    The implied 2x2 transition matrix [[P, 1-P], [1-P, P]] is bistochastic
    by construction.
    """
    if abs(frame_i.p - prop.p) > 1e-12 or abs(frame_j.p - prop.p) > 1e-12:
        raise MomentumMismatch(
            f"frames at p={frame_i.p}, {frame_j.p} combined with propagator at p={prop.p}")
    vi = _eigvec_plus(frame_i.phi)
    vj = _eigvec_plus(frame_j.phi)
    amp = vj.conj() @ prop.matrix @ vi
    P = float(np.abs(amp) ** 2)
    return min(max(P, 0.0), 1.0)


def transition_probabilities(z, s, phi_i, phi_j):
    """Vectorized |v+_j^dag U v+_i|^2 over aligned mode arrays."""
    ci, si = np.cos(phi_i / 2.0), np.sin(phi_i / 2.0)
    cj, sj = np.cos(phi_j / 2.0), np.sin(phi_j / 2.0)
    # U v_i = (z ci - conj(s) si, s ci + conj(z) si)
    amp = cj * (z * ci - np.conj(s) * si) + sj * (s * ci + np.conj(z) * si)
    return np.clip(np.abs(amp) ** 2, 0.0, 1.0)
