"""Non-classicality diagnostics of the work quasiprobability distribution.

Two witnesses are exposed:

* the hermiticity defect g_p(u) - conj(g_p(-u)) of the per-mode
  characteristic factor, nonzero iff some joint weight acquires an
  imaginary part; and
* the sign of the fourth central moment (Re mu4 < 0), impossible for a
  genuine probability distribution.

The hermiticity defect has the closed form (real u)

    g_p(u) - g_p*(-u) = -2i sin(phi0 - phi1) sinh(beta w0)
                        sin(u w1) sin(u w2)
                        [4 cos(phi2) Im(z s) + 2 sin(phi2) (Im s^2 - Im z^2)]

which is purely imaginary and vanishes identically when phi0 = phi1
(commuting initial state) or when (z, s) = (1, 0) (sudden quench).  It
was verified against the directly computed difference of matrix-product
traces to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ModePropagator, PropagatorSet
from .errors import MomentumMismatch
from .kdq import KDQ, mode_char_factor, work_moments
from .model import ModelSpec, MomentumGrid, frames_for_grid

IMAG_WITNESS_THRESHOLD = 1e-8
NEGATIVITY_THRESHOLD = -1e-10


@dataclass(frozen=True)
class WitnessReport:
    """Aggregated non-classicality indicators at one parameter point."""

    max_imag_witness: float      # sup over sampled (p, u) of |g_p(u) - g_p*(-u)|
    mu4_real: float
    mu4_imag_abs: float
    nonclassical_imag: bool
    nonclassical_negativity: bool


def _witness_bracket(z, s, phi2):
    return 4.0 * np.cos(phi2) * np.imag(z * s) + 2.0 * np.sin(phi2) * (np.imag(s ** 2) - np.imag(z ** 2))


def imag_witness_closed_form(spec: ModelSpec, frames, prop: ModePropagator, u: float) -> complex:
    """Closed form of g_p(u) - conj(g_p(-u)) for real u (purely imaginary).

    Zero whenever the initial state commutes with the t1 Hamiltonian
    (phi0 = phi1), for sudden quenches, and at u = 0.
    """
    frame0, frame1, frame2 = frames
    for f in (frame0, frame1, frame2):
        if abs(f.p - prop.p) > 1e-12:
            raise MomentumMismatch("frame/propagator momentum mismatch")
    val = (-2j * np.sin(frame0.phi - frame1.phi) * np.sinh(spec.beta * frame0.omega)
           * np.sin(u * frame1.omega) * np.sin(u * frame2.omega)
           * _witness_bracket(prop.z, prop.s, frame2.phi))
    return complex(val)


def imag_witness_direct(spec: ModelSpec, frames, prop: ModePropagator, u: float) -> complex:
    """g_p(u) - conj(g_p(-u)) from the matrix-product characteristic factor."""
    f0, f1, f2 = frames
    return mode_char_factor(spec, f0, f1, f2, prop, u) - np.conj(
        mode_char_factor(spec, f0, f1, f2, prop, -u))


def default_u_samples(count: int = 64, u_max: float = 2.0) -> np.ndarray:
    """Uniform samples in (0, u_max]; covers several sin(u omega) periods."""
    return u_max * np.arange(1, count + 1) / count


def scan_nonclassicality(spec: ModelSpec, grid: MomentumGrid, props: PropagatorSet,
                         u_samples=None) -> WitnessReport:
    """Aggregate the per-mode witness and the fourth-moment sign test.

    The witness surface is evaluated from the closed form, vectorized
    over all grid modes and u samples; mu4 comes from the exact per-mode
    distributions.  Negativity semantics (Re mu4 < 0) follow the quench
    case, where mu4 is real; for ramps the imaginary part is reported
    alongside.
    """
    if u_samples is None:
        u_samples = default_u_samples()
    u_samples = np.asarray(u_samples, dtype=float)
    if u_samples.size == 0:
        raise ValueError("u_samples must be nonempty")

    f0 = frames_for_grid(spec, grid, spec.h0)
    f1 = frames_for_grid(spec, grid, spec.h1)
    f2 = frames_for_grid(spec, grid, spec.h2)
    u = u_samples[:, None]
    surface = (2.0 * np.abs(np.sin(f0.phi - f1.phi)) * np.sinh(spec.beta * f0.omega)
               * np.abs(np.sin(u * f1.omega)) * np.abs(np.sin(u * f2.omega))
               * np.abs(_witness_bracket(props.z, props.s, f2.phi)))
    max_witness = float(surface.max())

    moments = work_moments(spec, grid, props, KDQ)
    mu4 = moments.fourth_central
    return WitnessReport(
        max_imag_witness=max_witness,
        mu4_real=float(mu4.real),
        mu4_imag_abs=float(abs(mu4.imag)),
        nonclassical_imag=bool(max_witness > IMAG_WITNESS_THRESHOLD),
        nonclassical_negativity=bool(mu4.real < NEGATIVITY_THRESHOLD),
    )
