"""Translation-invariant quadratic fermionic chains in momentum space.

A chain is specified by finite-range hopping amplitudes T(r) and pairing
amplitudes D(r) (r >= 1) plus a transverse field h.  Each momentum p in
(0, pi) carries a traceless symmetric 2x2 Bogoliubov-de Gennes block

    hmat(p, h) = [[2h - 2*Tp, -2*Dp], [-2*Dp, 2*Tp - 2h]]

with Tp = sum_r T(r) cos(p r) and Dp = sum_r D(r) sin(p r).  Its
eigenvalues are +/- omega_p(h) with

    omega_p(h) = 2 sqrt((Tp - h)^2 + Dp^2)

and the rotation angle phi_p(h) diagonalizing the block satisfies

    cos(phi) = 2 (h - Tp) / omega,    sin(phi) = 2 Dp / omega.

For the Ising preset (T = D = [1]) this gives
omega_p = 2 sqrt((cos p - h)^2 + sin^2 p) and phi = pi/2 - p/2 at h = 1,
phi = pi - p at h = 0.

Note the sign convention: ``hmat`` carries -2*Dp on the off-diagonal
while phi is defined through +2*Dp.  The two choices differ by a
sigma_z conjugation of the mode basis; every physical quantity computed
downstream (spectra, transition probabilities, characteristic functions)
is invariant under it.  All internal algebra consistently uses the
(omega, phi) pair, never ``hmat`` itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np
from scipy.special import roots_legendre

from .errors import ConfigError, GaplessMode

# Gap guard: omega below this raises GaplessMode (only reachable at the
# excluded endpoints p = 0, pi with |h| = 1).
EPS_GAP = 1e-12


@dataclass(frozen=True)
class SuddenQuench:
    """Instantaneous field change; the mode propagator is the identity."""


@dataclass(frozen=True)
class LinearRamp:
    """Linear field sweep h1 -> h2 at speed delta > 0 (duration |h2-h1|/delta)."""

    delta: float

    def __post_init__(self):
        if not (self.delta > 0):
            raise ConfigError(f"ramp speed must be positive, got {self.delta}")


Protocol = Union[SuddenQuench, LinearRamp]


@dataclass(frozen=True)
class ModelSpec:
    """Couplings, field schedule and initial inverse temperature.

    Parameters
    ----------
    hopping, pairing : tuple of float
        Amplitudes T(r), D(r) for r = 1 .. len(list).  Same length.
    beta : float
        Inverse temperature of the initial thermal state (> 0).
    h0, h1, h2 : float
        Field of the initial state, of the Hamiltonian at the start of
        the protocol, and at its end.
    protocol : SuddenQuench or LinearRamp
    """

    hopping: tuple = (1.0,)
    pairing: tuple = (1.0,)
    beta: float = 1.0
    h0: float = 0.0
    h1: float = 0.0
    h2: float = 0.0
    protocol: Protocol = field(default_factory=SuddenQuench)

    def __post_init__(self):
        object.__setattr__(self, "hopping", tuple(float(t) for t in self.hopping))
        object.__setattr__(self, "pairing", tuple(float(d) for d in self.pairing))
        if not (self.beta > 0):
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if len(self.hopping) != len(self.pairing):
            raise ConfigError("hopping and pairing must have the same length")
        if len(self.hopping) == 0:
            raise ConfigError("at least one coupling range is required")
        for v in (*self.hopping, *self.pairing, self.beta, self.h0, self.h1, self.h2):
            if not np.isfinite(v):
                raise ConfigError("couplings and fields must be finite")

    @classmethod
    def ising(cls, beta, h0, h1, h2, protocol=None):
        """Transverse-field Ising preset: T = D = [1] fixes the energy scale."""
        return cls(
            hopping=(1.0,),
            pairing=(1.0,),
            beta=beta,
            h0=h0,
            h1=h1,
            h2=h2,
            protocol=protocol if protocol is not None else SuddenQuench(),
        )


@dataclass(frozen=True, eq=False)
class ModeFrame:
    """Diagonalization data of one momentum mode at a fixed field value."""

    p: float
    omega: float
    phi: float
    hmat: np.ndarray

    def __post_init__(self):
        self.hmat.setflags(write=False)


@dataclass(frozen=True, eq=False)
class MomentumGrid:
    """Quadrature nodes and weights over momenta in (0, pi).

    Weights always sum to pi; observable densities use the measure
    weight/(2 pi) so that Gauss-Legendre grids realize the
    thermodynamic-limit integral and FiniteChain(L) grids realize the
    per-site sum over the antiperiodic momentum set p = pi (2m-1)/L.
    """

    p: np.ndarray
    weights: np.ndarray
    kind: str  # "gauss" | "chain"
    size: int  # n for gauss, L for chain

    def __post_init__(self):
        self.p.setflags(write=False)
        self.weights.setflags(write=False)

    @classmethod
    def gauss(cls, n=2048):
        if n < 2:
            raise ConfigError("Gauss-Legendre grid needs n >= 2")
        x, w = _leggauss_cached(int(n))
        return cls(p=np.pi * (x + 1.0) / 2.0, weights=np.pi * w / 2.0,
                   kind="gauss", size=int(n))

    @classmethod
    def chain(cls, L):
        """Antiperiodic momenta p = pi(2m-1)/L, m = 1..L/2, weight 2 pi / L."""
        L = int(L)
        if L < 2 or L % 2:
            raise ConfigError(f"chain length must be even and >= 2, got {L}")
        m = np.arange(1, L // 2 + 1)
        return cls(p=np.pi * (2 * m - 1) / L,
                   weights=np.full(L // 2, 2.0 * np.pi / L),
                   kind="chain", size=L)

    @property
    def nodes(self):
        return list(zip(self.p.tolist(), self.weights.tolist()))

    def __len__(self):
        return self.p.size


@lru_cache(maxsize=32)
def _leggauss_cached(n):
    x, w = roots_legendre(n)
    return x, w


def fourier_couplings(spec: ModelSpec, p):
    """Cosine/sine transforms of the coupling lists at momentum p.

    Returns (Tp, Dp) with Tp = sum_r T(r) cos(p r), Dp = sum_r D(r) sin(p r).
    Accepts scalar or array p.
    """
    p = np.asarray(p, dtype=float)
    r = np.arange(1, len(spec.hopping) + 1)
    pr = np.multiply.outer(p, r)
    Tp = np.cos(pr) @ np.asarray(spec.hopping)
    Dp = np.sin(pr) @ np.asarray(spec.pairing)
    if p.ndim == 0:
        return float(Tp), float(Dp)
    return Tp, Dp


def _omega_phi(spec: ModelSpec, p, h):
    """Vectorized (omega, phi) on a momentum array; phi continuous in p."""
    Tp, Dp = fourier_couplings(spec, p)
    a = 2.0 * (h - Tp)
    b = 2.0 * Dp
    omega = np.hypot(a, b)
    if np.any(omega < EPS_GAP):
        raise GaplessMode(f"gap closed below {EPS_GAP} at h={h}")
    phi = np.mod(np.arctan2(b, a), 2.0 * np.pi)
    if np.ndim(phi) > 0 and phi.size > 1:
        # Continuous branch along the grid; 2 pi offsets are physically inert.
        phi = np.unwrap(phi)
        if phi[0] < 0.0:
            phi = phi + 2.0 * np.pi
    return omega, phi


def mode_frame(spec: ModelSpec, p: float, h: float) -> ModeFrame:
    """Build the 2x2 mode block, its energy and its rotation angle.

    Raises
    ------
    GaplessMode
        If omega < 1e-12 (gap closed; excluded-endpoint guard).
    """
    if not (0.0 < p < np.pi):
        raise ConfigError(f"momentum must lie in (0, pi), got {p}")
    Tp, Dp = fourier_couplings(spec, p)
    omega, phi = _omega_phi(spec, np.asarray(p), h)
    hmat = np.array([[2.0 * h - 2.0 * Tp, -2.0 * Dp],
                     [-2.0 * Dp, 2.0 * Tp - 2.0 * h]])
    return ModeFrame(p=float(p), omega=float(omega), phi=float(phi), hmat=hmat)


@dataclass(frozen=True, eq=False)
class FrameSet:
    """Vectorized (omega, phi) over a grid at one field value."""

    p: np.ndarray
    omega: np.ndarray
    phi: np.ndarray
    h: float

    def __post_init__(self):
        for a in (self.p, self.omega, self.phi):
            a.setflags(write=False)

    def __len__(self):
        return self.p.size


def frames_for_grid(spec: ModelSpec, grid: MomentumGrid, h: float) -> FrameSet:
    """Mode frames for every grid momentum at field h."""
    omega, phi = _omega_phi(spec, grid.p, h)
    return FrameSet(p=grid.p.copy(), omega=omega, phi=phi, h=float(h))


def overlap_Q(phi_i: float, phi_j: float) -> float:
    """Eigenbasis overlap parameter Q = cos(phi_i - phi_j) in [-1, 1]."""
    return float(np.cos(phi_i - phi_j))


def mean_overlap_qbar(spec: ModelSpec, grid: MomentumGrid, h_i: float, h_j: float) -> float:
    """Mode-averaged overlap (1/pi) * integral of cos(phi_i - phi_j) dp."""
    _, phi_i = _omega_phi(spec, grid.p, h_i)
    _, phi_j = _omega_phi(spec, grid.p, h_j)
    return float(np.sum(grid.weights * np.cos(phi_i - phi_j)) / np.pi)


# ---------------------------------------------------------------------------
# JSON configuration


def spec_from_dict(cfg: dict) -> ModelSpec:
    """Build a ModelSpec from a configuration dictionary."""
    try:
        protocol = protocol_from_dict(cfg.get("protocol", {"type": "quench"}))
        return ModelSpec(
            hopping=tuple(cfg.get("hopping", [1.0])),
            pairing=tuple(cfg.get("pairing", [1.0])),
            beta=float(cfg["beta"]),
            h0=float(cfg["h0"]),
            h1=float(cfg["h1"]),
            h2=float(cfg["h2"]),
            protocol=protocol,
        )
    except KeyError as exc:
        raise ConfigError(f"missing configuration key: {exc}") from exc


def protocol_from_dict(cfg: dict) -> Protocol:
    kind = cfg.get("type")
    if kind == "quench":
        return SuddenQuench()
    if kind == "ramp":
        try:
            return LinearRamp(delta=float(cfg["delta"]))
        except KeyError as exc:
            raise ConfigError("ramp protocol requires a 'delta' key") from exc
    raise ConfigError(f"unknown protocol type: {kind!r}")


def grid_from_dict(cfg: dict) -> MomentumGrid:
    kind = cfg.get("kind", "gauss")
    if kind == "gauss":
        return MomentumGrid.gauss(int(cfg.get("n", 2048)))
    if kind == "chain":
        try:
            return MomentumGrid.chain(int(cfg["L"]))
        except KeyError as exc:
            raise ConfigError("chain grid requires an 'L' key") from exc
    raise ConfigError(f"unknown grid kind: {kind!r}")


def load_config(path):
    """Read a JSON model configuration; returns (ModelSpec, MomentumGrid, raw dict)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return spec_from_dict(raw), grid_from_dict(raw.get("grid", {})), raw
