"""Dense Fock-space brute-force validation for small chains.

Builds the full 2^L-dimensional representation of the quadratic chain
with antiperiodic boundary conditions and evaluates characteristic
functions, joint distributions, mean work and coherence entropy by
direct matrix algebra, with no momentum-space shortcut.  Used to
cross-validate every momentum-space result on FiniteChain grids.

The real-space Hamiltonian is assembled so that its momentum blocks are
exactly the 2x2 ``hmat`` convention of :mod:`kdqwork.model`:

    H(h) = sum_r [ -T(r) sum_j (c+_j c_{j+r} + h.c.)
                   +D(r) sum_j (c+_j c+_{j+r} + h.c.) ]
           + h sum_j (2 n_j - 1),        c_{j+L} = -c_j.

With this choice the dense spectrum equals the multiset of sums of
per-mode energies {sum_p +-omega_p(h)} over the antiperiodic momentum
set exactly, and dense/momentum characteristic functions agree to the
integrator tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegeneracyClusteringAmbiguous, DimensionTooLarge
from .model import ModelSpec, SuddenQuench

MAX_L = 12
CLUSTER_TOL = 1e-8

_SQRT3 = np.sqrt(3.0)
# Fourth-order commutator-free two-exponential coefficients (Gauss nodes).
_CF4_C = (0.5 - _SQRT3 / 6.0, 0.5 + _SQRT3 / 6.0)
_CF4_X = ((3.0 - 2.0 * _SQRT3) / 12.0, (3.0 + 2.0 * _SQRT3) / 12.0)


@dataclass(frozen=True, eq=False)
class DenseSystem:
    """Dense many-body representation of one work protocol."""

    L: int
    H0: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    rho0: np.ndarray
    U: np.ndarray
    spec: ModelSpec

    def __post_init__(self):
        for a in (self.H0, self.H1, self.H2, self.rho0, self.U):
            a.setflags(write=False)


def _hop_matrix(L, j, k):
    """Dense c+_j c_k on the occupation-number basis (j != k)."""
    dim = 1 << L
    idx = np.arange(dim)
    occ_k = (idx >> k) & 1
    occ_j = (idx >> j) & 1
    src = np.nonzero((occ_k == 1) & (occ_j == 0))[0]
    tgt = src ^ (1 << k) ^ (1 << j)
    pre_k = _popcount_below(src, k)
    pre_j = _popcount_below(src ^ (1 << k), j)
    sign = 1.0 - 2.0 * ((pre_k + pre_j) % 2)
    out = np.zeros((dim, dim))
    out[tgt, src] = sign
    return out


def _pair_matrix(L, j, k):
    """Dense c+_j c+_k on the occupation-number basis (j != k)."""
    dim = 1 << L
    idx = np.arange(dim)
    occ_k = (idx >> k) & 1
    occ_j = (idx >> j) & 1
    src = np.nonzero((occ_k == 0) & (occ_j == 0))[0]
    tgt = src ^ (1 << k) ^ (1 << j)
    pre_k = _popcount_below(src, k)
    pre_j = _popcount_below(src | (1 << k), j)
    sign = 1.0 - 2.0 * ((pre_k + pre_j) % 2)
    out = np.zeros((dim, dim))
    out[tgt, src] = sign
    return out


def _popcount_below(states, site):
    mask = (1 << site) - 1
    masked = states & mask
    out = np.zeros_like(masked)
    while np.any(masked):
        out += masked & 1
        masked >>= 1
    return out


def dense_hamiltonian(spec: ModelSpec, L: int, h: float) -> np.ndarray:
    """Real-space H(h) with antiperiodic boundary conditions."""
    dim = 1 << L
    idx = np.arange(dim)
    n_tot = _popcount_below(idx, L)
    H = np.zeros((dim, dim))
    for r0, (t_amp, d_amp) in enumerate(zip(spec.hopping, spec.pairing)):
        r = r0 + 1
        if r >= L:
            raise ConfigError(f"coupling range r={r} needs chain length L > r")
        for j in range(L):
            k = j + r
            wrap = -1.0 if k >= L else 1.0
            k %= L
            if t_amp != 0.0:
                H += (-t_amp * wrap) * _hop_matrix(L, j, k)
            if d_amp != 0.0:
                H += (d_amp * wrap) * _pair_matrix(L, j, k)
    H = H + H.T
    H[idx, idx] += h * (2.0 * n_tot - L)
    return H


def _ramp_unitary(spec: ModelSpec, L: int, tol: float = 1e-10):
    """Uniform-step evolution across the ramp, two exponentials per step.

    The step count doubles until another halving changes the operator by
    less than ``tol`` in max norm, keeping the stepping independent of
    the adaptive mode-space integrator it validates.
    """
    delta = spec.protocol.delta
    span = spec.h2 - spec.h1
    duration = abs(span) / delta
    dim = 1 << L
    if duration == 0.0:
        return np.eye(dim, dtype=complex)
    slope = span / duration

    h_kin = dense_hamiltonian(spec, L, 0.0)
    idx = np.arange(dim)
    n_field = 2.0 * _popcount_below(idx, L) - L  # diagonal of d H / d h

    def field(t):
        return spec.h1 + slope * t

    def evolve(nsteps):
        dt = duration / nsteps
        U = np.eye(dim, dtype=complex)
        for k in range(nsteps):
            t = k * dt
            h_a = field(t + _CF4_C[0] * dt)
            h_b = field(t + _CF4_C[1] * dt)
            for w_a, w_b in ((_CF4_X[1], _CF4_X[0]), (_CF4_X[0], _CF4_X[1])):
                heff = (w_a + w_b) * h_kin
                heff[idx, idx] += (w_a * h_a + w_b * h_b) * n_field
                evals, vecs = np.linalg.eigh(heff)
                U = (vecs * np.exp(-1j * dt * evals)) @ vecs.conj().T @ U
        return U

    nsteps = 16
    U_prev = evolve(nsteps)
    for _ in range(12):
        nsteps *= 2
        U_next = evolve(nsteps)
        if np.abs(U_next - U_prev).max() < tol:
            return U_next
        U_prev = U_next
    raise ConfigError("dense ramp evolution did not converge within step budget")


def build_dense(spec: ModelSpec, L: int) -> DenseSystem:
    """Assemble Hamiltonians, thermal state and protocol unitary at size L.

    Raises
    ------
    DimensionTooLarge
        For L > 12 (dense algebra only).
    """
    if L % 2 or L < 4:
        raise ConfigError(f"L must be even and >= 4, got {L}")
    if L > MAX_L:
        raise DimensionTooLarge(f"L={L} exceeds the dense limit {MAX_L}")
    H0 = dense_hamiltonian(spec, L, spec.h0)
    H1 = dense_hamiltonian(spec, L, spec.h1)
    H2 = dense_hamiltonian(spec, L, spec.h2)
    evals, vecs = np.linalg.eigh(H0)
    weights = np.exp(-spec.beta * (evals - evals.min()))
    rho0 = (vecs * (weights / weights.sum())) @ vecs.T
    if isinstance(spec.protocol, SuddenQuench):
        U = np.eye(1 << L, dtype=complex)
    else:
        U = _ramp_unitary(spec, L)
    return DenseSystem(L=L, H0=H0, H1=H1, H2=H2, rho0=rho0.astype(complex), U=U, spec=spec)


def _clusters(evals, tol=CLUSTER_TOL):
    """Group sorted eigenvalues into degenerate clusters; gap-tolerance based."""
    splits = np.nonzero(np.diff(evals) > tol)[0]
    small = np.diff(evals)[(np.diff(evals) > tol) & (np.diff(evals) < 10 * tol)]
    if small.size:
        raise DegeneracyClusteringAmbiguous(
            f"inter-cluster gap {small.min():.3e} within 10x of tolerance {tol}")
    bounds = np.concatenate([[0], splits + 1, [evals.size]])
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def _eig_clustered(H):
    evals, vecs = np.linalg.eigh(H)
    groups = _clusters(evals)
    energies = np.array([evals[a:b].mean() for a, b in groups])
    projs = [vecs[:, a:b] for a, b in groups]
    return energies, projs


def _dephase(rho, projs):
    out = np.zeros_like(rho)
    for V in projs:
        block = V.conj().T @ rho @ V
        out += V @ block @ V.conj().T
    return out


def dense_char_function(sys: DenseSystem, u: complex, scheme: str = "kdq") -> complex:
    """G(u) = Tr[rho exp(-i u H1) exp(+i u U^dag H2 U)], dephased rho for TPM."""
    e1, vecs1 = np.linalg.eigh(sys.H1)
    e2, vecs2 = np.linalg.eigh(sys.H2)
    rho = sys.rho0
    if str(scheme).lower() == "tpm":
        _, projs1 = _eig_clustered(sys.H1)
        rho = _dephase(rho, projs1)
    expm1 = (vecs1 * np.exp(-1j * u * e1)) @ vecs1.conj().T
    expm2 = (vecs2 * np.exp(1j * u * e2)) @ vecs2.conj().T
    heis = sys.U.conj().T @ expm2 @ sys.U
    return complex(np.trace(rho @ expm1 @ heis))


def dense_joint_distribution(sys: DenseSystem, scheme: str = "kdq"):
    """All (E1, E2, weight) cells of the joint work distribution.

    KDQ weights are Tr[rho P1_n U^dag P2_m U]; TPM sandwiches rho between
    the initial projectors.  Ordering matches the momentum-space module.
    """
    e1, projs1 = _eig_clustered(sys.H1)
    e2, projs2 = _eig_clustered(sys.H2)
    tpm = str(scheme).lower() == "tpm"
    rows = []
    evolved = [sys.U.conj().T @ (V @ V.conj().T) @ sys.U for V in projs2]
    for n, Vn in enumerate(projs1):
        Pn = Vn @ Vn.conj().T
        src = Pn @ sys.rho0 @ Pn if tpm else sys.rho0 @ Pn
        for m, Qm in enumerate(evolved):
            rows.append((float(e1[n]), float(e2[m]), complex(np.trace(src @ Qm))))
    return rows


def dense_mean_work(sys: DenseSystem) -> float:
    """Tr[U rho U^dag H2] - Tr[rho H1]."""
    rho_t = sys.U @ sys.rho0 @ sys.U.conj().T
    return float(np.trace(rho_t @ sys.H2).real - np.trace(sys.rho0 @ sys.H1).real)


def _entropy(rho):
    evals = np.linalg.eigvalsh(rho)
    evals = evals[evals > 1e-300]
    return float(-np.sum(evals * np.log(evals)))


def dense_coherence_entropy(sys: DenseSystem) -> float:
    """S[Delta_1(rho0)] - S[rho0] with the t1-eigenbasis dephasing."""
    _, projs1 = _eig_clustered(sys.H1)
    return _entropy(_dephase(sys.rho0, projs1)) - _entropy(sys.rho0)
