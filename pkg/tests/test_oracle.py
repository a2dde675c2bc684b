import numpy as np
import pytest
from itertools import product

from kdqwork.errors import ConfigError, DimensionTooLarge
from kdqwork.model import LinearRamp, ModelSpec, MomentumGrid, frames_for_grid
from kdqwork.dynamics import propagators_for_grid
from kdqwork.kdq import KDQ, TPM, char_function
from kdqwork.observables import coherence_entropy_density, mean_work_density
from kdqwork.oracle import (
    build_dense,
    dense_char_function,
    dense_coherence_entropy,
    dense_hamiltonian,
    dense_joint_distribution,
    dense_mean_work,
)

SPEC = ModelSpec.ising(beta=15.0, h0=2.0, h1=0.0, h2=0.5)


def momentum_level_multiset(spec, L, h):
    grid = MomentumGrid.chain(L)
    om = frames_for_grid(spec, grid, h).omega
    return np.sort([sum(c) for c in product(*[(-w, 0.0, 0.0, w) for w in om])])


def test_spectrum_symmetric_at_zero_field():
    evals = np.linalg.eigvalsh(dense_hamiltonian(SPEC, 4, 0.0))
    assert np.allclose(np.sort(evals), -np.sort(evals)[::-1], atol=1e-12)


def test_ground_state_energy_matches_mode_sum():
    evals = np.linalg.eigvalsh(dense_hamiltonian(SPEC, 8, 1.3))
    om = frames_for_grid(SPEC, MomentumGrid.chain(8), 1.3).omega
    assert abs(evals[0] + om.sum()) < 1e-10


@pytest.mark.parametrize("h", [-1.4, 0.0, 0.7, 2.0])
def test_full_spectrum_equals_momentum_multiset(h):
    evals = np.sort(np.linalg.eigvalsh(dense_hamiltonian(SPEC, 6, h)))
    assert np.abs(evals - momentum_level_multiset(SPEC, 6, h)).max() < 1e-10


def test_build_dense_validation():
    with pytest.raises(ConfigError):
        build_dense(SPEC, 7)
    with pytest.raises(ConfigError):
        build_dense(SPEC, 2)
    with pytest.raises(DimensionTooLarge):
        build_dense(SPEC, 14)


def test_dense_state_properties():
    sys_ = build_dense(SPEC, 6)
    assert abs(np.trace(sys_.rho0).real - 1.0) < 1e-12
    assert np.abs(sys_.H1 - sys_.H1.T.conj()).max() < 1e-12
    assert np.linalg.eigvalsh(sys_.rho0).min() > -1e-12
    ramp = ModelSpec.ising(beta=15.0, h0=1.0, h1=-1.5, h2=0.5, protocol=LinearRamp(4.0))
    sys_r = build_dense(ramp, 6)
    defect = np.abs(sys_r.U @ sys_r.U.conj().T - np.eye(64)).max()
    assert defect < 1e-10


@pytest.mark.parametrize("protocol", ["quench", "ramp"])
def test_dense_char_function_matches_momentum(protocol):
    rng = np.random.default_rng(2)
    for L in (4, 6):
        grid = MomentumGrid.chain(L)
        for _ in range(2):
            h0, h1, h2 = rng.uniform(-2, 2, 3)
            proto = LinearRamp(4.0) if protocol == "ramp" else None
            kw = dict(beta=15.0, h0=h0, h1=h1, h2=h2)
            spec = ModelSpec.ising(**kw, protocol=proto) if proto else ModelSpec.ising(**kw)
            sys_ = build_dense(spec, L)
            props = propagators_for_grid(spec, grid)
            for u in (0.1, 0.7, 1.3):
                for scheme in (KDQ, TPM):
                    gd = dense_char_function(sys_, u, scheme)
                    gm = char_function(spec, grid, props, u, scheme)
                    assert abs(gd - gm) < 1e-8


def test_dense_tpm_equals_kdq_when_commuting():
    spec = ModelSpec.ising(beta=15.0, h0=0.9, h1=0.9, h2=0.5)
    sys_ = build_dense(spec, 6)
    for u in (0.4, 1.1):
        assert abs(dense_char_function(sys_, u, "kdq")
                   - dense_char_function(sys_, u, "tpm")) < 1e-10


def test_dense_mean_work_matches_density():
    rng = np.random.default_rng(14)
    for protocol in ("quench", "ramp"):
        h0, h1, h2 = rng.uniform(-2, 2, 3)
        proto = LinearRamp(4.0) if protocol == "ramp" else None
        kw = dict(beta=15.0, h0=h0, h1=h1, h2=h2)
        spec = ModelSpec.ising(**kw, protocol=proto) if proto else ModelSpec.ising(**kw)
        sys_ = build_dense(spec, 8)
        grid = MomentumGrid.chain(8)
        mw = mean_work_density(spec, grid, propagators_for_grid(spec, grid)) * 8
        assert abs(dense_mean_work(sys_) - mw) < 1e-8


def test_dense_joint_distribution_properties():
    spec = ModelSpec.ising(beta=15.0, h0=1.5, h1=-0.5, h2=0.5)
    sys_ = build_dense(spec, 6)
    rows = dense_joint_distribution(sys_, "kdq")
    total = sum(q for _, _, q in rows)
    assert abs(total - 1.0) < 1e-10
    mean = sum(q.real * (e2 - e1) for e1, e2, q in rows)
    assert abs(mean - dense_mean_work(sys_)) < 1e-9
    for _, _, q in dense_joint_distribution(sys_, "tpm"):
        assert q.real > -1e-12
        assert abs(q.imag) < 1e-12


def test_dense_coherence_entropy_matches_density():
    # Per-mode-pair density uses the 1/pi measure, so the dense total over
    # L sites equals density * L / 2.
    spec = ModelSpec.ising(beta=15.0, h0=1.0, h1=-1.0, h2=0.5)
    sys_ = build_dense(spec, 8)
    grid = MomentumGrid.chain(8)
    dense = dense_coherence_entropy(sys_)
    assert abs(dense - coherence_entropy_density(spec, grid) * 4) < 1e-10


def test_dense_coherence_entropy_commuting_zero():
    spec = ModelSpec.ising(beta=15.0, h0=0.7, h1=0.7, h2=0.5)
    sys_ = build_dense(spec, 6)
    assert abs(dense_coherence_entropy(sys_)) < 1e-10


def test_coupling_range_needs_room():
    long_range = ModelSpec(hopping=(1.0, 0.3, 0.1, 0.05), pairing=(1.0, 0.0, 0.0, 0.0),
                           beta=1.0, h0=0.0, h1=0.5, h2=0.5)
    with pytest.raises(ConfigError):
        dense_hamiltonian(long_range, 4, 0.5)


def test_dense_multirange_model_matches_momentum():
    # Generic couplings exercise the Fourier transforms beyond the Ising preset.
    spec = ModelSpec(hopping=(1.0, 0.3), pairing=(0.8, -0.2), beta=8.0,
                     h0=1.1, h1=-0.6, h2=0.4)
    L = 8
    sys_ = build_dense(spec, L)
    grid = MomentumGrid.chain(L)
    props = propagators_for_grid(spec, grid)
    for u in (0.3, 0.9):
        assert abs(dense_char_function(sys_, u, "kdq")
                   - char_function(spec, grid, props, u, KDQ)) < 1e-8
    evals = np.sort(np.linalg.eigvalsh(sys_.H1))
    assert np.abs(evals - momentum_level_multiset(spec, L, spec.h1)).max() < 1e-9
