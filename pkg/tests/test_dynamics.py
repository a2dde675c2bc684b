import numpy as np
import pytest
from scipy.integrate import solve_ivp

from kdqwork.errors import MomentumMismatch
from kdqwork.model import LinearRamp, ModelSpec, MomentumGrid, mode_frame
from kdqwork.dynamics import (
    ModePropagator,
    RampIntegratorConfig,
    propagators_for_grid,
    ramp_propagator,
    sudden_propagator,
    transition_probability,
)

RAMP = ModelSpec.ising(beta=15.0, h0=2.0, h1=2.0, h2=0.5, protocol=LinearRamp(4.0))


def scipy_reference(spec, p):
    """Independent fixed-tolerance 8th-order integration of the mode ODE."""
    delta = spec.protocol.delta
    duration = abs(spec.h2 - spec.h1) / delta
    slope = (spec.h2 - spec.h1) / duration
    om = lambda t: 2.0 * (spec.h1 + slope * t - np.cos(p))
    dl = 2.0 * np.sin(p)

    def rhs(t, y):
        return [-1j * (om(t) * y[0] + dl * y[1]), -1j * (dl * y[0] - om(t) * y[1])]

    sol = solve_ivp(rhs, [0.0, duration], [1.0 + 0j, 0.0 + 0j], method="DOP853",
                    rtol=1e-12, atol=1e-13)
    return complex(sol.y[0, -1]), complex(sol.y[1, -1])


def test_sudden_propagator_is_identity():
    for p in (0.3, np.pi / 2, 2.9):
        prop = sudden_propagator(p)
        assert prop.z == 1.0 + 0.0j and prop.s == 0.0 + 0.0j
        assert prop.unitarity_defect == 0.0


def test_zero_duration_ramp_is_identity():
    spec = ModelSpec.ising(beta=1.0, h0=0.3, h1=0.7, h2=0.7, protocol=LinearRamp(4.0))
    prop = ramp_propagator(spec, 1.2)
    assert prop.z == 1.0 + 0.0j and prop.s == 0.0 + 0.0j


def test_ramp_requires_ramp_protocol():
    with pytest.raises(ValueError):
        ramp_propagator(ModelSpec.ising(beta=1.0, h0=0.0, h1=1.0, h2=0.5), 1.0)


def test_ramp_against_independent_integrator():
    prop = ramp_propagator(RAMP, np.pi / 2)
    z_ref, s_ref = scipy_reference(RAMP, np.pi / 2)
    assert abs(prop.z - z_ref) < 1e-8
    assert abs(prop.s - s_ref) < 1e-8


def test_ramp_frozen_regression():
    # Reference values from DOP853 at rtol 1e-12 for (p, h1 -> h2, delta)
    # = (pi/2, 2 -> 0.5, 4).
    prop = ramp_propagator(RAMP, np.pi / 2)
    assert abs(prop.z - (0.3635880914202576 - 0.7282097248973342j)) < 1e-8
    assert abs(prop.s - (-0.1202147294965856 - 0.5683860617172597j)) < 1e-8


def test_ramp_random_against_reference():
    rng = np.random.default_rng(9)
    for _ in range(5):
        spec = ModelSpec.ising(beta=1.0, h0=0.0,
                               h1=float(rng.uniform(-2, 2)), h2=float(rng.uniform(-2, 2)),
                               protocol=LinearRamp(float(rng.uniform(0.5, 8))))
        if abs(spec.h2 - spec.h1) < 1e-3:
            continue
        p = float(rng.uniform(0.1, np.pi - 0.1))
        prop = ramp_propagator(spec, p)
        z_ref, s_ref = scipy_reference(spec, p)
        assert abs(prop.z - z_ref) < 1e-8
        assert abs(prop.s - s_ref) < 1e-8


def test_near_sudden_limit():
    spec = ModelSpec.ising(beta=1.0, h0=0.0, h1=2.0, h2=0.5, protocol=LinearRamp(1e6))
    prop = ramp_propagator(spec, 1.0)
    assert np.hypot(abs(prop.z - 1.0), abs(prop.s)) < 1e-4


def test_unitarity_batch():
    rng = np.random.default_rng(4)
    for _ in range(6):
        spec = ModelSpec.ising(beta=1.0, h0=0.0,
                               h1=float(rng.uniform(-2, 2)), h2=float(rng.uniform(-2, 2)),
                               protocol=LinearRamp(float(rng.uniform(0.5, 8))))
        props = propagators_for_grid(spec, MomentumGrid.gauss(50))
        assert props.unitarity_defect.max() < 1e-10


def test_determinism():
    a = ramp_propagator(RAMP, 0.9)
    b = ramp_propagator(RAMP, 0.9)
    assert a.z == b.z and a.s == b.s


def test_degenerate_mode_pure_phase():
    # Vanishing pairing decouples s; the propagator is a pure phase.
    spec = ModelSpec(hopping=(1.0,), pairing=(0.0,), beta=1.0,
                     h0=0.0, h1=1.5, h2=0.3, protocol=LinearRamp(2.0))
    p = 1.1
    prop = ramp_propagator(spec, p)
    assert prop.s == 0.0
    duration = abs(spec.h2 - spec.h1) / 2.0
    phase = 2.0 * ((spec.h1 + spec.h2) / 2.0 - np.cos(p)) * duration
    assert abs(prop.z - np.exp(-1j * phase)) < 1e-12


def test_integrator_config_validation():
    with pytest.raises(ValueError):
        RampIntegratorConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        RampIntegratorConfig(max_steps=0)


def test_transition_probability_identity_cases():
    spec = ModelSpec.ising(beta=1.0, h0=0.0, h1=0.0, h2=0.0)
    p = 1.0
    f1 = mode_frame(spec, p, 1.4)
    ident = sudden_propagator(p)
    assert transition_probability(ident, f1, f1) == pytest.approx(1.0, abs=1e-14)
    f0 = mode_frame(spec, p, 1.0)
    f2 = mode_frame(spec, p, -1.0)
    for fa, fb in ((f0, f1), (f0, f2), (f1, f2)):
        P = transition_probability(ident, fa, fb)
        assert P == pytest.approx(np.cos((fa.phi - fb.phi) / 2.0) ** 2, abs=1e-13)
        # Q = 2P - 1 reproduces the eigenbasis overlap.
        assert 2 * P - 1 == pytest.approx(np.cos(fa.phi - fb.phi), abs=1e-13)


def test_transition_probability_orthogonal_bases():
    class Fake:
        pass
    fa, fb = Fake(), Fake()
    fa.p = fb.p = 1.0
    fa.phi, fb.phi = 0.3, 0.3 + np.pi
    assert transition_probability(sudden_propagator(1.0), fa, fb) < 1e-14


def test_transition_matrix_bistochastic():
    prop = ramp_propagator(RAMP, 1.0)
    spec = RAMP
    f0 = mode_frame(spec, 1.0, spec.h0)
    f2 = mode_frame(spec, 1.0, spec.h2)
    P = transition_probability(prop, f0, f2)
    M = np.array([[P, 1 - P], [1 - P, P]])
    assert np.all(M.sum(axis=0) == 1.0) and np.all(M.sum(axis=1) == 1.0)
    # Independent amplitude check: the two diagonal entries coincide.
    vminus = np.array([-np.sin(f0.phi / 2), np.cos(f0.phi / 2)])
    wminus = np.array([-np.sin(f2.phi / 2), np.cos(f2.phi / 2)])
    P_minus = abs(wminus.conj() @ prop.matrix @ vminus) ** 2
    assert P_minus == pytest.approx(P, abs=1e-12)


def test_momentum_mismatch():
    spec = ModelSpec.ising(beta=1.0, h0=0.0, h1=0.0, h2=0.0)
    with pytest.raises(MomentumMismatch):
        transition_probability(sudden_propagator(1.0),
                               mode_frame(spec, 1.0, 0.5), mode_frame(spec, 1.2, 0.5))


def test_sudden_quench_consistency_monotone():
    # Ramp observables approach the quench values monotonically in delta.
    from kdqwork.observables import mean_work_density
    grid = MomentumGrid.gauss(512)
    for h0, h1 in [(0.3, 0.8), (1.5, 1.1), (-0.5, 0.2)]:
        quench = ModelSpec.ising(beta=15.0, h0=h0, h1=h1, h2=0.5)
        ref = mean_work_density(quench, grid, propagators_for_grid(quench, grid))
        gaps = []
        for delta in (1e2, 1e3, 1e4):
            spec = ModelSpec.ising(beta=15.0, h0=h0, h1=h1, h2=0.5,
                                   protocol=LinearRamp(delta))
            gaps.append(abs(mean_work_density(spec, grid,
                                              propagators_for_grid(spec, grid)) - ref))
        assert gaps[0] > gaps[1] > gaps[2]
