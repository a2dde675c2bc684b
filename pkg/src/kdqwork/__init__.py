"""Kirkwood-Dirac and two-point-measurement work statistics for quadratic fermionic chains."""

__version__ = "0.1.0"

from .model import (
    FrameSet,
    LinearRamp,
    ModeFrame,
    ModelSpec,
    MomentumGrid,
    SuddenQuench,
    fourier_couplings,
    frames_for_grid,
    load_config,
    mean_overlap_qbar,
    mode_frame,
    overlap_Q,
)
from .dynamics import (
    ModePropagator,
    PropagatorSet,
    RampIntegratorConfig,
    propagators_for_grid,
    ramp_propagator,
    sudden_propagator,
    transition_probability,
)
from .kdq import (
    KDQ,
    TPM,
    KDQDistribution,
    WorkMoments,
    char_function,
    mode_char_factor,
    mode_kdq_distribution,
    work_moments,
)
from .observables import (
    ObservableSet,
    coherence_entropy_density,
    dephased_mean_work_density,
    extraction_enhancement,
    mean_work_density,
    observable_set,
)
from .witness import WitnessReport, imag_witness_closed_form, scan_nonclassicality
from .oracle import (
    DenseSystem,
    build_dense,
    dense_char_function,
    dense_coherence_entropy,
    dense_joint_distribution,
    dense_mean_work,
)
from .cli import SweepConfig, SweepResult, emit, run_sweep
