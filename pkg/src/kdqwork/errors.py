"""Exception types shared across the package."""


class KdqworkError(Exception):
    """Base class for all package-specific errors."""


class GaplessMode(KdqworkError):
    """Single-particle gap closed; Bogoliubov angle undefined at this mode."""


class IntegrationFailure(KdqworkError):
    """Adaptive integrator could not meet its tolerance within max_steps."""


class MomentumMismatch(KdqworkError):
    """Operands built for different momenta were combined."""


class ProjectorError(KdqworkError):
    """Numerical eigenprojector failed its idempotency/commutation check."""


class BranchTrackingFailure(KdqworkError):
    """Complex-log branch tracking lost the path (ratio underflowed)."""


class DimensionTooLarge(KdqworkError):
    """Dense Fock-space construction requested beyond the supported size."""


class DegeneracyClusteringAmbiguous(KdqworkError):
    """Eigenvalue clusters too close to separate at the configured tolerance."""


class ConfigError(KdqworkError):
    """Invalid configuration file or parameter set."""
