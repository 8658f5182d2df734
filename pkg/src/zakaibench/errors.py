"""Exception types shared across the package."""


class ZakaiBenchError(Exception):
    """Base class for all package errors."""


class NonSymmetric(ZakaiBenchError):
    """Matrix expected to be symmetric is not (beyond tolerance)."""


class NearSingular(ZakaiBenchError):
    """Matrix eigenvalue below tolerance; observation noise degenerate."""


class EllipticityLost(ZakaiBenchError):
    """Divergence-form coefficients lost the required ellipticity margin."""


class BadRadius(ZakaiBenchError):
    """Oscillation radius must be positive."""


class NonFinite(ZakaiBenchError):
    """A coefficient or state returned NaN/Inf."""


class AssemblyOverflow(ZakaiBenchError):
    """Grid too large for the configured memory budget."""


class SolverDiverged(ZakaiBenchError):
    """Iterative linear solve exceeded its iteration cap."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class Instability(ZakaiBenchError):
    """One-step max-norm growth factor exceeded the instability guard."""


class SupportViolation(ZakaiBenchError):
    """Test function support too close to the domain boundary."""


class MassCollapse(ZakaiBenchError):
    """Unnormalized density mass fell below the configured floor."""


class DimensionMismatch(ZakaiBenchError):
    """Inconsistent array dimensions between specs and paths."""


class CovarianceBlowup(ZakaiBenchError):
    """Filter covariance norm exceeded its guard threshold."""


class CorrelatedNoiseUnsupported(ZakaiBenchError):
    """Bootstrap particle filter requires disjoint signal/observation noise."""


class WeightDegeneracy(ZakaiBenchError):
    """Particle weights collapsed beyond rescue by rescaling."""


class MisalignedGrids(ZakaiBenchError):
    """Trajectory, forcing and driver are not on one common grid."""


class InsufficientScales(ZakaiBenchError):
    """Too few dyadic scales for a regression estimate."""


class ConfigError(ZakaiBenchError):
    """Scenario configuration is invalid."""

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{message} (field: {field})"
        super().__init__(message)
        self.field = field
