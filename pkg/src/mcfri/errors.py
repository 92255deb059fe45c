"""Exception and warning types raised across the package."""


class MCFRIError(Exception):
    """Base class for all package errors."""


class DiracNotEvaluable(MCFRIError):
    """Pointwise evaluation was requested for a Dirac stream."""


class SupportViolation(MCFRIError):
    """A pulse leaks outside its period (or outside the offset guard band)."""


class ZeroCTFTOnGrid(MCFRIError):
    """The pulse CTFT vanishes on a member of the index set."""


class RankDeficient(MCFRIError):
    """A mixing matrix is not left invertible."""


class FilterConditionViolated(MCFRIError):
    """The shaping filter response vanishes on a required grid point."""


class PulseOverlap(MCFRIError):
    """The base pulse of a pulse sequence is wider than T/N."""


class ZeroDFTBin(MCFRIError):
    """A circulant generator sequence has a zero DFT coefficient."""


class AuditFailed(MCFRIError):
    """Some row-deletion subset of a mixing matrix lost rank."""


class DiracNeedsAnalytic(MCFRIError):
    """Grid quadrature was requested for a Dirac stream."""


class RankDeficientAfterFailure(MCFRIError):
    """The surviving channels no longer determine the Fourier coefficients."""


class OrderTooHigh(MCFRIError):
    """Not enough Fourier coefficients for the requested model order."""


class RankBelowOrder(MCFRIError):
    """Snapshot matrix has rank below the model order and smoothing is off."""


class DegenerateRootsWarning(UserWarning):
    """Estimated roots are far from the unit circle."""


class IllConditionedVandermondeWarning(UserWarning):
    """Vandermonde matrix of the delay estimates is close to singular."""
