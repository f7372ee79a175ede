"""Exception types raised by the library."""


class DerhamError(Exception):
    """Base class for all library errors."""


class DegreeOverflow(DerhamError):
    pass


class GridMismatch(DerhamError):
    pass


class ShapeMismatch(DerhamError):
    pass


class DecayViolation(DerhamError):
    """Field is not small near the box boundary (periodic wraparound would pollute it)."""


class TooFewTimeSlices(DerhamError):
    pass


class SingularPoint(DerhamError):
    pass


class NotClosed(DerhamError):
    """Input to the inverse of d is not closed."""


class UnsupportedCombination(DerhamError):
    pass


class StabilityViolation(DerhamError):
    pass


class NoBracket(DerhamError):
    pass


class MeshTooShort(DerhamError):
    pass


class ConfigError(DerhamError):
    pass


class FieldFileError(DerhamError):
    pass


class ZeroModeLoss(UserWarning):
    """Warning: a nonzero mean is dropped by an inverse Fourier multiplier."""


class WraparoundWarning(UserWarning):
    pass
