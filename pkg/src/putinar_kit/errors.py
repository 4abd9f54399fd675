"""Exception hierarchy shared by all modules."""


class PutinarKitError(Exception):
    """Base class for every error raised by the package."""


class InvalidParameter(PutinarKitError, ValueError):
    pass


class DimensionMismatch(PutinarKitError, ValueError):
    pass


class DegreeOverflow(PutinarKitError):
    """An expansion or grid evaluation would exceed the configured budget."""


class ApproximationFailure(PutinarKitError):
    pass


class InvalidConstraint(PutinarKitError, ValueError):
    pass


class NonArchimedeanDeclared(PutinarKitError):
    """No ball radius was given and no ball constraint could be found."""


class EmptySetSuspected(PutinarKitError):
    """Sampling found no feasible point of S within the budget."""


class NonPositiveMinimum(PutinarKitError):
    pass


class EmptyA(PutinarKitError):
    pass


class NumericalFailure(PutinarKitError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class InfeasibleAtLevel(PutinarKitError):
    """No representation was found at this level (not a proof of non-membership)."""

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class NotPsd(PutinarKitError):
    pass


class NotNonnegative(PutinarKitError):
    pass


class UnsupportedGeneratorForm(PutinarKitError):
    pass


class CertificateAssemblyMismatch(PutinarKitError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class MinCheckFailed(PutinarKitError):
    def __init__(self, message, sampled_min=None):
        super().__init__(message)
        self.sampled_min = sampled_min


class ConfigError(PutinarKitError):
    pass


class IoError(PutinarKitError, OSError):
    """A declared input could not be read or an output could not be written."""
