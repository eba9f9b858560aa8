"""Exception hierarchy shared by every module."""


class BNPDCGxError(Exception):
    """Base class for all package errors."""


class ValidationError(BNPDCGxError, ValueError):
    pass


class NonFinite(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class TooSmall(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class NegativeChi(ValidationError):
    pass


class NonPositiveSigma(ValidationError):
    pass


class NotPD(BNPDCGxError, ValueError):
    """A scale or covariance matrix is not positive definite."""


class EigenFailure(BNPDCGxError, RuntimeError):
    """LAPACK's QR iteration did not converge."""


class SingularJacobian(BNPDCGxError, RuntimeError):
    pass


class StabilityRejectionExhausted(BNPDCGxError, RuntimeError):
    """No stable draw was found within the allowed number of tries."""


class UnstableTruth(BNPDCGxError, RuntimeError):
    pass


class SamplerFailure(BNPDCGxError, RuntimeError):
    pass
