"""Exception hierarchy shared by all cylmart modules."""


class CylmartError(Exception):
    """Base class for library errors."""


class FunctionUnboundedOnSpectrum(CylmartError):
    pass


class BandDepthInsufficient(CylmartError):
    pass


class NotSymmetricPSD(CylmartError, ValueError):
    pass


class LinearlyDependentBasis(CylmartError, ValueError):
    pass


class DimensionMismatch(CylmartError, ValueError):
    pass


class GridMismatch(CylmartError, ValueError):
    pass


class GridMisalignment(CylmartError, ValueError):
    pass


class HorizonTooShort(CylmartError, ValueError):
    pass


class HorizonExceeded(CylmartError, ValueError):
    pass


class NonMonotonePath(CylmartError, ValueError):
    pass


class WindowTooLarge(CylmartError, ValueError):
    pass


class ConfigError(CylmartError, ValueError):
    """Invalid experiment configuration; ``errors`` maps field -> message."""

    def __init__(self, errors):
        self.errors = dict(errors)
        msg = "; ".join(f"{k}: {v}" for k, v in self.errors.items())
        super().__init__(msg)
