"""Exception hierarchy shared by every module of the package."""


class DDCError(ValueError):
    """Base class for all errors raised by :mod:`ddcor`."""


class InvalidDataError(DDCError):
    """Input arrays are malformed (shape mismatch, NaN or infinite entries)."""


class InsufficientSampleError(DDCError):
    """Fewer observations than the estimator needs."""


class InvalidParameterError(DDCError):
    """A tuning parameter is outside its admissible range."""


class DegenerateSampleError(DDCError):
    """All observations of the vector argument coincide."""


class DegenerateResponseError(DDCError):
    """The ranked variable is constant, so a rank statistic is undefined."""


class DegenerateVarianceError(DDCError):
    """A null variance estimate of zero makes the asymptotic test undefined."""


class ConfigurationError(DDCError):
    """Bad command-line or experiment configuration."""
