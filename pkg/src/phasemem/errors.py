"""Exception hierarchy shared by all phasemem modules."""


class PhaseMemError(Exception):
    """Base class for every error raised by phasemem."""


class ParameterError(PhaseMemError, ValueError):
    pass


class UndefinedPhaseError(PhaseMemError, ValueError):
    pass


class InsufficientGainError(PhaseMemError):
    """Ordering-corrected moments are not positive, so gamma is undefined."""


class InsufficientSamplesError(PhaseMemError, ValueError):
    pass


class SamplingRateError(PhaseMemError, ValueError):
    pass


class TraceMismatchError(PhaseMemError, ValueError):
    pass


class NoPeakError(PhaseMemError):
    pass


class InsufficientFringesError(PhaseMemError):
    pass


class CalibrationError(PhaseMemError, ValueError):
    pass


class InconsistentCurrentsError(PhaseMemError):
    pass


class InputError(PhaseMemError, ValueError):
    pass


class UndefinedMeanError(PhaseMemError):
    pass


class DegenerateInputError(PhaseMemError, ValueError):
    pass


class AmbiguousSlopeError(PhaseMemError):
    pass


class EmptyReportError(PhaseMemError):
    pass


class ConfigError(PhaseMemError, ValueError):
    pass
