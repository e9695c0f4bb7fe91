from typing import Optional


class RydarError(Exception):
    """Base class for every error raised by rydar_isac."""


class DomainError(RydarError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class SaturationError(RydarError, ValueError):
    """Peak shift outside the EIT-AT linear region around f0."""


class PrecisionError(RydarError, ValueError):
    """LIA dither too large for a first-harmonic gradient estimate."""


class HomodyneError(RydarError, ValueError):
    """RF and LO frequencies differ."""


class ApproximationError(RydarError, ValueError):
    """LO not dominant enough for the envelope approximation."""


class SamplingError(RydarError, ValueError):
    """Sample rate too low or not commensurate with the waveform timing."""


class ConfigurationError(RydarError, ValueError):
    """Inconsistent waveform, channel or processing parameters."""


class InstantaneousBandwidthError(RydarError):
    """Signal occupies more than the receiver instantaneous bandwidth."""


class ResonanceError(RydarError):
    """Signal left the tuned atomic resonance without a scheduled retune."""


class FramingError(RydarError, ValueError):
    """Trace cannot be split into whole symbols."""


class UndefinedRatioError(RydarError, ValueError):
    """Power ratio requested against a zero-power reference."""


class LengthMismatchError(RydarError, ValueError):
    """Paired sequences differ in length."""


class ReportMismatchError(RydarError):
    """Reports produced from different configurations cannot be combined."""


class ConfigError(RydarError, ValueError):
    """Scenario configuration failed validation.

    ``path`` is the dotted location of the offending key, e.g. ``comms.isr_db``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class TrialError(RydarError):
    """A module error raised while executing one Monte-Carlo trial."""

    def __init__(self, trial_index: int, cause: Optional[BaseException] = None):
        self.trial_index = trial_index
        super().__init__(f"trial {trial_index} failed: {cause}")
