"""Exception hierarchy shared across the package."""


class GaitfuseError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(GaitfuseError):
    """A keypoint file could not be parsed.

    Carries the offending path and 1-based line number so batch loaders can
    report exactly where a file went bad.
    """

    def __init__(self, path, line_no, reason):
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{self.path}:{line_no}: {reason}")


class DataError(GaitfuseError):
    """Input data violates a precondition (wrong shape, too short, missing subject...)."""


class ConfigError(GaitfuseError):
    """A configuration value is out of range or inconsistent."""


class NoPeriodicityError(GaitfuseError):
    """Fewer than two troughs found; no gait periodicity detected."""


class FormatError(GaitfuseError):
    """A binary container or config file does not match the expected format."""


class NumericalError(GaitfuseError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message, epoch=None, step=None):
        self.epoch = epoch
        self.step = step
        if epoch is not None:
            message = f"{message} (epoch {epoch}, step {step})"
        super().__init__(message)
