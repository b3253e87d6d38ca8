"""Exception hierarchy.

Every error carries the process exit code the command-line front end should
use when it escapes a command: 2 for bad or missing data, 3 for usage or
overwrite refusals, 1 for everything internal.
"""


class LcaSepError(Exception):
    exit_code = 1


class DataError(LcaSepError):
    exit_code = 2


class FormatError(DataError):
    """Malformed or foreign file (bad magic, truncated payload, wrong encoding)."""


class ChannelError(DataError):
    pass


class RateError(DataError):
    pass


class LengthError(DataError):
    pass


class SplitError(DataError):
    pass


class DependencyError(DataError):
    """A pipeline stage was asked to run before the stage it depends on."""


class ShapeError(LcaSepError, ValueError):
    pass


class RepresentationError(LcaSepError, ValueError):
    pass


class PhaseRequiredError(RepresentationError):
    pass


class PreconditionError(LcaSepError, ValueError):
    pass


class DivergenceError(LcaSepError, FloatingPointError):
    pass


class DegenerateSourceError(LcaSepError, ValueError):
    pass


class AggregationError(LcaSepError, ValueError):
    pass


class UsageError(LcaSepError):
    exit_code = 3


class OverwriteError(UsageError):
    pass


class ConfigError(UsageError):
    pass
