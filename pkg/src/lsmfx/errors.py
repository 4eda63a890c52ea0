"""Exception types shared across the pipeline."""


class LsmError(Exception):
    """Base class for all package errors."""


class RangeError(LsmError, ValueError):
    pass


class ZeroStateError(LsmError, ValueError):
    pass


class ConfigError(LsmError, ValueError):
    pass


class ShapeError(LsmError, ValueError):
    pass


class DegenerateError(LsmError, ValueError):
    pass


class DegenerateDataError(LsmError, ValueError):
    pass


class FormatError(LsmError, ValueError):
    pass


class EmptySignalError(LsmError, ValueError):
    pass


class NumericalError(LsmError, ArithmeticError):
    pass
