"""Exception hierarchy.

Configuration and input problems derive from ``ValueError``; numerical
failures from ``ArithmeticError``. The CLI maps the former to exit code 2 and
the latter to exit code 3.
"""


class SgrbmError(Exception):
    pass


class InputError(SgrbmError, ValueError):
    """Bad configuration, shapes, files or arguments."""


class DimensionError(InputError):
    pass


class ParameterError(InputError):
    pass


class ConfigurationError(InputError):
    pass


class UnsupportedOperation(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalError(SgrbmError, ArithmeticError):
    """Non-finite values appeared in parameters or estimates."""


class EstimationError(NumericalError):
    pass
