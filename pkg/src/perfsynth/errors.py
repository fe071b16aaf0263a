"""Exception hierarchy shared by all modules.

Everything raised on bad input derives from ``PerfSynthError`` so the CLI can
map it to exit status 1 in one place.
"""


class PerfSynthError(Exception):
    pass


class SchemaError(PerfSynthError, ValueError):
    pass


class ParseError(PerfSynthError, ValueError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ValidationError(PerfSynthError, ValueError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class EmptyInputError(PerfSynthError, ValueError):
    pass


class RangeError(PerfSynthError, ValueError):
    pass


class ShapeError(PerfSynthError, ValueError):
    pass


class DomainError(PerfSynthError, ValueError):
    pass


class FormatError(PerfSynthError, ValueError):
    pass


class NumericError(PerfSynthError, ArithmeticError):
    pass


class ConvergenceError(PerfSynthError, RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
