"""Exception hierarchy shared across binsight modules."""


class BinsightError(Exception):
    """Base class for all errors raised by binsight."""


class InvalidArgument(BinsightError, ValueError):
    pass


class EmptyInput(InvalidArgument):
    """A binary with zero bytes was handed to the featurizer."""


class ShapeMismatch(InvalidArgument):
    pass


class StratificationError(InvalidArgument):
    pass


class NotApplicable(BinsightError):
    """The requested quantity does not exist for this model/config."""


class Undefined(BinsightError, ArithmeticError):
    """A metric is mathematically undefined for the given input."""


class ParseError(BinsightError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelFormatError(BinsightError, ValueError):
    pass
