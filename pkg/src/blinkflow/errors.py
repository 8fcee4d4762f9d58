"""Exception hierarchy shared by every pipeline stage."""


class BlinkflowError(Exception):
    """Base class for all errors raised by blinkflow."""


class InvalidInputError(BlinkflowError, ValueError):
    pass


class ParseError(BlinkflowError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OrderingError(ParseError):
    """Timestamps are not strictly increasing."""


class ConfigurationError(BlinkflowError, ValueError):
    pass


class InsufficientDataError(BlinkflowError, ValueError):
    pass


class NumericalDegeneracyError(BlinkflowError, ArithmeticError):
    pass


class LabelingError(BlinkflowError, ValueError):
    pass


class DegenerateLabelingError(LabelingError):
    """All values fed to a 2-way split are identical."""


class NumericOverflowError(BlinkflowError, ArithmeticError):
    pass


class TrainingFailureError(BlinkflowError, RuntimeError):
    def __init__(self, message, epoch=None):
        self.epoch = epoch
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)
