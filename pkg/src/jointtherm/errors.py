"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """An option, shape or size violates a documented precondition."""


class RejectedInputError(ValueError):
    """Input data contains values the model cannot accept (NaN, inf)."""


class ParseError(ValueError):
    """A telemetry file does not match the CSV schema."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataError(ValueError):
    """File parsed, but its contents are inconsistent (e.g. time runs backwards)."""


class UndefinedMetricError(ArithmeticError):
    """A metric is undefined for the given data, e.g. R^2 on constant truth."""


class TrainingDivergedError(RuntimeError):
    """Loss or gradient went non-finite during training.

    ``params`` holds the last finite parameter set so callers can save it.
    """

    def __init__(self, message, params=None, history=None):
        super().__init__(message)
        self.params = params
        self.history = history
