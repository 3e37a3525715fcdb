"""Exception hierarchy shared by every module."""


class FraudStreamError(Exception):
    """Base class for all errors raised by the package."""


class DimensionError(FraudStreamError, ValueError):
    pass


class ConfigError(FraudStreamError, ValueError):
    pass


class IoError(FraudStreamError, OSError):
    pass


class SchemaError(FraudStreamError, ValueError):
    pass


class ParseError(FraudStreamError, ValueError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class EmptyDatasetError(FraudStreamError, ValueError):
    pass


class StratificationError(FraudStreamError, ValueError):
    pass


class SingleClassError(FraudStreamError, ValueError):
    pass


class TrainingDivergedError(FraudStreamError, ArithmeticError):
    def __init__(self, message, epoch=None):
        super().__init__(message if epoch is None else f"{message} (epoch {epoch})")
        self.epoch = epoch


class UnsupportedSolverError(FraudStreamError, ValueError):
    pass


class DegenerateTestError(FraudStreamError, ValueError):
    pass


class SingleClassWindowError(SingleClassError):
    def __init__(self, window_id):
        super().__init__(f"training data of window {window_id} holds a single class")
        self.window_id = window_id


class EmptyResultError(FraudStreamError, ValueError):
    pass


class StreamStateError(FraudStreamError, RuntimeError):
    pass
