"""Exception taxonomy shared by all modules."""


class ChaosLstmError(Exception):
    """Base class for all library errors."""


class ShapeError(ChaosLstmError, ValueError):
    """Operand shapes are incompatible with the requested operation."""


class RangeError(ChaosLstmError, ValueError):
    """An index or cut position is out of range."""


class DomainError(ChaosLstmError, ValueError):
    """An argument lies outside the mathematical domain (e.g. p < 1)."""


class ConfigError(ChaosLstmError, ValueError):
    """A specification or configuration value is invalid."""


class CapacityError(ChaosLstmError, RuntimeError):
    """A dense assembly would exceed the configured size guard."""


class NumericError(ChaosLstmError, ArithmeticError):
    """A computation produced non-finite values."""


class DataError(ChaosLstmError, ValueError):
    """Input data is malformed or degenerate."""


class CheckpointError(ChaosLstmError, ValueError):
    """A checkpoint file is unreadable, truncated or of unsupported version."""


class TrainingError(ChaosLstmError, RuntimeError):
    """Training failed (non-finite loss, impossible configuration)."""
