"""Exception types raised across pymotiontools.

Each type derives from the built-in exception a caller would already be
catching, so ``except ValueError`` keeps working around shape or config
problems.
"""


class ShapeError(ValueError):
    """Operand dimensions do not agree."""


class ConfigError(ValueError):
    """Invalid hyperparameters, configuration keys or requested horizons."""


class ContractError(RuntimeError):
    """A caller broke a precondition of the differentiation tape or optimizer."""


class NumericError(ArithmeticError):
    """Non-finite values appeared where finite ones are required."""


class ParseError(ValueError):
    """Malformed skeleton CSV input.

    Parameters
    ----------
    message : str
        Description of the problem.
    row : int, optional
        1-based row of the offending cell (the header is row 1).
    column : int, optional
        1-based column of the offending cell.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        location = ""
        if row is not None:
            location = f" (row {row}"
            if column is not None:
                location += f", column {column}"
            location += ")"
        super().__init__(message + location)


class DataError(ValueError):
    """Skeleton data that cannot be used, e.g. degenerate or too short."""


class CheckpointError(ValueError):
    """A checkpoint file failed validation."""


class HyperparameterError(CheckpointError):
    """A checkpoint was written for a different model configuration."""
