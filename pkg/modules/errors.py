# errors.py
"""
Exception hierarchy for the sector portfolio tool.

Every error raised on purpose by the modules derives from PortfolioToolError
and carries the process exit code used by script.py:
    1 = usage / configuration error
    2 = data error
    3 = numeric / divergence error
"""


class PortfolioToolError(Exception):
    exit_code = 1


# ------------------------------------------------------------
# Configuration / usage (exit 1)
# ------------------------------------------------------------

class ConfigError(PortfolioToolError):
    exit_code = 1


class MissingArtifactError(PortfolioToolError):
    """A stage input produced by another command is missing on disk."""

    exit_code = 1

    def __init__(self, path, producer):
        self.path = str(path)
        self.producer = producer
        super().__init__(
            f"Missing file: {self.path} - run the '{producer}' command first."
        )


# ------------------------------------------------------------
# Data errors (exit 2)
# ------------------------------------------------------------

class DataError(PortfolioToolError, ValueError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, line, reason):
        self.line = line
        super().__init__(f"Malformed CSV row at line {line}: {reason}")


class DuplicateObservationError(DataError):
    def __init__(self, ticker, date, line=None):
        self.ticker = ticker
        self.date = date
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"Duplicate observation for {ticker} on {date}{where}")


class DomainError(DataError):
    pass


class AlignmentError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class MissingDataError(DataError):
    pass


class DimensionError(DataError):
    pass


class ShapeError(DataError):
    pass


class ArgumentError(DataError):
    pass


class DegenerateColumnError(DataError):
    def __init__(self, ticker):
        self.ticker = ticker
        super().__init__(f"Zero-variance return column for {ticker}: cannot standardize.")


class DegenerateRangeError(DataError):
    pass


class UnsupportedShortError(DataError):
    pass


class NonNormalizableComponentError(DataError):
    def __init__(self, component_index, loading_sum):
        self.component_index = component_index
        self.loading_sum = loading_sum
        super().__init__(
            f"Component {component_index} loadings sum to {loading_sum:.3e}: "
            "cannot normalize to unit weight sum."
        )


# ------------------------------------------------------------
# Numeric errors (exit 3)
# ------------------------------------------------------------

class NumericError(PortfolioToolError, ArithmeticError):
    exit_code = 3


class DivergenceError(NumericError):
    def __init__(self, epoch, batch, loss):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(
            f"Training diverged at epoch {epoch}, batch {batch} (loss={loss})."
        )
