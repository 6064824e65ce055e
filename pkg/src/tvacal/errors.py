"""Exception hierarchy shared by all modules."""


class CalibrationError(Exception):
    """Base class for every error raised by tvacal."""


class InvalidInputError(CalibrationError, ValueError):
    """Data that violates a documented precondition (shape, range, finiteness)."""


class InvalidParameterError(CalibrationError, ValueError):
    """A hyperparameter or option outside its valid range."""


class FormatError(CalibrationError, ValueError):
    """A dataset file that does not parse under its declared format.

    ``row`` and ``column`` locate the offending value when known (0-based,
    data rows only, i.e. the CSV header is not counted).
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class OptimizationError(CalibrationError, RuntimeError):
    """The objective became non-finite during fitting."""

    def __init__(self, message, iteration):
        self.iteration = iteration
        super().__init__(f"{message} at iteration {iteration}")


class UndefinedMetricError(CalibrationError, ValueError):
    """The metric is undefined for the given data (e.g. AUROC with one class)."""


class DegenerateFitError(CalibrationError, ValueError):
    """The fitting problem has no meaningful solution (e.g. single-class targets)."""
