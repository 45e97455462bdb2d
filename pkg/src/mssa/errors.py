"""Exception types shared across the package."""


class CsvParseError(ValueError):
    """Malformed CSV input, with the offending location attached.

    ``row`` is the 1-based physical line number; ``column`` is the 0-based
    cell index (None for row-level problems such as arity mismatches).
    """

    def __init__(self, message: str, row: int, column: int | None = None):
        location = f"row {row}" if column is None else f"row {row}, column {column}"
        super().__init__(f"{message} ({location})")
        self.row = row
        self.column = column


class CalibrationError(RuntimeError):
    """Monte-Carlo calibration could not produce a reliable quantile."""

    def __init__(self, message: str, stage: int | None = None):
        super().__init__(message)
        self.stage = stage
