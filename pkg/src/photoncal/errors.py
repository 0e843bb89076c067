"""Exception types shared across the pipeline."""


class FormatError(ValueError):
    """A file does not conform to its declared format.

    Carries the file path and, when known, the byte offset (binary formats)
    or row number (CSV) where the problem was found.
    """

    def __init__(self, path, message, *, offset=None, row=None):
        self.path = str(path)
        self.offset = offset
        self.row = row
        where = ""
        if offset is not None:
            where = f" at byte offset {offset}"
        elif row is not None:
            where = f" at row {row}"
        super().__init__(f"{self.path}{where}: {message}")


class CalibrationQualityError(RuntimeError):
    """Calibration input data is unusable (too many degenerate pixels)."""
