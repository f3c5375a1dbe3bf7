class DomainError(ValueError):
    """A frequency lies outside the range where a dispersion model is valid."""


class DegenerateInputError(ValueError):
    """Input carries no information to analyse (e.g. an all-zero amplitude)."""


class GridMismatchError(ValueError):
    pass


class EstimatorError(ZeroDivisionError):
    """An estimator's denominator vanished, so the figure of merit is undefined."""


class ConfigError(ValueError):
    """Invalid run configuration. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)
