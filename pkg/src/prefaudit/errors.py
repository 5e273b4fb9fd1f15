"""Exception types shared across the toolkit."""


class PrefauditError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PrefauditError):
    """Malformed or contract-violating input data.

    ``diagnostics`` optionally carries per-row messages so callers can report
    every offending row instead of the first one.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics) if diagnostics else []

    def __str__(self):
        base = super().__str__()
        if self.diagnostics:
            shown = self.diagnostics[:20]
            lines = "\n  ".join(shown)
            more = "" if len(self.diagnostics) <= 20 else f"\n  ... {len(self.diagnostics) - 20} more"
            return f"{base}\n  {lines}{more}"
        return base


class ConvergenceError(PrefauditError):
    """Estimator failed to converge; carries the last deviance seen."""

    def __init__(self, message, last_deviance=None, iterations=None):
        super().__init__(message)
        self.last_deviance = last_deviance
        self.iterations = iterations


class CollinearityError(PrefauditError):
    """A design column is (numerically) collinear; names the column."""

    def __init__(self, column):
        super().__init__(f"covariate column {column!r} is collinear with the rest of the design")
        self.column = column
