"""Exception hierarchy for longmix."""


class LongmixError(Exception):
    """Base class for all errors raised by longmix."""


class InvalidRequestError(LongmixError, ValueError):
    """Arguments are inconsistent (e.g. more components than rows)."""


class DegenerateComponentError(LongmixError):
    """A component covariance is numerically singular."""

    def __init__(self, g, message=None):
        self.g = g
        super().__init__(message or f"component {g} has a numerically singular covariance")


class CollapsedComponentError(LongmixError):
    """A component's responsibility mass fell below the allowed minimum."""

    def __init__(self, g, mass, message=None):
        self.g = g
        self.mass = mass
        super().__init__(message or f"component {g} collapsed (n_g = {mass:.3g})")


class FitFailedError(LongmixError):
    """EM produced a non-finite log-likelihood."""


class AllStartsFailedError(LongmixError):
    """Every start of a multi-start fit failed."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("all starts failed: " + "; ".join(self.diagnostics))


class EmptyReportError(LongmixError):
    """Every cell of a grid search failed."""


class DataError(LongmixError, ValueError):
    """Input data cannot be parsed or violates a domain requirement.

    ``row`` and ``column`` are zero-based locations in the offending file or
    matrix when known.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
