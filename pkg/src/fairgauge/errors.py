"""Exception hierarchy shared across the package."""


class FairgaugeError(Exception):
    """Base class for all errors raised by this package."""


class InputError(FairgaugeError):
    """Malformed or invalid input: files, documents, parameters."""


class UnsolvableError(FairgaugeError):
    """A decision threshold cannot be solved on the given comparisons."""


class UndefinedMetricError(FairgaugeError):
    """A fairness metric is undefined for the input (fewer than two groups)."""
