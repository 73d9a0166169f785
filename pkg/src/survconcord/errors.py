"""Exception and warning types shared across the package."""


class SurvconcordError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SurvconcordError):
    """Malformed input data, options, or configuration (CLI exit code 2)."""


class DegenerateDesignError(SurvconcordError):
    """The design carries no usable variance for the requested hypothesis,
    e.g. tr(T V) <= 0 (CLI exit code 3)."""


class TooManyInvalidReplicates(DegenerateDesignError):
    """More than 10% of bootstrap replicates had a degenerate trace and the
    redraw budget was exhausted."""


class InvalidReplicateError(SurvconcordError):
    """A single bootstrap draw produced a non-positive trace denominator."""


class DegenerateFitWarning(UserWarning):
    """Emitted for technically valid but degenerate fits, e.g. a horizon at
    or below the smallest observation."""
