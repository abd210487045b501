"""Exception types shared across the package."""


class EntroboundError(Exception):
    """Base class for all package-specific errors."""


class ValidityError(EntroboundError):
    """The confidence bound does not apply for the given parameters.

    Raised when the bin count M falls below the threshold 1/(alpha*eta(K, L))
    required for the quantization term of the bound to be valid.  Callers that
    map errors to exit codes should treat this as a distinct, recoverable
    configuration problem.
    """


class OutOfSupportError(EntroboundError):
    """A sample lies outside the required support box.

    The estimator requires samples in [0, 1]^K; callers must rescale first
    (see ``densities.affine_rescale``).  Out-of-range data is an error, never
    silently clamped.
    """


class QuadratureError(EntroboundError):
    """Numerical integration failed to converge within its refinement budget."""


class IngestError(EntroboundError):
    """A data file could not be parsed (bad field, bad length, or non-finite value)."""
