"""Exception types raised across the package."""


class SingleFactorError(Exception):
    """Base class for every error raised by this package."""

    code = "error"


class NotPositiveDefinite(SingleFactorError, ValueError):
    code = "not_positive_definite"


class InvalidDegreesOfFreedom(SingleFactorError, ValueError):
    code = "invalid_degrees_of_freedom"


class InvalidParameter(SingleFactorError, ValueError):
    code = "invalid_parameter"


class EmptyInterval(SingleFactorError, ValueError):
    code = "empty_interval"


class InvalidOrder(SingleFactorError, ValueError):
    code = "invalid_order"


class RhoOutOfRange(SingleFactorError, ValueError):
    code = "rho_out_of_range"


class NonSymmetricW(SingleFactorError, ValueError):
    code = "non_symmetric_w"


class NotInCone(SingleFactorError, ValueError):
    code = "not_in_cone"


class NoConvergence(SingleFactorError, RuntimeError):
    code = "no_convergence"


class NotDecomposable(SingleFactorError, ValueError):
    code = "not_decomposable"


class EmptyTrace(SingleFactorError, ValueError):
    code = "empty_trace"


class DimensionMismatch(SingleFactorError, ValueError):
    code = "dimension_mismatch"


class NonIdentifiableGraph(SingleFactorError, ValueError):
    code = "non_identifiable_graph"


class NonIdentifiableStart(SingleFactorError, ValueError):
    code = "non_identifiable_start"


class InvariantViolation(SingleFactorError, AssertionError):
    code = "invariant_violation"


class ConfigError(SingleFactorError, ValueError):
    code = "config_error"


class DataFormatError(SingleFactorError, ValueError):
    code = "data_format_error"


class SchemaMismatch(SingleFactorError, ValueError):
    code = "schema_mismatch"
