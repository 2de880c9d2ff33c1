"""Exception and warning types shared across the toolkit."""


class DegenerateConfigurationError(ValueError):
    """Keypoint configuration is (near-)collinear; the closed-form solve has no unique rotation."""


class NoValidCandidateError(RuntimeError):
    """Every candidate in the solver bank is degenerate; no pose can be aggregated."""


class DegenerateAggregationError(RuntimeError):
    """Weighted quaternion sum cancelled to (near-)zero norm; the mean rotation is undefined."""


class NonFiniteGradientError(ArithmeticError):
    """A derivative pass produced a non-finite intermediate value."""


class PlyParseError(ValueError):
    """ASCII PLY input is malformed; message carries the offending line number."""


class ConfigError(ValueError):
    """Run configuration is outside its documented ranges."""


class IllConditionedGradientWarning(RuntimeWarning):
    """Cross-covariance has near-equal singular values; factor derivatives are amplified."""
