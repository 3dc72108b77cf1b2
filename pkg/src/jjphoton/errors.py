"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A physical parameter or argument violates its allowed range."""


class NoBarrierError(ParameterError):
    """Bias at or above the critical current: the washboard has no well."""


class NumericalError(RuntimeError):
    """Integration or fitting failed in a way the caller should act on."""


class ConfigError(ValueError):
    """Experiment configuration failed schema or physical validation."""
