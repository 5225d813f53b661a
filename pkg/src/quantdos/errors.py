"""Exception types shared across the package."""


class QuantdosError(Exception):
    """Base class for domain errors."""


class DimensionError(QuantdosError, ValueError):
    """Matrix/vector dimensions are inconsistent with the operation."""


class BlowUpError(QuantdosError):
    """A trajectory left the finite range of the integrator.

    Carries the first time at which a non-finite or over-threshold state
    was produced.
    """

    def __init__(self, t_bad: float, message: str = ""):
        self.t_bad = float(t_bad)
        super().__init__(message or f"state blow-up at t={t_bad:.6g}")


class SaturationError(QuantdosError):
    """The state fell outside the quantization region at encode time."""

    def __init__(self, deviation: float, radius: float, message: str = ""):
        self.deviation = float(deviation)
        self.radius = float(radius)
        super().__init__(
            message
            or f"quantizer saturated: deviation {deviation:.6g} exceeds radius {radius:.6g}"
        )


class InfeasibleError(QuantdosError):
    """A solve or certificate step has no solution for the given inputs."""


class NumericError(QuantdosError):
    """An iterative numeric routine failed to converge."""


class GenerationError(QuantdosError):
    """An attack-schedule generator cannot realize the requested budget."""


class TuningError(QuantdosError):
    """No feasible certificate tuning exists in the searched ranges."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ConfigError(QuantdosError):
    """A run configuration failed validation."""
