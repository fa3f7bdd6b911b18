"""Exception types shared across the package."""


class SurvgradError(Exception):
    """Base class for all survgrad errors."""


class ShapeError(SurvgradError, ValueError):
    """Array dimensions do not chain or do not match a contract."""


class ConfigError(SurvgradError, ValueError):
    """Invalid configuration value or combination."""


class NotFittedError(SurvgradError, RuntimeError):
    """Operation requires a fitted model."""


class TrainingError(SurvgradError, RuntimeError):
    """Training failed (no events, divergent loss, ...)."""


class SimulationError(SurvgradError, RuntimeError):
    """Event-time generation failed (non-bracketing root search, ...)."""


class MetricError(SurvgradError, ValueError):
    """Metric is undefined for the given inputs."""
