"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument violates a documented precondition."""


class DegenerateInput(ValueError):
    """Input is structurally valid but too degenerate to process
    (e.g. fewer than two surviving rows before resampling)."""


class CalibrationError(RuntimeError):
    """Noise calibration could not reach the requested privacy target."""


class AuditError(RuntimeError):
    """Ledger replay disagrees with the manifest, or the ledger is corrupt."""


class ConfigError(ValueError):
    """Experiment configuration failed validation."""
