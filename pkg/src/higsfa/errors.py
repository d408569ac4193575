"""Exception types shared by the package."""


class NumericalError(ValueError):
    """Training failed for numerical reasons (rank deficiency, bad dimensions)."""


class ConfigError(ValueError):
    """An experiment config, preset or network spec is inconsistent."""


class FormatError(OSError):
    """A model or dataset file is malformed, truncated or of the wrong version."""
