"""Exception types shared across the package.

Keeping these in one place lets the CLI map error categories onto exit
codes without string matching.
"""


class ConfigError(ValueError):
    """Invalid configuration value or inconsistent combination of values."""


class LoadError(ValueError):
    """Input data could not be ingested (missing cells, bad timestamps, ...)."""


class NormalizationError(ValueError):
    """Normalization statistics cannot be computed (e.g. constant variable)."""


class ContractError(ValueError):
    """An internal quantity violated a structural precondition."""


class DivergenceError(RuntimeError):
    """Training produced non-finite values."""
