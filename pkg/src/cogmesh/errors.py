class ConfigError(ValueError):
    """Invalid configuration or scenario parameters."""


class OracleSizeError(ValueError):
    """Joint action space too large for exhaustive enumeration."""
