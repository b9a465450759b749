"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid user-supplied configuration (unknown domain, bad parameter range)."""


class ContractError(ValueError):
    """API contract violation (mismatched spaces, wrong level, shape mismatch)."""
