"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Raised when a configuration value is invalid. Maps to CLI exit code 2."""


class ProtocolError(RuntimeError):
    """Raised when a party violates the protocol contract (bad announcement,
    out-of-turn message, decode before the check decision, ...)."""
