"""Exception types shared across the package."""


class ConfigError(Exception):
    """Invalid configuration or unreadable input (CLI exit code 2)."""


class DivergenceError(Exception):
    """Training produced a non-finite loss or gradient (CLI exit code 3)."""


class CheckpointMismatchError(Exception):
    """Checkpoint is malformed or incompatible with this build (CLI exit code 4)."""
