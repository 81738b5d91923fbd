"""Shared exception hierarchy.

Three broad families map onto CLI exit codes: configuration problems (2),
data problems (3), and stage/computation failures (4). Modules define their
own specific exceptions on top of these bases.
"""


class LucidtabError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(LucidtabError):
    """Invalid or unknown configuration."""


class DataError(LucidtabError):
    """Malformed or unusable input data."""


class StageError(LucidtabError):
    """A pipeline stage failed or was invoked out of order."""
