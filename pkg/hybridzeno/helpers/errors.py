"""Base exception shared by all hybridzeno modules."""


class HybridZenoError(Exception):
    """
    Base class for errors raised while building, simulating or checking a hybrid system.

    exit_code is the CLI exit status for the error: 1 for invalid input
    (spec, config, certificate), 2 for an invalid initial state, 3 for
    runtime failures, 4 for an exceeded branch budget.
    """

    exit_code = 3


class ConfigError(HybridZenoError):
    """Raised for invalid configuration values (config file or SimConfig)."""

    exit_code = 1
