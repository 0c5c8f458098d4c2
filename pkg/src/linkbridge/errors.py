"""Error taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class LinkBridgeError(Exception):
    """Base class for all package errors."""


class ConfigError(LinkBridgeError):
    """Invalid configuration: bad ranges, missing files, unknown names."""


class DataError(LinkBridgeError):
    """Malformed or inconsistent input data (graphs, manifests, features)."""


class NumericError(LinkBridgeError):
    """Numerical failure: divergence, non-finite values, infeasible sampling."""
