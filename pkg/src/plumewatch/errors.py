"""Exception hierarchy shared across the package.

CLI maps ValidationError/NotFoundError to exit code 1 and StorageError
(plus raw OSError) to exit code 2; the HTTP layer maps them to 400/404/500.
"""


class PlumewatchError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PlumewatchError):
    """Input violates a documented contract (bad value, bad file, bad spec)."""


class NotFoundError(PlumewatchError):
    """A referenced resource (dataset, tile, station) does not exist."""


class StorageError(PlumewatchError):
    """I/O-level failure while reading or writing persisted state."""
