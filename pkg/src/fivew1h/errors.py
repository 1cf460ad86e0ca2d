"""Shared exception hierarchy.

Every error raised by this package derives from ToolkitError so the CLI can
map failures to exit codes without enumerating modules.
"""


class ToolkitError(Exception):
    """Base class for all errors raised by fivew1h."""


class IoFailure(ToolkitError):
    """A read or write against a declared path failed."""
