"""Shared exception base for the engine.

Module-specific failures subclass this so callers can catch everything the
engine raises with one except clause while still matching precisely.
"""


class ForgekitError(Exception):
    """Base class for all engine errors."""
