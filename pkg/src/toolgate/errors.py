"""Shared exception base for the toolgate package.

Module-specific errors subclass ToolgateError next to the code that raises
them; callers that only care about "did toolgate reject this" can catch the
base class.
"""


class ToolgateError(Exception):
    """Base class for all errors raised by toolgate modules."""
