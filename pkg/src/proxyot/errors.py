"""Exception taxonomy shared by every module.

Each class maps to one process exit code so the CLI can translate failures
mechanically: usage errors exit 1, data/format errors exit 2, numeric
errors exit 3.
"""

from __future__ import annotations


class ProxyOTError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class UsageError(ProxyOTError):
    """The caller asked for something invalid (bad argument, bad config)."""

    exit_code = 1


class DataError(ProxyOTError):
    """An input file or data value violates its documented contract."""

    exit_code = 2


class NumericError(ProxyOTError):
    """A numeric computation left the finite range it was promised to stay in."""

    exit_code = 3


class NumericOverflowError(NumericError):
    """Overflow/underflow in linear-domain scaling; a log-domain solver would survive."""
