"""Exception hierarchy for the toolkit."""

from __future__ import annotations


class ModspaceError(Exception):
    """Base class for all toolkit errors."""


class DomainError(ModspaceError, ValueError):
    """An argument lies outside the domain of an operation."""


class SpecParseError(ModspaceError, ValueError):
    """A weight, corpus or config string could not be parsed."""


class GridRangeError(ModspaceError, ValueError):
    """A frequency index or grid parameter is not representable on the grid."""


class BoundaryDecayError(ModspaceError):
    """A sampled function does not decay at the box boundary."""


class CertificationError(ModspaceError):
    """A required certificate does not exist on the available probes."""
