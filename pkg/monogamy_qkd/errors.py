"""Exception hierarchy shared by every monogamy_qkd module."""

from typing import Optional


class MonogamyQKDError(Exception):
    """Base class for all errors raised by the toolkit."""


class DomainError(MonogamyQKDError, ValueError):
    """Raised when an argument lies outside the domain of an operation."""


class OutOfTheoryRange(DomainError):
    """Raised when a CHSH value cannot be produced in the theory being evaluated."""


class BoxValidationError(MonogamyQKDError, ValueError):
    """A probability table violates a box invariant.

    ``index`` is the flat table index of the offending entry, or the flat
    index of the offending setting tuple for normalization failures.
    """

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class NormalizationError(BoxValidationError):
    """Raised when a setting tuple's outcome probabilities do not sum to 1."""


class NegativeProbability(BoxValidationError):
    """Raised when an entry is below the negative clamp tolerance."""


class BoxFormatError(BoxValidationError):
    """Raised for tables of the wrong length, arity or with non-finite entries."""


class ArityMismatch(MonogamyQKDError, ValueError):
    """Raised when a bipartite and a tripartite box are combined."""


class LPInfeasible(MonogamyQKDError):
    """Raised when the no-signaling LP has no feasible point."""


class ConfigError(MonogamyQKDError, ValueError):
    """Raised for invalid protocol or CLI configuration."""


class LPSolverError(MonogamyQKDError):
    """Raised when the LP backend stops without an optimum or an infeasibility proof."""
