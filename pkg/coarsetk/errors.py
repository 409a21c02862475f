"""
Exception hierarchy for coarsetk.

Every error a command can surface maps onto one exit code in ``cli``.
"""

from typing import Any, Dict, Optional


class CoarseTKError(Exception):
    """Base class for all coarsetk errors."""

    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = dict(details or {})


class SpaceError(CoarseTKError, ValueError):
    """Unknown space id, bad point index, or a violated metric axiom."""

    exit_code = 2


class ValidationError(CoarseTKError):
    """A certified property failed; ``details`` names the offending objects."""

    exit_code = 2


class PreconditionError(CoarseTKError, ValueError):
    """A documented precondition of an operation does not hold."""

    exit_code = 2


class BudgetExceeded(CoarseTKError):
    """A clique or coloring search ran out of budget.

    ``lower`` and ``upper`` bracket the quantity that was being computed
    (either may be None when no bound is known).
    """

    exit_code = 3

    def __init__(self, message: str, lower: Any = None, upper: Any = None,
                 details: Optional[Dict[str, Any]] = None, partial: Any = None):
        super().__init__(message, details)
        self.lower = lower
        self.upper = upper
        self.partial = partial
