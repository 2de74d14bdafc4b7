"""Exception types shared across the package.

Every error carries a stable ``code`` string so the service layer and the
CLI can map failures to wire payloads and exit codes without string
matching on messages.
"""

from __future__ import annotations


class CoarseForestError(Exception):
    """Base class for all library errors."""

    code = "Error"

    def payload(self) -> dict:
        return {"code": self.code, "message": str(self)}


class MetricValidationError(CoarseForestError):
    """A distance matrix violates a metric axiom.

    ``code`` is one of ``MalformedMatrix``, ``NegativeEntry``,
    ``NonzeroDiagonal``, ``Asymmetric``, ``DuplicatePoint``,
    ``TriangleViolation``; ``witness`` holds the offending ids.
    """

    def __init__(self, code: str, witness: tuple, message: str):
        super().__init__(message)
        self.code = code
        self.witness = witness

    def payload(self) -> dict:
        return {"code": self.code, "message": str(self), "witness": list(self.witness)}


class DisconnectedGraphError(CoarseForestError):
    code = "Disconnected"


class NotATreeError(CoarseForestError):
    code = "NotATree"


class RangeExhaustedError(CoarseForestError):
    code = "RangeExhausted"


class DegenerateTripleError(CoarseForestError):
    code = "DegenerateTriple"


class BudgetExceededError(CoarseForestError):
    code = "BudgetExceeded"
