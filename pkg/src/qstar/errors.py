"""Exception hierarchy shared by all qstar modules."""

from __future__ import annotations


class QStarError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(QStarError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DataError(QStarError):
    """Input data violates a structural requirement (schema, keys, shape)."""


class MissingAnchorError(DataError):
    """A normalization anchor cell is absent from a MOS table."""

    def __init__(self, sequence_id: str, s: float, t: float, q: float):
        self.sequence_id = sequence_id
        self.cell = (s, t, q)
        super().__init__(
            f"missing anchor cell for sequence {sequence_id!r}: "
            f"(s={s:g}, t={t:g}, q={q:g})"
        )


class DegenerateDataError(DataError):
    """Data carries no information for the requested fit."""


class UnbalancedDesignError(DataError):
    """A factorial design is incomplete or has unequal replicate counts."""

    def __init__(self, message: str, cells: list | None = None):
        self.cells = cells or []
        super().__init__(message)


class InfeasibleBudgetError(QStarError):
    """No candidate operating point satisfies the rate budget."""

    def __init__(self, budget: float, min_rate: float):
        self.budget = budget
        self.min_rate = min_rate
        super().__init__(
            f"no grid point satisfies budget {budget:g}; "
            f"minimum achievable rate is {min_rate:g}"
        )


class NumericalError(QStarError):
    """A numerical procedure failed to converge."""
