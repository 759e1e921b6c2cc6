"""Rate-constrained selection of the best operating point on a grid."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import DataError, DomainError, InfeasibleBudgetError
from .model import SequenceParams, ShapeConstants, StarPoint, qstar
from .validation import check_positive


@dataclass(frozen=True)
class CandidateGrid:
    """Candidate spatial/temporal/stepsize levels plus their references."""

    s_levels: tuple[float, ...]
    t_levels: tuple[float, ...]
    q_levels: tuple[float, ...]
    s_max: float
    t_max: float
    q_min: float

    def __post_init__(self):
        check_positive("s_max", self.s_max)
        check_positive("t_max", self.t_max)
        check_positive("q_min", self.q_min)
        for name, levels, lo_ok in (
            ("s_levels", self.s_levels, lambda v: 0.0 < v <= self.s_max),
            ("t_levels", self.t_levels, lambda v: 0.0 < v <= self.t_max),
            ("q_levels", self.q_levels, lambda v: v >= self.q_min),
        ):
            if not levels:
                raise DomainError(f"{name} must be nonempty")
            if list(levels) != sorted(levels):
                raise DomainError(f"{name} must be sorted ascending")
            if len(set(levels)) != len(levels):
                raise DomainError(f"{name} contains duplicates")
            for v in levels:
                if not lo_ok(float(v)):
                    raise DomainError(f"{name} value {v!r} violates the reference bounds")

    def points(self) -> list[StarPoint]:
        return [
            StarPoint(s, t, q, self.s_max, self.t_max, self.q_min)
            for s, t, q in itertools.product(self.s_levels, self.t_levels, self.q_levels)
        ]


@dataclass(frozen=True)
class Selection:
    point: StarPoint
    quality: float
    rate: float


def select_star(
    grid: CandidateGrid,
    params: SequenceParams,
    consts: ShapeConstants = ShapeConstants(),
    rate_of: Callable[[float, float, float], float] = None,
    budget: float = math.inf,
) -> Selection:
    """Exhaustively pick the feasible grid point of maximal quality.

    Ties break toward lower rate, then larger spatial resolution, larger
    temporal resolution and smaller stepsize. With no feasible point the
    error carries the minimum achievable rate.
    """
    if rate_of is None:
        raise DomainError("rate_of is required")
    if not budget > 0.0:
        raise DomainError(f"budget must be > 0, got {budget!r}")
    best: tuple | None = None
    best_sel: Selection | None = None
    min_rate = math.inf
    for point in grid.points():
        rate = float(rate_of(point.s, point.t, point.q))
        if math.isnan(rate):
            raise DataError(
                f"rate_of returned NaN at (s={point.s:g}, t={point.t:g}, q={point.q:g})"
            )
        min_rate = min(min_rate, rate)
        if rate > budget:
            continue
        quality = qstar(point, params, consts)
        key = (quality, -rate, point.s, point.t, -point.q)
        if best is None or key > best:
            best = key
            best_sel = Selection(point=point, quality=quality, rate=rate)
    if best_sel is None:
        raise InfeasibleBudgetError(budget=budget, min_rate=min_rate)
    return best_sel
