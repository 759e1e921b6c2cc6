"""Validation metrics and balanced three-way factorial ANOVA.

Provides Pearson correlation and RMSE for model-vs-measurement comparison,
the upper tail of the F distribution (via an in-house regularized incomplete
beta, continued-fraction evaluation), and a classical fixed-effects
three-way ANOVA with all interactions for balanced designs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, NumericalError, UnbalancedDesignError
from .validation import as_float_array, check_same_length

__all__ = [
    "pcc",
    "rmse",
    "f_sf",
    "betainc_reg",
    "anova3",
    "AnovaRow",
    "AnovaTable",
]


def pcc(x: Iterable[float], y: Iterable[float]) -> float:
    """Pearson product-moment correlation coefficient of two series."""
    xa = as_float_array("x", x, min_len=2)
    ya = as_float_array("y", y, min_len=2)
    check_same_length("x", xa, "y", ya)
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DomainError("pcc undefined for a zero-variance series")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def rmse(x: Iterable[float], y: Iterable[float]) -> float:
    """Root mean square difference between two equal-length series."""
    xa = as_float_array("x", x, min_len=1)
    ya = as_float_array("y", y, min_len=1)
    check_same_length("x", xa, "y", ya)
    d = xa - ya
    return float(math.sqrt(float(d @ d) / d.size))


# ---------------------------------------------------------------------------
# Regularized incomplete beta / F-distribution tail
# ---------------------------------------------------------------------------

_BETACF_MAX_ITER = 500
_BETACF_EPS = 1e-16
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise NumericalError(
        f"incomplete beta continued fraction did not converge (a={a:g}, b={b:g}, x={x:g})"
    )


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b).

    Uses the continued fraction directly for ``x`` below the standard
    switching point ``(a+1)/(a+b+2)`` and the symmetry
    ``I_x(a,b) = 1 - I_{1-x}(b,a)`` above it.
    """
    if a <= 0.0 or b <= 0.0:
        raise DomainError(f"betainc_reg requires a, b > 0, got a={a!r}, b={b!r}")
    if x < 0.0 or x > 1.0:
        raise DomainError(f"betainc_reg requires x in [0, 1], got {x!r}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_sf(f_value: float, df1: float, df2: float) -> float:
    """Upper-tail probability P(F > f) of the F(df1, df2) distribution."""
    if not (df1 >= 1 and df2 >= 1) or not (math.isfinite(df1) and math.isfinite(df2)):
        raise DomainError(f"degrees of freedom must be >= 1, got df1={df1!r}, df2={df2!r}")
    if math.isnan(f_value) or f_value < 0.0:
        raise DomainError(f"f_value must be >= 0, got {f_value!r}")
    if f_value == 0.0:
        return 1.0
    if math.isinf(f_value):
        return 0.0
    x = df2 / (df2 + df1 * f_value)
    return betainc_reg(df2 / 2.0, df1 / 2.0, x)


# ---------------------------------------------------------------------------
# Three-way ANOVA
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnovaRow:
    effect: str
    ss: float
    df: int
    ms: float
    f: float | None
    p: float | None


@dataclass(frozen=True)
class AnovaTable:
    rows: tuple[AnovaRow, ...]

    def __getitem__(self, effect: str) -> AnovaRow:
        for row in self.rows:
            if row.effect == effect:
                return row
        raise KeyError(effect)

    def format(self) -> str:
        """Aligned-text rendering of the table."""
        header = ("effect", "SS", "df", "MS", "F", "p")
        lines = [
            (
                r.effect,
                f"{r.ss:.6g}",
                str(r.df),
                f"{r.ms:.6g}",
                "" if r.f is None else f"{r.f:.6g}",
                "" if r.p is None else f"{r.p:.4g}",
            )
            for r in self.rows
        ]
        widths = [max(len(h), *(len(l[i]) for l in lines)) for i, h in enumerate(header)]
        out = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header))]
        for l in lines:
            out.append("  ".join(v.ljust(widths[i]) for i, v in enumerate(l)))
        return "\n".join(out)


def anova3(
    cells: Mapping[tuple, Sequence[float]],
    factor_names: tuple[str, str, str] = ("A", "B", "C"),
) -> AnovaTable:
    """Balanced fixed-effects three-way ANOVA with all interactions.

    ``cells`` maps each ``(levelA, levelB, levelC)`` combination to its
    replicate observations. The design must be fully crossed with the same
    replicate count (>= 2) in every cell; anything else is rejected with the
    offending cells named.
    """
    if not cells:
        raise UnbalancedDesignError("no cells supplied")
    for key in cells:
        if not isinstance(key, tuple) or len(key) != 3:
            raise DomainError(f"cell keys must be (levelA, levelB, levelC) tuples, got {key!r}")
    levels = tuple(sorted({k[axis] for k in cells}) for axis in range(3))
    a, b, c = (len(l) for l in levels)
    for name, n_levels in zip(factor_names, (a, b, c)):
        if n_levels < 2:
            raise UnbalancedDesignError(f"factor {name} needs >= 2 levels, got {n_levels}")
    expected = set(itertools.product(*levels))
    missing = sorted(expected - set(cells.keys()))
    if missing:
        raise UnbalancedDesignError(
            f"design is not fully crossed; missing cells: {missing[:10]}", cells=missing
        )
    counts = {k: len(v) for k, v in cells.items()}
    r = counts[min(counts)]
    deviant = sorted(k for k, n in counts.items() if n != r)
    if deviant:
        raise UnbalancedDesignError(
            f"unequal replicate counts (expected {r}); offending cells: {deviant[:10]}",
            cells=deviant,
        )
    if r < 2:
        raise UnbalancedDesignError("at least 2 replicates per cell are required")

    index = tuple({lv: i for i, lv in enumerate(ax)} for ax in levels)
    y = np.empty((a, b, c, r), dtype=float)
    for key, obs in cells.items():
        arr = as_float_array(f"cell {key!r}", obs)
        y[index[0][key[0]], index[1][key[1]], index[2][key[2]], :] = arr

    grand = y.mean()
    m_a = y.mean(axis=(1, 2, 3))
    m_b = y.mean(axis=(0, 2, 3))
    m_c = y.mean(axis=(0, 1, 3))
    m_ab = y.mean(axis=(2, 3))
    m_ac = y.mean(axis=(1, 3))
    m_bc = y.mean(axis=(0, 3))
    m_cell = y.mean(axis=3)

    ss_a = b * c * r * float(((m_a - grand) ** 2).sum())
    ss_b = a * c * r * float(((m_b - grand) ** 2).sum())
    ss_c = a * b * r * float(((m_c - grand) ** 2).sum())
    ss_ab = c * r * float(((m_ab - m_a[:, None] - m_b[None, :] + grand) ** 2).sum())
    ss_ac = b * r * float(((m_ac - m_a[:, None] - m_c[None, :] + grand) ** 2).sum())
    ss_bc = a * r * float(((m_bc - m_b[:, None] - m_c[None, :] + grand) ** 2).sum())
    ss_abc = r * float(
        (
            (
                m_cell
                - m_ab[:, :, None]
                - m_ac[:, None, :]
                - m_bc[None, :, :]
                + m_a[:, None, None]
                + m_b[None, :, None]
                + m_c[None, None, :]
                - grand
            )
            ** 2
        ).sum()
    )
    ss_e = float(((y - m_cell[..., None]) ** 2).sum())
    ss_t = float(((y - grand) ** 2).sum())

    n_total = a * b * c * r
    df_e = a * b * c * (r - 1)
    ms_e = ss_e / df_e

    na, nb, nc = factor_names
    effects = [
        (na, ss_a, a - 1),
        (nb, ss_b, b - 1),
        (nc, ss_c, c - 1),
        (f"{na}:{nb}", ss_ab, (a - 1) * (b - 1)),
        (f"{na}:{nc}", ss_ac, (a - 1) * (c - 1)),
        (f"{nb}:{nc}", ss_bc, (b - 1) * (c - 1)),
        (f"{na}:{nb}:{nc}", ss_abc, (a - 1) * (b - 1) * (c - 1)),
    ]
    rows = []
    for name, ss, df in effects:
        ms = ss / df
        if ms_e > 0.0:
            f = ms / ms_e
        else:
            f = math.inf if ms > 0.0 else math.nan
        p = f_sf(f, df, df_e) if not math.isnan(f) else math.nan
        rows.append(AnovaRow(name, ss, df, ms, f, p))
    rows.append(AnovaRow("Error", ss_e, df_e, ms_e, None, None))
    rows.append(AnovaRow("Total", ss_t, n_total - 1, ss_t / (n_total - 1), None, None))
    return AnovaTable(tuple(rows))
