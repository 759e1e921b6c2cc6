"""Scikit-learn style estimator facade over the quality model.

``X`` rows are ``(s, t, q)`` operating points (pixels per frame, Hz, linear
stepsize); ``y`` is the measured quality normalized to the maximal point.
Fitting requires the anchor cells (maximal ``s``/``t``, minimal ``q``) to be
present, exactly like the table-based fitting layer it wraps.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import stats
from .errors import DataError, DomainError
from .fitting import fit_cells
from .model import SequenceParams, ShapeConstants, StarPoint, qstar, qstar_components


def _as_points_matrix(X) -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DomainError(f"X must have shape (n, 3) for (s, t, q), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("X contains non-finite values")
    if not np.all(arr > 0.0):
        raise DomainError("X coordinates must all be > 0")
    return arr


class QStarModel(BaseEstimator):
    """Product-form quality model with three content-dependent decay rates.

    Parameters left at ``None`` are estimated by :meth:`fit`; a fully
    specified model (all three ``alpha_*`` plus the references) can be used
    for :meth:`predict` without fitting. Shape constants default to the
    published values.
    """

    def __init__(
        self,
        alpha_q: float | None = None,
        alpha_s_hat: float | None = None,
        alpha_t: float | None = None,
        s_max: float | None = None,
        t_max: float | None = None,
        q_min: float | None = None,
        beta_s: float = 0.74,
        beta_t: float = 0.63,
        beta_q: float = 1.0,
        upsilon1: float = -0.037,
        upsilon2: float = 2.25,
        qp_knee: float = 28.0,
        refine_joint: bool = False,
    ):
        self.alpha_q = alpha_q
        self.alpha_s_hat = alpha_s_hat
        self.alpha_t = alpha_t
        self.s_max = s_max
        self.t_max = t_max
        self.q_min = q_min
        self.beta_s = beta_s
        self.beta_t = beta_t
        self.beta_q = beta_q
        self.upsilon1 = upsilon1
        self.upsilon2 = upsilon2
        self.qp_knee = qp_knee
        self.refine_joint = refine_joint

    def _constants(self) -> ShapeConstants:
        return ShapeConstants(
            beta_s=self.beta_s,
            beta_t=self.beta_t,
            beta_q=self.beta_q,
            upsilon1=self.upsilon1,
            upsilon2=self.upsilon2,
            qp_knee=self.qp_knee,
        )

    def fit(self, X, y):
        """Estimate the three decay rates from normalized quality data."""
        arr = _as_points_matrix(X)
        ya = np.asarray(y, dtype=float)
        if ya.shape != (arr.shape[0],):
            raise DomainError(
                f"y must be one value per row of X, got shape {ya.shape}"
            )
        if not np.all(np.isfinite(ya)) or not np.all(ya > 0.0):
            raise DomainError("y must be finite and > 0")
        cells: dict[tuple[float, float, float], float] = {}
        for (s, t, q), val in zip(map(tuple, arr), ya):
            key = (float(s), float(t), float(q))
            if key in cells:
                raise DataError(f"duplicate operating point {key}")
            cells[key] = float(val)
        self.s_max_ = float(self.s_max) if self.s_max is not None else max(k[0] for k in cells)
        self.t_max_ = float(self.t_max) if self.t_max is not None else max(k[1] for k in cells)
        self.q_min_ = float(self.q_min) if self.q_min is not None else min(k[2] for k in cells)
        params, report = fit_cells(
            cells, self._constants(), refine_joint=self.refine_joint
        )
        self.alpha_q_ = params.alpha_q
        self.alpha_s_hat_ = params.alpha_s_hat
        self.alpha_t_ = params.alpha_t
        self.params_ = params
        self.fit_report_ = report
        self.n_features_in_ = 3
        return self

    def _effective(self) -> tuple[SequenceParams, tuple[float, float, float]]:
        if hasattr(self, "alpha_q_"):
            return self.params_, (self.s_max_, self.t_max_, self.q_min_)
        preset = (self.alpha_q, self.alpha_s_hat, self.alpha_t)
        refs = (self.s_max, self.t_max, self.q_min)
        if all(v is not None for v in preset + refs):
            return SequenceParams(*preset), tuple(float(v) for v in refs)
        raise NotFittedError(
            "QStarModel is not fitted; call fit() or construct with all three "
            "alpha parameters and the (s_max, t_max, q_min) references"
        )

    def predict(self, X) -> np.ndarray:
        """Model quality at each ``(s, t, q)`` row."""
        arr = _as_points_matrix(X)
        params, (s_max, t_max, q_min) = self._effective()
        consts = self._constants()
        return np.array(
            [
                qstar(StarPoint(s, t, q, s_max, t_max, q_min), params, consts)
                for s, t, q in arr
            ]
        )

    def components(self, X) -> np.ndarray:
        """The three factors per row, columns ``(mnqq, mnqs, mnqt)``."""
        arr = _as_points_matrix(X)
        params, (s_max, t_max, q_min) = self._effective()
        consts = self._constants()
        return np.array(
            [
                qstar_components(StarPoint(s, t, q, s_max, t_max, q_min), params, consts)
                for s, t, q in arr
            ]
        )

    def score(self, X, y) -> float:
        """Pearson correlation between predictions and ``y``.

        The conventional accuracy measure in this domain (rather than R^2).
        """
        return stats.pcc(np.asarray(y, dtype=float), self.predict(X))
