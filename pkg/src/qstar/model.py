"""Core quality model: QP/stepsize mapping and the three factor functions.

Quality of a coded video at spatial resolution ``s`` (pixels per frame),
temporal resolution ``t`` (Hz) and quantization stepsize ``q`` is modelled as
the product of three normalized factors, each a generalized inverse
exponential of a normalized coordinate:

* ``mnqq`` -- quantization factor of ``q_min / q``,
* ``mnqs`` -- spatial factor of ``s / s_max``, whose decay rate is tied to
  the quantization parameter through the piecewise-linear multiplier
  :func:`l_of_qp`,
* ``mnqt`` -- temporal factor of ``t / t_max``.

All functions are pure; every value is validated on entry and results lie in
``(0, 1]`` on the supported domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .validation import check_finite, check_positive

#: QP value up to which a ShapeConstants set must keep L(qp) positive.
QP_VALIDITY_MAX = 51.0


@dataclass(frozen=True)
class ShapeConstants:
    """Content-independent constants of the quality model.

    ``beta_*`` shape the three inverse-exponential factors; ``upsilon1``,
    ``upsilon2`` and ``qp_knee`` define the piecewise-linear multiplier
    L(qp) that couples the spatial decay rate to the quantization parameter.
    Defaults are the values fitted on the model's training data.
    """

    beta_s: float = 0.74
    beta_t: float = 0.63
    beta_q: float = 1.0
    upsilon1: float = -0.037
    upsilon2: float = 2.25
    qp_knee: float = 28.0

    def __post_init__(self):
        for name in ("beta_s", "beta_t", "beta_q"):
            check_positive(name, getattr(self, name))
        check_finite("upsilon1", self.upsilon1)
        check_finite("upsilon2", self.upsilon2)
        check_finite("qp_knee", self.qp_knee)
        # L is linear above the knee, so positivity at both ends of the
        # supported QP range implies positivity everywhere on it.
        knee_val = self.upsilon1 * self.qp_knee + self.upsilon2
        hi = max(QP_VALIDITY_MAX, self.qp_knee)
        hi_val = self.upsilon1 * hi + self.upsilon2
        if knee_val <= 0.0 or hi_val <= 0.0:
            raise DomainError(
                f"L(qp) must stay positive on [{self.qp_knee:g}, {hi:g}]; "
                f"got L({self.qp_knee:g})={knee_val:g}, L({hi:g})={hi_val:g}"
            )


@dataclass(frozen=True)
class SequenceParams:
    """The three content-dependent decay parameters of one source sequence."""

    alpha_q: float
    alpha_s_hat: float
    alpha_t: float

    def __post_init__(self):
        check_positive("alpha_q", self.alpha_q)
        check_positive("alpha_s_hat", self.alpha_s_hat)
        check_positive("alpha_t", self.alpha_t)


@dataclass(frozen=True)
class StarPoint:
    """One operating point plus the reference extremes it is judged against.

    ``s`` is pixels per frame (width x height), ``t`` the frame rate in Hz
    and ``q`` the linear quantization stepsize.
    """

    s: float
    t: float
    q: float
    s_max: float
    t_max: float
    q_min: float

    def __post_init__(self):
        check_positive("s", self.s)
        check_positive("t", self.t)
        check_positive("q", self.q)
        check_positive("s_max", self.s_max)
        check_positive("t_max", self.t_max)
        check_positive("q_min", self.q_min)
        if self.s > self.s_max:
            raise DomainError(f"s={self.s:g} exceeds s_max={self.s_max:g}")
        if self.t > self.t_max:
            raise DomainError(f"t={self.t:g} exceeds t_max={self.t_max:g}")
        if self.q < self.q_min:
            raise DomainError(f"q={self.q:g} is below q_min={self.q_min:g}")

    @property
    def s_norm(self) -> float:
        return self.s / self.s_max

    @property
    def t_norm(self) -> float:
        return self.t / self.t_max

    @property
    def q_norm(self) -> float:
        """Inverted normalized stepsize ``q_min / q``."""
        return self.q_min / self.q


def qp_from_qs(q: float) -> float:
    """Quantization parameter for a linear stepsize: ``4 + 6*log2(q)``."""
    q = check_positive("q", q)
    return 4.0 + 6.0 * math.log2(q)


def qs_from_qp(qp: float) -> float:
    """Linear quantization stepsize for a QP: ``2**((qp - 4) / 6)``."""
    qp = check_finite("qp", qp)
    return 2.0 ** ((qp - 4.0) / 6.0)


def l_of_qp(qp: float, consts: ShapeConstants = ShapeConstants()) -> float:
    """Piecewise-linear spatial-decay multiplier, clamped below the knee."""
    qp = check_finite("qp", qp)
    qp_eff = max(qp, consts.qp_knee)
    return consts.upsilon1 * qp_eff + consts.upsilon2


def inverse_exponential(x: float, alpha: float, beta: float = 1.0) -> float:
    """Normalized inverse-exponential curve ``(1-e^(-a*x^b)) / (1-e^(-a))``.

    The curve family underlying all three quality factors. Equals 1 at
    ``x = 1`` and tends to 0 as ``x -> 0+``; strictly increasing in ``x``
    and, for fixed ``x < 1``, strictly increasing in ``alpha``.
    """
    x = check_positive("x", x)
    alpha = check_positive("alpha", alpha)
    beta = check_positive("beta", beta)
    # expm1 keeps precision for small alpha*x**beta.
    return math.expm1(-alpha * x**beta) / math.expm1(-alpha)


def mnqt(t: float, t_max: float, alpha_t: float, consts: ShapeConstants = ShapeConstants()) -> float:
    """Temporal quality factor at frame rate ``t`` relative to ``t_max``."""
    t = check_positive("t", t)
    t_max = check_positive("t_max", t_max)
    if t > t_max:
        raise DomainError(f"t={t:g} exceeds t_max={t_max:g}")
    return inverse_exponential(t / t_max, alpha_t, consts.beta_t)


def mnqs_raw(s: float, s_max: float, alpha_s: float, beta_s: float = 0.74) -> float:
    """Spatial quality factor with an explicitly supplied decay rate."""
    s = check_positive("s", s)
    s_max = check_positive("s_max", s_max)
    if s > s_max:
        raise DomainError(f"s={s:g} exceeds s_max={s_max:g}")
    return inverse_exponential(s / s_max, alpha_s, beta_s)


def mnqs(
    s: float,
    q: float,
    s_max: float,
    alpha_s_hat: float,
    consts: ShapeConstants = ShapeConstants(),
) -> float:
    """Spatial quality factor with the decay rate tied to the stepsize.

    The effective decay rate is ``alpha_s_hat * L(QP(q))``.
    """
    alpha_s_hat = check_positive("alpha_s_hat", alpha_s_hat)
    alpha_s = alpha_s_hat * l_of_qp(qp_from_qs(q), consts)
    return mnqs_raw(s, s_max, alpha_s, consts.beta_s)


def mnqq(q: float, q_min: float, alpha_q: float, consts: ShapeConstants = ShapeConstants()) -> float:
    """Quantization quality factor at stepsize ``q`` relative to ``q_min``."""
    q = check_positive("q", q)
    q_min = check_positive("q_min", q_min)
    if q < q_min:
        raise DomainError(f"q={q:g} is below q_min={q_min:g}")
    return inverse_exponential(q_min / q, alpha_q, consts.beta_q)


def qstar_components(
    point: StarPoint,
    params: SequenceParams,
    consts: ShapeConstants = ShapeConstants(),
) -> tuple[float, float, float]:
    """The three factors ``(mnqq, mnqs, mnqt)`` at one operating point."""
    fq = mnqq(point.q, point.q_min, params.alpha_q, consts)
    fs = mnqs(point.s, point.q, point.s_max, params.alpha_s_hat, consts)
    ft = mnqt(point.t, point.t_max, params.alpha_t, consts)
    return fq, fs, ft


def qstar(
    point: StarPoint,
    params: SequenceParams,
    consts: ShapeConstants = ShapeConstants(),
) -> float:
    """Overall normalized quality: the product of the three factors.

    Equals 1 at ``(s_max, t_max, q_min)``; nondecreasing in ``s`` and ``t``
    and nonincreasing in ``q`` with the other coordinates fixed.
    """
    fq, fs, ft = qstar_components(point, params, consts)
    return fq * fs * ft
