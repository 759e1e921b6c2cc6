"""Shared fixtures: published parameter sets, the 27-cell grid, synthesizers."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from qstar import SequenceParams, ShapeConstants, StarPoint, qstar
from qstar.pipeline import StarLabel

# the whole suite is meant to be bit-deterministic between runs
settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")

# Per-sequence decay parameters (alpha_q, alpha_s_hat, alpha_t) as published
# for the seven training sequences.
PUBLISHED_PARAMS = {
    "city": SequenceParams(7.25, 3.52, 4.10),
    "crew": SequenceParams(4.51, 4.07, 3.09),
    "harbour": SequenceParams(9.65, 4.58, 2.83),
    "ice": SequenceParams(5.61, 3.68, 3.00),
    "soccer": SequenceParams(6.31, 4.55, 2.23),
    "fg": SequenceParams(10.68, 4.83, 2.80),
    "foreman": SequenceParams(4.57, 5.94, 3.80),
}

RESOLUTIONS = ((176, 144), (352, 288), (704, 576))
FPS_LEVELS = (7.5, 15.0, 30.0)
QP_LEVELS = (28.0, 36.0, 44.0)

S_MAX = 704.0 * 576.0
T_MAX = 30.0
Q_MIN = 16.0  # stepsize at QP 28


def grid_labels() -> list[StarLabel]:
    return [
        StarLabel(w, h, fps, qp)
        for (w, h) in RESOLUTIONS
        for fps in FPS_LEVELS
        for qp in QP_LEVELS
    ]


def grid_points() -> list[StarPoint]:
    return [
        StarPoint(l.s, l.t, l.q, S_MAX, T_MAX, Q_MIN) for l in grid_labels()
    ]


def synth_cells(
    params: SequenceParams,
    consts: ShapeConstants = ShapeConstants(),
    scale: float = 9.0,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> dict[tuple[float, float, float], float]:
    """27-cell quality surface generated by the model, optionally noisy.

    Noise is additive on the normalized scale before the MOS scaling.
    """
    cells = {}
    for point in grid_points():
        value = qstar(point, params, consts)
        if noise_sigma > 0.0:
            value += rng.normal(0.0, noise_sigma)
            value = max(value, 1e-6)
        cells[(point.s, point.t, point.q)] = scale * value
    return cells


@pytest.fixture
def city_params() -> SequenceParams:
    return PUBLISHED_PARAMS["city"]


@pytest.fixture
def default_consts() -> ShapeConstants:
    return ShapeConstants()
