"""Perceptual video quality as a product of resolution and quantization factors.

The package covers the full workflow around the model: processing raw
subjective ratings into MOS tables, fitting the per-sequence decay
parameters and shared shape constants, validating predictions (PCC, RMSE,
three-way ANOVA), and selecting the best operating point under a rate
budget. See the README for the file formats and the ``qstar`` CLI.
"""

from .adaptation import CandidateGrid, Selection, select_star
from .errors import (
    DataError,
    DegenerateDataError,
    DomainError,
    InfeasibleBudgetError,
    MissingAnchorError,
    NumericalError,
    QStarError,
    UnbalancedDesignError,
)
from .estimator import QStarModel
from .fitting import (
    FitReport,
    NormalizedCurve,
    ShapeConstantsFit,
    curves_from_cells,
    derive_curves,
    fit_alpha_q,
    fit_alpha_s_hat,
    fit_alpha_s_per_qp,
    fit_alpha_t,
    fit_cells,
    fit_sequence,
    fit_shape_constants,
)
from .model import (
    SequenceParams,
    ShapeConstants,
    StarPoint,
    inverse_exponential,
    l_of_qp,
    mnqq,
    mnqs,
    mnqs_raw,
    mnqt,
    qp_from_qs,
    qs_from_qp,
    qstar,
    qstar_components,
)
from .pipeline import (
    LinearMap,
    MosCell,
    MosTable,
    PipelineConfig,
    RatingRecord,
    RescaleConfig,
    ScaledRecord,
    StarLabel,
    ZScoreRecord,
    aggregate_mos,
    apply_linear_map,
    map_dataset,
    process_ratings,
    rescale,
    screen_bt500,
    screen_ratio_average,
    zscore,
)
from .stats import AnovaRow, AnovaTable, anova3, betainc_reg, f_sf, pcc, rmse

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # model
    "StarPoint",
    "ShapeConstants",
    "SequenceParams",
    "qp_from_qs",
    "qs_from_qp",
    "l_of_qp",
    "inverse_exponential",
    "mnqt",
    "mnqs_raw",
    "mnqs",
    "mnqq",
    "qstar",
    "qstar_components",
    # estimator
    "QStarModel",
    # fitting
    "NormalizedCurve",
    "FitReport",
    "ShapeConstantsFit",
    "curves_from_cells",
    "derive_curves",
    "fit_alpha_t",
    "fit_alpha_q",
    "fit_alpha_s_per_qp",
    "fit_alpha_s_hat",
    "fit_cells",
    "fit_sequence",
    "fit_shape_constants",
    # pipeline
    "StarLabel",
    "RatingRecord",
    "ZScoreRecord",
    "ScaledRecord",
    "LinearMap",
    "RescaleConfig",
    "MosCell",
    "MosTable",
    "PipelineConfig",
    "zscore",
    "screen_bt500",
    "screen_ratio_average",
    "map_dataset",
    "apply_linear_map",
    "rescale",
    "aggregate_mos",
    "process_ratings",
    # stats
    "pcc",
    "rmse",
    "f_sf",
    "betainc_reg",
    "anova3",
    "AnovaRow",
    "AnovaTable",
    # adaptation
    "CandidateGrid",
    "Selection",
    "select_star",
    # errors
    "QStarError",
    "DomainError",
    "DataError",
    "MissingAnchorError",
    "DegenerateDataError",
    "UnbalancedDesignError",
    "InfeasibleBudgetError",
    "NumericalError",
]
