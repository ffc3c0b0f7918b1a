"""Sparse VAR toolkit: panels, LASSO estimation, walk-forward tuning,
recursive forecasting, forecast evaluation and Granger-causality networks."""

from sparsevar.panel import (
    LagEmbedding,
    PanelError,
    StandardizationStats,
    SummaryReport,
    TimePanel,
    destandardize,
    lag_embed,
    log_returns,
    standardize,
    summary_stats,
)
from sparsevar.lasso import (
    LassoConfig,
    LassoError,
    LassoGrid,
    VarModel,
    bic_score,
    fit_fgls_lasso_var,
    fit_lasso_var,
    fit_panel_var,
    kkt_violation,
    soft_threshold,
)
from sparsevar.cv import WalkForwardPlan, make_splits, select_lambda
from sparsevar.forecasting import ForecastSet, iterate_forecast, recursive_exercise
from sparsevar.evaluation import epa_test, evaluate_forecasts, mda, rmse, star_marks
from sparsevar.granger import GrangerSpec, granger_network, pds_granger
from sparsevar.synthetic import SyntheticSpec, make_sparse_var, simulate

__all__ = [
    "TimePanel",
    "PanelError",
    "StandardizationStats",
    "LagEmbedding",
    "SummaryReport",
    "log_returns",
    "standardize",
    "destandardize",
    "lag_embed",
    "summary_stats",
    "LassoConfig",
    "LassoGrid",
    "LassoError",
    "VarModel",
    "soft_threshold",
    "fit_lasso_var",
    "fit_fgls_lasso_var",
    "fit_panel_var",
    "kkt_violation",
    "bic_score",
    "WalkForwardPlan",
    "make_splits",
    "select_lambda",
    "ForecastSet",
    "iterate_forecast",
    "recursive_exercise",
    "rmse",
    "mda",
    "epa_test",
    "star_marks",
    "evaluate_forecasts",
    "GrangerSpec",
    "pds_granger",
    "granger_network",
    "SyntheticSpec",
    "make_sparse_var",
    "simulate",
]
