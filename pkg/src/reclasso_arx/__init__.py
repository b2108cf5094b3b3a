"""Lasso AR-X forecasting with homotopy updates and online penalty tuning."""
from .arx import LaggedDesign, SeriesSet, build_lag_design, fit_ols, ic_lag_select
from .datagen import SimConfig, TrueModel, simulate_arx
from .errors import NumericalError, ReclassoError
from .homotopy import ActiveModel, lambda_path, reclasso_update
from .solver import LassoProblem, coordinate_descent, kkt_check, lambda_max
from .tuning import PenaltyGrid, PenaltyTrajectory, SplitConfig

__version__ = "0.1.0"

__all__ = [
    "ActiveModel",
    "LaggedDesign",
    "LassoProblem",
    "NumericalError",
    "PenaltyGrid",
    "PenaltyTrajectory",
    "ReclassoError",
    "SeriesSet",
    "SimConfig",
    "SplitConfig",
    "TrueModel",
    "build_lag_design",
    "coordinate_descent",
    "fit_ols",
    "ic_lag_select",
    "kkt_check",
    "lambda_max",
    "lambda_path",
    "reclasso_update",
    "simulate_arx",
]
