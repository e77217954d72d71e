"""Distribution regression with an endogenous regressor.

Estimates conditional distribution functions F(y | x, y2) threshold by
threshold with a binary-response model, corrects for an endogenous regressor
either by full maximum likelihood or by a three-step control-function
estimator, restores monotonicity of the fitted curve (isotonic projection or
rearrangement), and quantifies uncertainty with bootstrap bands.
"""

from .dataio import ColumnSpec, Dataset, load_csv, parse_colspec_file, read_curves, write_curves
from .driver import CdfCurve, QuantileCurve, ThresholdGrid, fit_curve, quantiles_from_curve
from .errors import (
    AllPointsFailed,
    BoundarySolution,
    DegenerateOutcome,
    IvdrError,
    LevelOutOfRange,
    MissingColumn,
    NonFinite,
    NonFiniteObjective,
    NonNumericColumn,
    RankDeficient,
    ReplicateFailure,
    SeparationSuspected,
)
from .inference import BandResult, Recipe, bootstrap_bands, difference_bands
from .ivprobit import IvProbitMlFit, ThetaFull, ml_cdf_at, ml_fit, ml_loglik
from .monotone import MonotoneCurve, clamp_unit, isotonic, monotonize, pava, rearrange
from .numerics import MaximizeResult, OlsFit, maximize_smooth, ols
from .probit import ProbitFit, probit_fit, probit_loglik
from .simulation import DgpConfig, McCell, McReport, draw_dgp, run_study, true_cdf
from .three_step import FirstStage, ThetaTilde, cdf_at, first_stage, second_stage

__version__ = "0.1.0"

__all__ = [
    "AllPointsFailed",
    "BandResult",
    "BoundarySolution",
    "CdfCurve",
    "ColumnSpec",
    "Dataset",
    "DegenerateOutcome",
    "DgpConfig",
    "FirstStage",
    "IvProbitMlFit",
    "IvdrError",
    "LevelOutOfRange",
    "MaximizeResult",
    "McCell",
    "McReport",
    "MissingColumn",
    "MonotoneCurve",
    "NonFinite",
    "NonFiniteObjective",
    "NonNumericColumn",
    "OlsFit",
    "ProbitFit",
    "QuantileCurve",
    "RankDeficient",
    "Recipe",
    "ReplicateFailure",
    "SeparationSuspected",
    "ThetaFull",
    "ThetaTilde",
    "ThresholdGrid",
    "bootstrap_bands",
    "cdf_at",
    "clamp_unit",
    "difference_bands",
    "draw_dgp",
    "first_stage",
    "fit_curve",
    "isotonic",
    "load_csv",
    "maximize_smooth",
    "ml_cdf_at",
    "ml_fit",
    "ml_loglik",
    "monotonize",
    "ols",
    "parse_colspec_file",
    "pava",
    "probit_fit",
    "probit_loglik",
    "quantiles_from_curve",
    "read_curves",
    "rearrange",
    "run_study",
    "second_stage",
    "true_cdf",
    "write_curves",
]
