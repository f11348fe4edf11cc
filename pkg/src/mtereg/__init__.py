"""Robust sparse regression by (penalized) maximum tangent likelihood."""
from .cd_core import (LassoSolution, Standardization, WeightedLassoProblem, destandardize,
                      soft_threshold, solve_weighted_lasso, standardize)
from .data import Dataset, DataError, apply_log, read_csv, write_csv
from .metrics import estimation_error, mspe, model_error, selection_score, summarize
from .mte_fit import (FitConfig, FitResult, NoInformationError, fit_baseline, fit_mte,
                      fit_path, fit_penalized, fit_penalized_mte)
from .robust_init import DegenerateScaleError, fit_lad, mad_scale, robust_init
from .simgen import SimDesign, gen_covariates, gen_dataset, gen_errors
from .tangent_loss import (LossParams, ln_t, mte_gradient, mte_loss, residual_density,
                           weight)
from .tuning import (TuningError, estimate_asymptotic_cov, select_lambda_bic,
                     select_lambda_cv, select_t)

__version__ = "0.1.0"
