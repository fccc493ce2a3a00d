"""Skewed generalized t distribution (SkeGTD): density, moments, estimation and simulation."""

from .core import (
    SGNParams,
    SkeGTDParams,
    Summary,
    limiting_case_check,
    normalized_raw_moment,
    shape_moments,
    skegtd_cdf,
    skegtd_logpdf,
    skegtd_moment,
    skegtd_pdf,
    skegtd_quantile,
    skegtd_sample,
    skegtd_sf,
    skegtd_summary,
)
from .errors import (
    DomainError,
    FitError,
    MomentNotFiniteError,
    NotPositiveDefiniteError,
    SeriesNonConvergence,
    SkeGTDError,
)
from .lmom import LMomentSet, fit_lme, sample_lmoments, theoretical_lmoments
from .mle import OmegaParams, fisher_info, fit_mle, observed_loglik
from .models import CandidateModel, compare, fit_candidate
from .regress import RegressionFit, fit_regression, residual_report
from .report import FitReport, information_criteria
from .simlab import ExperimentSpec, ExperimentTable, run_recovery, run_selection
from .specfun import RngStream
from .tse import fit_tse, hrm_mode

__version__ = "0.1.0"


__all__ = [
    "SGNParams",
    "SkeGTDParams",
    "Summary",
    "limiting_case_check",
    "normalized_raw_moment",
    "shape_moments",
    "skegtd_cdf",
    "skegtd_logpdf",
    "skegtd_moment",
    "skegtd_pdf",
    "skegtd_quantile",
    "skegtd_sample",
    "skegtd_sf",
    "skegtd_summary",
    "DomainError",
    "FitError",
    "MomentNotFiniteError",
    "NotPositiveDefiniteError",
    "SeriesNonConvergence",
    "SkeGTDError",
    "LMomentSet",
    "fit_lme",
    "sample_lmoments",
    "theoretical_lmoments",
    "OmegaParams",
    "fisher_info",
    "fit_mle",
    "observed_loglik",
    "CandidateModel",
    "compare",
    "fit_candidate",
    "RegressionFit",
    "fit_regression",
    "residual_report",
    "FitReport",
    "information_criteria",
    "ExperimentSpec",
    "ExperimentTable",
    "run_recovery",
    "run_selection",
    "RngStream",
    "fit_tse",
    "hrm_mode",
]
