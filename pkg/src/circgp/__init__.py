"""Space-time Gaussian process models for circular data.

Wrapped and projected normal processes with a non-separable Gneiting
space-time correlation, fitted by MCMC, with kriging, covariate variants,
circular forecast scores and a simulation-study harness.
"""

__version__ = "0.1.0"

__all__ = [
    "Chain", "Dataset", "DesignInfo", "GneitingParams", "McmcConfig", "PnParams",
    "PredictiveSamples", "PriorConfig", "ProjectedParams", "WnParams", "ape",
    "atan_star", "build_covariance", "circ_dist", "circ_summary", "credible_arc",
    "cross_covariance", "crps_mc", "fit_pn", "fit_variant", "fit_wn", "gneiting_corr",
    "inverse_tan_link", "krige_pn", "krige_variant", "krige_wn", "parse_prior",
    "pn_joint_pdf", "pn_pdf", "score_windows", "simulate_pn", "simulate_wn",
    "summarize", "wn_pdf", "wrap",
]

from .circular import (  # noqa: E402
    ProjectedParams,
    atan_star,
    circ_dist,
    circ_summary,
    credible_arc,
    pn_joint_pdf,
    pn_pdf,
    wn_pdf,
    wrap,
)
from .covariance import GneitingParams, build_covariance, cross_covariance, gneiting_corr  # noqa: E402
from .covariates import DesignInfo, fit_variant, inverse_tan_link, krige_variant  # noqa: E402
from .dataset import Dataset  # noqa: E402
from .mcmc import Chain, McmcConfig, summarize  # noqa: E402
from .priors import PriorConfig, parse_prior  # noqa: E402
from .projected import PnParams, fit_pn, krige_pn, simulate_pn  # noqa: E402
from .scoring import PredictiveSamples, ape, crps_mc, score_windows  # noqa: E402
from .wrapped import WnParams, fit_wn, krige_wn, simulate_wn  # noqa: E402
