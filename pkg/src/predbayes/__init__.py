"""Predictive-resampling inference for population functionals.

Fit a predictive engine to observed data, simulate its future forward, and
push the augmented empirical measure through a functional: the spread of the
resulting draws is the posterior.  The package provides the recursive
Gaussian engine with bias schedules, natural-gradient regression engines,
the resampling driver, coverage-calibration experiments, and predictive
checks of the engine itself.
"""

from .diagnostics import PpcReport, TestFunction, one_sided_p, ppc_replicates, test_stat
from .engines import (BiasSchedule, GaussianEngine, PolyaUrnEngine, QuadratureError,
                      QuadratureSpec, gaussian_draw, gaussian_init, gaussian_update,
                      polya_init, tv_probe, tv_scan)
from .experiments import (Dgp, ExperimentSummary, PathFan, bias_from_label,
                          run_bahadur_check, run_coverage_formula_link,
                          run_mean_coverage, run_path_fan, run_ppc_study,
                          run_quantile_coverage, run_regression_ppc,
                          synthetic_regression)
from .functionals import (FunctionalSpec, coverage_limit, evaluate,
                          mean_asymptotic_sd, normal_cdf, normal_quantile,
                          quantile_asymptotic_var)
from .measures import (MixtureMeasure, Sample, ecdf_eval, empirical_quantile,
                       mean, mixture_eval, variance, w1_distance, winf_distance)
from .regression import (CovariateResampler, RegressionEngine, TailCorrection,
                         estimate_tail_covariance, gauss_reg_init, hybrid_finalize,
                         natural_gradient, reg_step, treg_init)
from .resampler import (Horizon, PbpDraws, ResampleConfig, covers,
                        credible_interval, pbp_sample, run_path)
from .rng import substream

__version__ = "0.1.0"
