"""Convolution-type estimators of the response density in nonparametric
regression, with rate/efficiency Monte Carlo studies and a CLI front end.
"""

__version__ = "1.0.0"

from .kernels import (BandwidthKind, BandwidthRule, Kernel, bandwidth,
                      box_kernel, convolve_kernels, logistic_kernel,
                      make_third_order_kernel, self_convolve)
from .scenarios import (Dataset, Scenario, builtin_names, builtin_scenario,
                        scenario_from_spec, scenario_to_spec, truth, validate)
from .smoother import (SmootherFit, WeightFunction, fit_all, fit_at,
                       quartic_weight)
from .density import (DensityEstimate, EstimatorConfig, Method,
                      convolution_fft, estimate_pipeline, kde,
                      oracle_von_mises, von_mises_direct)
from .efficiency import (CorrectionTerm, FisherDegenerateError, crossfit,
                         efficiency_correction, efficient_estimate)
from .asymptotics import (CovarianceReport, EmpiricalTerms, RateReport,
                          empirical_terms, gamma, influence, rate_fit)
from .experiments import (StudyConfig, collapse_study, expansion_study,
                          rate_study, smoother_linearization_study,
                          variance_study)

__all__ = [
    "__version__",
    "BandwidthKind", "BandwidthRule", "Kernel", "bandwidth", "box_kernel",
    "convolve_kernels", "logistic_kernel", "make_third_order_kernel",
    "self_convolve",
    "Dataset", "Scenario", "builtin_names", "builtin_scenario",
    "scenario_from_spec", "scenario_to_spec", "truth", "validate",
    "SmootherFit", "WeightFunction", "fit_all", "fit_at", "quartic_weight",
    "DensityEstimate", "EstimatorConfig", "Method", "convolution_fft",
    "estimate_pipeline", "kde", "oracle_von_mises", "von_mises_direct",
    "CorrectionTerm", "FisherDegenerateError", "crossfit",
    "efficiency_correction", "efficient_estimate",
    "CovarianceReport", "EmpiricalTerms", "RateReport", "empirical_terms",
    "gamma", "influence", "rate_fit",
    "StudyConfig", "collapse_study", "expansion_study", "rate_study",
    "smoother_linearization_study", "variance_study",
]
