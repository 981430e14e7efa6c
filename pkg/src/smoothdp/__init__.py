"""Smoothed differential privacy accounting for noiseless sampling mechanisms."""

from .adversary import adjusted_utility, dp_error_tradeoff_check, error_pair, utility_bound_check
from .bounds import (
    BoundNotApplicable,
    BoundParams,
    shm_dp_lower_bound,
    shm_tightness_floor,
    shm_upper_bound,
    with_replacement_bound,
    with_replacement_delta_table,
)
from .dist import (
    DistributionSet,
    FinitePMF,
    bernoulli_pmf,
    in_convex_hull,
    quantized_gaussian,
    quantized_laplacian,
    reduce_to_vertices,
    sgd_distribution_set,
    strict_positivity,
)
from .mechanisms import EnumerationLimitError, HistogramDB, MechanismDescriptor, SampleHistogram, output_pmf
from .numeric import FLOAT, RATIONAL, Epsilon
from .pointwise import PointwiseDelta, directed_d, pointwise_delta, worst_case_dp_delta
from .reports import PrivacyReport, compose, post_process, pre_process
from .smoothed import PrivacyQuery, smoothed_delta, smoothed_delta_exact, smoothed_delta_mc

__version__ = "0.1.0"

__all__ = [
    "BoundNotApplicable",
    "BoundParams",
    "DistributionSet",
    "EnumerationLimitError",
    "Epsilon",
    "FLOAT",
    "FinitePMF",
    "HistogramDB",
    "MechanismDescriptor",
    "PointwiseDelta",
    "PrivacyQuery",
    "PrivacyReport",
    "RATIONAL",
    "SampleHistogram",
    "adjusted_utility",
    "bernoulli_pmf",
    "compose",
    "directed_d",
    "dp_error_tradeoff_check",
    "error_pair",
    "in_convex_hull",
    "output_pmf",
    "pointwise_delta",
    "post_process",
    "pre_process",
    "quantized_gaussian",
    "quantized_laplacian",
    "reduce_to_vertices",
    "sgd_distribution_set",
    "shm_dp_lower_bound",
    "shm_tightness_floor",
    "shm_upper_bound",
    "smoothed_delta",
    "smoothed_delta_exact",
    "smoothed_delta_mc",
    "strict_positivity",
    "utility_bound_check",
    "with_replacement_bound",
    "with_replacement_delta_table",
    "worst_case_dp_delta",
]
